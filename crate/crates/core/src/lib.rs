//! Exact computations for |1|-graded Lie algebras: Kostant's Hodge theory,
//! normalization of Cartan connections, and the BGG splitting on the flat
//! foliated model.

pub mod algebra;
pub mod error;
pub mod flat;
pub mod kostant;
pub mod linalg;
pub mod normalization;
pub mod report;
pub mod representation;

pub use algebra::{Family, GradedLieAlgebra};
pub use error::{Error, Result};
pub use kostant::{ComplexOptions, KostantComplex};
pub use representation::{GradedRepresentation, RepresentationKind};
