//! Finite-dimensional representations with the grading-element decomposition
//! `V = V_0 ⊕ ... ⊕ V_N` and the filtration `V^i = ⊕_{j >= i} V_j`.
//!
//! A representation is always stored in a basis adapted to the decomposition:
//! coordinates are grouped slice by slice in increasing order, so each `V_i`
//! is a coordinate range. `basis_change` records the adapted basis in the
//! coordinates the action matrices were supplied in.

use std::ops::Range;
use std::sync::Arc;

use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::algebra::{AlgebraElement, GradedLieAlgebra};
use crate::error::{Error, Result};
use crate::linalg::{commutator, Matrix, Rational};

pub const REPRESENTATION_SCHEMA: &str = "partial-bgg.representation/1";

#[derive(Clone, Debug)]
pub struct GradedRepresentation {
    algebra: Arc<GradedLieAlgebra>,
    name: String,
    action: Vec<Matrix>,
    basis_change: Matrix,
    slice_ranges: Vec<Range<usize>>,
    slice_of: Vec<usize>,
    shift: Rational,
    x_action: Vec<Matrix>,
    z_action: Vec<Matrix>,
}

impl GradedRepresentation {
    /// Builds a graded representation from action matrices given for each
    /// algebra basis element. The grading element must act diagonalizably
    /// with rational eigenvalues that differ by integers.
    pub fn from_action(algebra: Arc<GradedLieAlgebra>, name: impl Into<String>, matrices: Vec<Matrix>) -> Result<Self> {
        if matrices.len() != algebra.dim() {
            return Err(Error::DimensionMismatch {
                expected: algebra.dim(),
                found: matrices.len(),
            });
        }
        let dim = matrices[0].rows();
        if matrices.iter().any(|m| m.rows() != dim || m.cols() != dim) {
            return Err(Error::Construction("action matrices differ in size".into()));
        }
        let rho_e = &matrices[algebra.grading_index()];
        let roots = rho_e.minimal_polynomial().rational_roots();
        let Some(lowest) = roots.first().cloned() else {
            return Err(Error::Spectrum("no rational eigenvalue".into()));
        };

        let mut columns = Vec::with_capacity(dim);
        let mut slice_sizes: Vec<usize> = Vec::new();
        for lambda in &roots {
            let offset = lambda - &lowest;
            if !offset.is_integer() {
                return Err(Error::Spectrum(format!("eigenvalues {lowest} and {lambda} differ by a non-integer")));
            }
            let index = offset.to_integer().try_into().expect("small slice index");
            let shifted = Matrix::from_fn(dim, dim, |r, c| {
                if r == c {
                    &rho_e[(r, c)] - lambda
                } else {
                    rho_e[(r, c)].clone()
                }
            });
            let eigenspace = shifted.nullspace();
            if slice_sizes.len() <= index {
                slice_sizes.resize(index + 1, 0);
            }
            slice_sizes[index] += eigenspace.cols();
            columns.extend(eigenspace.columns());
        }
        if columns.len() != dim {
            return Err(Error::Spectrum(format!(
                "eigenspaces span {} of {dim} dimensions",
                columns.len()
            )));
        }
        let basis_change = Matrix::from_columns(dim, &columns);
        let action = if basis_change == Matrix::identity(dim) {
            matrices
        } else {
            let inv = basis_change
                .inverse()
                .ok_or_else(|| Error::Spectrum("eigenvectors are dependent".into()))?;
            matrices.iter().map(|m| &(&inv * m) * &basis_change).collect()
        };

        let mut slice_ranges = Vec::with_capacity(slice_sizes.len());
        let mut slice_of = Vec::with_capacity(dim);
        let mut start = 0;
        for (i, &s) in slice_sizes.iter().enumerate() {
            slice_ranges.push(start..start + s);
            slice_of.extend(std::iter::repeat(i).take(s));
            start += s;
        }

        let minus = algebra.minus_range();
        let plus = algebra.plus_range();
        let x_action = minus.clone().map(|i| action[i].clone()).collect();
        let dual = algebra.dual_coefficients();
        let z_action = (0..minus.len())
            .map(|a| {
                let mut z = Matrix::zeros(dim, dim);
                for (l, p) in plus.clone().enumerate() {
                    z.add_scaled(&dual[(a, l)], &action[p]);
                }
                z
            })
            .collect();

        Ok(GradedRepresentation {
            algebra,
            name: name.into(),
            action,
            basis_change,
            slice_ranges,
            slice_of,
            shift: lowest,
            x_action,
            z_action,
        })
    }

    /// The defining matrix representation.
    pub fn standard(algebra: Arc<GradedLieAlgebra>) -> Result<Self> {
        let matrices = algebra.basis().to_vec();
        Self::from_action(algebra, "standard", matrices)
    }

    pub fn adjoint(algebra: Arc<GradedLieAlgebra>) -> Result<Self> {
        let matrices = (0..algebra.dim()).map(|i| algebra.ad_basis(i).clone()).collect();
        Self::from_action(algebra, "adjoint", matrices)
    }

    /// `ρ*(A) = -ρ(A)^T`, regraded.
    pub fn dual(&self) -> Result<Self> {
        let matrices = self.action.iter().map(|m| -&m.transpose()).collect();
        Self::from_action(self.algebra.clone(), format!("dual-{}", self.name), matrices)
    }

    pub fn algebra(&self) -> &Arc<GradedLieAlgebra> {
        &self.algebra
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.action.first().map_or(0, Matrix::rows)
    }

    /// `N`: the highest slice index.
    pub fn filtration_length(&self) -> usize {
        self.slice_ranges.len() - 1
    }

    pub fn slice_dims(&self) -> Vec<usize> {
        self.slice_ranges.iter().map(|r| r.len()).collect()
    }

    pub fn slice_range(&self, i: usize) -> Range<usize> {
        self.slice_ranges.get(i).cloned().unwrap_or(0..0)
    }

    /// Slice index of an adapted coordinate.
    pub fn slice_of(&self, coordinate: usize) -> usize {
        self.slice_of[coordinate]
    }

    /// Eigenvalue of the grading element on `V_0`; `V_i` has eigenvalue `i + shift`.
    pub fn shift(&self) -> &Rational {
        &self.shift
    }

    pub fn basis_change(&self) -> &Matrix {
        &self.basis_change
    }

    /// `ρ(b_i)` for the `i`-th algebra basis element, in the adapted basis.
    pub fn action_matrix(&self, i: usize) -> &Matrix {
        &self.action[i]
    }

    /// `ρ(X_a)` for the native `g_-1` basis.
    pub fn x_action(&self, a: usize) -> &Matrix {
        &self.x_action[a]
    }

    /// `ρ(Z^a)` for the Killing-dual `g_1` basis.
    pub fn z_action(&self, a: usize) -> &Matrix {
        &self.z_action[a]
    }

    pub fn rho(&self, x: &AlgebraElement) -> Result<Matrix> {
        if x.len() != self.action.len() {
            return Err(Error::DimensionMismatch {
                expected: self.action.len(),
                found: x.len(),
            });
        }
        let mut out = Matrix::zeros(self.dim(), self.dim());
        for (c, m) in x.0.iter().zip(&self.action) {
            out.add_scaled(c, m);
        }
        Ok(out)
    }

    pub fn act(&self, x: &AlgebraElement, v: &[Rational]) -> Result<Vec<Rational>> {
        if v.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: v.len(),
            });
        }
        Ok(self.rho(x)?.mul_vec(v))
    }

    /// Basis columns of `V_i`.
    pub fn slice_basis(&self, i: usize) -> Matrix {
        let range = self.slice_range(i);
        Matrix::from_fn(self.dim(), range.len(), |r, c| {
            if r == range.start + c {
                Rational::one()
            } else {
                Rational::zero()
            }
        })
    }

    /// Basis columns of `V^i = ⊕_{j >= i} V_j`, for `0 <= i <= N + 1`.
    pub fn filtration_subspace(&self, i: usize) -> Result<Matrix> {
        let n = self.filtration_length();
        if i > n + 1 {
            return Err(Error::IndexOutOfRange { index: i, max: n + 1 });
        }
        let start = self.slice_ranges.get(i).map_or(self.dim(), |r| r.start);
        let cols = self.dim() - start;
        Ok(Matrix::from_fn(self.dim(), cols, |r, c| {
            if r == start + c {
                Rational::one()
            } else {
                Rational::zero()
            }
        }))
    }

    /// `ρ([b_i, b_j]) = [ρ(b_i), ρ(b_j)]` on all basis pairs.
    pub fn check_homomorphism(&self) -> bool {
        let a = &self.algebra;
        (0..a.dim()).all(|i| {
            (i + 1..a.dim()).all(|j| {
                let bracket = AlgebraElement(a.ad_basis(i).column(j));
                self.rho(&bracket).expect("dimension") == commutator(&self.action[i], &self.action[j])
            })
        })
    }

    /// A grade-`j` element maps `V_i` into `V_{i+j}` (zero when out of range).
    pub fn check_grading_compatibility(&self) -> bool {
        let a = &self.algebra;
        (0..a.dim()).all(|b| {
            let shift = a.grade(b) as i64;
            let m = &self.action[b];
            (0..self.dim()).all(|c| {
                let target = self.slice_of[c] as i64 + shift;
                (0..self.dim()).all(|r| m[(r, c)].is_zero() || self.slice_of[r] as i64 == target)
            })
        })
    }

    pub fn descriptor(&self) -> RepresentationDescriptor {
        let to_strings = |m: &Matrix| -> Vec<Vec<String>> {
            (0..m.rows()).map(|r| m.row(r).iter().map(|x| x.to_string()).collect()).collect()
        };
        RepresentationDescriptor {
            schema: REPRESENTATION_SCHEMA.to_string(),
            name: self.name.clone(),
            dim: self.dim(),
            filtration_length: self.filtration_length(),
            slice_dims: self.slice_dims(),
            shift: self.shift.to_string(),
            action: self.action.iter().map(to_strings).collect(),
            basis_change: to_strings(&self.basis_change),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RepresentationDescriptor {
    pub schema: String,
    pub name: String,
    pub dim: usize,
    pub filtration_length: usize,
    pub slice_dims: Vec<usize>,
    pub shift: String,
    pub action: Vec<Vec<Vec<String>>>,
    pub basis_change: Vec<Vec<String>>,
}

/// Representation selector used by reports and the command line.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RepresentationKind {
    Standard,
    Adjoint,
    DualStandard,
    DualAdjoint,
}

impl RepresentationKind {
    pub const ALL: [RepresentationKind; 4] = [
        RepresentationKind::Standard,
        RepresentationKind::Adjoint,
        RepresentationKind::DualStandard,
        RepresentationKind::DualAdjoint,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            RepresentationKind::Standard => "standard",
            RepresentationKind::Adjoint => "adjoint",
            RepresentationKind::DualStandard => "dual-standard",
            RepresentationKind::DualAdjoint => "dual-adjoint",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == s)
    }

    pub fn build(&self, algebra: Arc<GradedLieAlgebra>) -> Result<GradedRepresentation> {
        match self {
            RepresentationKind::Standard => GradedRepresentation::standard(algebra),
            RepresentationKind::Adjoint => GradedRepresentation::adjoint(algebra),
            RepresentationKind::DualStandard => GradedRepresentation::standard(algebra)?.dual(),
            RepresentationKind::DualAdjoint => GradedRepresentation::adjoint(algebra)?.dual(),
        }
    }
}
