use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParameters(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("index {index} out of range 0..={max}")]
    IndexOutOfRange { index: usize, max: usize },

    #[error("broken algebra construction: {0}")]
    Construction(String),

    #[error("grading element does not act diagonalizably with a rational spectrum spaced by integers: {0}")]
    Spectrum(String),

    #[error("Hodge decomposition failed in degree {degree}, slice {slice}: {reason}")]
    DecompositionFailure { degree: usize, slice: usize, reason: String },

    #[error("homology cross-check mismatch in degree {degree}: harmonic {harmonic}, codifferential {via_codifferential}, differential {via_differential}")]
    HomologyMismatch {
        degree: usize,
        harmonic: usize,
        via_codifferential: usize,
        via_differential: usize,
    },

    #[error("argument is not in the kernel of the codifferential (degree {degree})")]
    NotInKernel { degree: usize },

    #[error("minimal polynomial has zero constant term on the (degree {degree}, slice {slice}) block")]
    SingularLaplacian { degree: usize, slice: usize },

    #[error("linear system {0}")]
    LinearSystem(String),

    #[error("polynomial degree {found} exceeds the cap {cap}")]
    DegreeOverflow { found: usize, cap: usize },

    #[error("splitting characterization failed: {0}")]
    Characterization(String),

    #[error("serialization: {0}")]
    Serialization(String),
}

pub type Result<T> = std::result::Result<T, Error>;
