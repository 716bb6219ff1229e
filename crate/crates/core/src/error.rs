use thiserror::Error;

/// Errors raised anywhere in the workbench.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("non-finite parameter `{0}`")]
    NonFinite(&'static str),

    #[error("Bruhat factorization impossible: upper-left entry of the product is {0}")]
    FactorizationImpossible(f64),

    #[error("fundamental-domain reduction did not terminate within {0} steps")]
    NonterminatingReduction(usize),

    #[error("return word of {0} letters exceeds the cusp-excursion guard")]
    CuspExcursion(usize),

    #[error("generator image `{0}` is singular")]
    SingularImage(String),

    #[error("relation `{relation}` violated (max entry defect {defect:e})")]
    RelationViolation { relation: String, defect: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("lattice modes differ")]
    ModeMismatch,

    #[error("unknown generator id {0}")]
    UnknownGenerator(usize),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("every trajectory was truncated or invalid")]
    AllTrajectoriesInvalid,

    #[error("horizon too short: singular exponent gap {gap:.4} below threshold {threshold:.4}")]
    HorizonTooShort { gap: f64, threshold: f64 },

    #[error("spectrum is degenerate (a single exponent block)")]
    DegenerateSpectrum,

    #[error("top exponent is not simple (multiplicity {0})")]
    TopNotSimple(usize),

    #[error("permutation pair does not act transitively")]
    NotTransitive,

    #[error("malformed origami: {0}")]
    MalformedOrigami(String),

    #[error("orbit exceeds the size bound {0}")]
    OrbitOverflow(usize),

    #[error("path does not return to its starting origami")]
    PathNotClosed,

    #[error("origamis belong to different strata")]
    MixedStrata,

    #[error("{0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
