use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid metric: {0}")]
    InvalidMetric(String),

    #[error("step {step} out of range 0..={max}")]
    StepOutOfRange { step: usize, max: usize },

    #[error("not a complex: relative curvature {relative_curvature:e} at step {step} exceeds tolerance")]
    NotAComplex { step: usize, relative_curvature: f64 },

    #[error("not an endomorphism: relative commutation defect {defect:e} at step {step}")]
    NotAnEndomorphism { step: usize, defect: f64 },

    #[error("covector norm {0} is not positive")]
    ZeroCovector(f64),

    #[error("unsupported dimension {0} (expected 2, 3 or 4)")]
    UnsupportedDimension(usize),

    #[error("invalid order reduction plan: {0}")]
    InvalidPlan(String),

    #[error("Euler characteristic is not stable under re-perturbation: {0:?}")]
    InconsistentEuler(Vec<i64>),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("not a closed surface: {0}")]
    NotClosedSurface(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("surface is not orientable")]
    NotOrientable,

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Stable machine-readable name used in CLI error objects.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::ShapeMismatch(_) => "ShapeMismatch",
            Error::InvalidMetric(_) => "InvalidMetric",
            Error::StepOutOfRange { .. } => "StepOutOfRange",
            Error::NotAComplex { .. } => "NotAComplex",
            Error::NotAnEndomorphism { .. } => "NotAnEndomorphism",
            Error::ZeroCovector(_) => "ZeroCovector",
            Error::UnsupportedDimension(_) => "UnsupportedDimension",
            Error::InvalidPlan(_) => "InvalidPlan",
            Error::InconsistentEuler(_) => "InconsistentEuler",
            Error::Parse(_) => "ParseError",
            Error::NotClosedSurface(_) => "NotClosedSurface",
            Error::InvalidArgument(_) => "InvalidArgument",
            Error::NotOrientable => "NotOrientable",
            Error::Io(_) => "IoError",
        }
    }
}

impl From<serde_json::Error> for Error {
    fn from(err: serde_json::Error) -> Self {
        Error::Parse(err.to_string())
    }
}
