use thiserror::Error;

/// Errors surfaced by the toolkit.
#[derive(Error, Debug)]
pub enum Error {
    #[error(
        "basis precision loss: re-orthogonalized Gram residual {residual:.3e} exceeds 1e-6 at N = {n}; lower N"
    )]
    BasisPrecision { n: usize, residual: f64 },

    #[error("linear system is numerically singular ({context}, condition estimate {cond:.3e})")]
    SingularSystem { context: &'static str, cond: f64 },

    #[error("boundary sample magnitude {value:.3e} below 1e-14; logarithm undefined")]
    LogUndefined { value: f64 },

    #[error("truncation misfit e(N) is non-decreasing from N = 1; data/basis mismatch")]
    CutoffNotFound,

    #[error("Carleman weight exponent {exponent:.3e} overflows; enable radius normalization or reduce lambda")]
    WeightOverflow { exponent: f64 },

    #[error("non-finite value encountered in {context} at iterate {index}")]
    NonFinite { context: &'static str, index: usize },

    #[error("test field violates the zero-trace precondition (residual {residual:.3e})")]
    DiagnosticPrecondition { residual: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("stage {stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("malformed artifact {path}: {reason}")]
    Artifact { path: String, reason: String },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Tag an error with the pipeline stage it came from.
    pub fn in_stage(self, stage: &'static str) -> Error {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// Exit code contract: 2 for configuration errors, 3 for numerical
    /// failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Artifact { .. } => 2,
            Error::Io(_) => 2,
            Error::Stage { source, .. } => source.exit_code(),
            _ => 3,
        }
    }
}
