use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate cell: determinant {det:.6e} must be strictly positive")]
    DegenerateCell { det: f64 },

    #[error("non-finite value in {context}")]
    NonFinite { context: String },

    #[error("shape mismatch in {op}: {lhs} vs {rhs}")]
    ShapeMismatch {
        op: &'static str,
        lhs: String,
        rhs: String,
    },

    #[error("unknown parameter {0:?}")]
    UnknownParam(String),

    #[error("duplicate parameter {0:?}")]
    DuplicateParam(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("unknown element symbol {0:?}")]
    UnknownSymbol(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("atom quota {quota} below existing atom count {existing}")]
    QuotaBelowCount { quota: usize, existing: usize },

    #[error("sample must be decoded (one-hot elements) for {op}")]
    NotDecoded { op: &'static str },

    #[error("time {t} outside [0, 1]")]
    TimeOutOfRange { t: f64 },

    #[error("step-size conditioning mismatch: model conditioned={conditioned}, dt provided={provided}")]
    StepConditioning { conditioned: bool, provided: bool },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("training diverged at step {step} (loss {loss:.3e}); last good checkpoint at step {last_good}")]
    Diverged { step: usize, loss: f64, last_good: usize },

    #[error("non-finite state at sampling step {step}")]
    NanAtStep { step: usize },

    #[error("generation failed for target {index}: {source}")]
    Target {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("empty sample set")]
    EmptyEnsemble,

    #[error("binning mismatch: {0}")]
    BinningMismatch(String),

    #[error("MAPE undefined: target value {index} is zero")]
    ZeroTarget { index: usize },

    #[error("relaxation failed to decrease energy after {halvings} step halvings")]
    RelaxationFailed { halvings: usize },

    #[error("no covalent radius for element {0:?}")]
    MissingRadius(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        Error::Io {
            path: path.display().to_string(),
            source,
        }
    }
}
