use std::path::PathBuf;

/// Errors produced anywhere in the flagging toolkit.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Input data violates a documented invariant (non-finite values, shape mismatch, ...).
    #[error("invalid data: {0}")]
    Validation(String),

    /// A caller passed an argument outside its domain.
    #[error("invalid argument: {0}")]
    Argument(String),

    /// Encoder, network or search configuration is unusable.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// Tensor shapes disagree.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// Patch tiles do not reassemble into their parent.
    #[error("inconsistent tiling: {0}")]
    Consistency(String),

    /// A file on disk is malformed.
    #[error("{}: {msg}", path.display())]
    Format { path: PathBuf, msg: String },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// The synthetic generator could not hit its contamination target.
    #[error("generation failed: {0}")]
    Generation(String),

    /// Training diverged.
    #[error("non-finite loss at epoch {epoch}, batch {batch}, lr {lr:e}")]
    NonFiniteLoss { epoch: usize, batch: usize, lr: f64 },

    /// A threshold metric is undefined for the given labels (e.g. a single class).
    #[error("metric undefined: {0}")]
    UndefinedMetric(&'static str),

    /// Hyperparameter search or repeat evaluation could not produce a result.
    #[error("search failed: {0}")]
    Search(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, msg: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            msg: msg.into(),
        }
    }
}
