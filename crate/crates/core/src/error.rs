use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Tensor extents disagree with what an operation requires.
    #[error("dimension error in {op}: {detail}")]
    Dimension { op: &'static str, detail: String },

    #[error("non-finite value produced by {op}")]
    NonFinite { op: &'static str },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("missing forward context for {0}")]
    MissingContext(&'static str),

    #[error("weight container: {0}")]
    Container(String),

    #[error("layer {layer}: {detail}")]
    Layer { layer: String, detail: String },

    #[error("unrecognized label code {code} at pixel {index}")]
    LabelCode { code: u8, index: usize },

    #[error("no supervised pixels (every label is void)")]
    NoSupervisedPixels,

    #[error("{context}: non-finite loss")]
    NonFiniteLoss { context: String },

    #[error("sequence {}: {detail}", path.display())]
    Sequence { path: PathBuf, detail: String },

    #[error("image {}: {detail}", path.display())]
    Image { path: PathBuf, detail: String },

    #[error("unknown {kind} `{name}`")]
    UnknownStrategy { kind: &'static str, name: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn dim(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Dimension {
            op,
            detail: detail.into(),
        }
    }
}
