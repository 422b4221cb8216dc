use std::path::PathBuf;

use thiserror::Error;

/// Result alias used throughout the crate.
pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {op}: {detail}")]
    Shape { op: &'static str, detail: String },

    #[error("edge ({src}, {dst}) references a node outside 0..{num_nodes}")]
    EdgeOutOfRange {
        src: usize,
        dst: usize,
        num_nodes: usize,
    },

    #[error("non-finite value produced by {op}")]
    NonFinite { op: &'static str },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("empty mask passed to {0}")]
    EmptyMask(&'static str),

    #[error("numeric abort at epoch {epoch}: {detail}")]
    NumericAbort { epoch: usize, detail: String },

    #[error("first-order effects unavailable: block 0 is not part of the output concatenation")]
    FirstOrderUnavailable,

    #[error("order {order} exceeds model depth (maximum order {max})")]
    OrderExceedsDepth { order: usize, max: usize },

    #[error("model has no explicit-interaction branch")]
    NoExplicitBranch,

    #[error("missing bundle file {}", .0.display())]
    MissingFile(PathBuf),

    #[error("bundle metadata mismatch: {0}")]
    MetaMismatch(String),

    #[error("label {label} of node {node} is not below class count {classes}")]
    LabelOutOfRange {
        node: usize,
        label: usize,
        classes: usize,
    },

    #[error("split {split} references node {index} outside 0..{num_nodes}")]
    SplitIndexOutOfRange {
        split: &'static str,
        index: usize,
        num_nodes: usize,
    },

    #[error("splits overlap at node {index} ({a} and {b})")]
    SplitOverlap {
        index: usize,
        a: &'static str,
        b: &'static str,
    },

    #[error("malformed {file}: {detail}")]
    Format { file: String, detail: String },

    #[error("model file checksum mismatch")]
    Checksum,

    #[error("unsupported model file version {found} (expected {expected})")]
    Version { found: u32, expected: u32 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn shape(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Shape {
            op,
            detail: detail.into(),
        }
    }

    pub(crate) fn format(file: impl Into<String>, detail: impl Into<String>) -> Self {
        Error::Format {
            file: file.into(),
            detail: detail.into(),
        }
    }
}
