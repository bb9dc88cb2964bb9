use std::path::PathBuf;

/// Errors raised by the adder network library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid shape {shape:?}: {reason}")]
    InvalidShape { shape: Vec<usize>, reason: String },

    #[error("shape mismatch: expected {expected:?}, got {actual:?}")]
    ShapeMismatch {
        expected: Vec<usize>,
        actual: Vec<usize>,
    },

    #[error("channel mismatch: layer expects {expected} input channels, got {actual}")]
    ChannelMismatch { expected: usize, actual: usize },

    #[error("kernel {kernel} does not fit padded input {height}x{width}")]
    WindowTooLarge {
        kernel: usize,
        height: usize,
        width: usize,
    },

    #[error("batch normalization in train mode needs at least 2 values per channel, got {0}")]
    BatchTooSmall(usize),

    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },

    #[error("label {0} is not binary")]
    NonBinaryLabel(usize),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("backward pass called with a stale or mismatched forward trace")]
    StaleTrace,

    #[error("malformed IDX file {path}: {reason}")]
    IdxFormat { path: PathBuf, reason: String },

    #[error("malformed checkpoint: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// Short machine-readable tag, used by the CLI's error line.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidShape { .. } => "invalid_shape",
            Error::ShapeMismatch { .. } => "shape_mismatch",
            Error::ChannelMismatch { .. } => "channel_mismatch",
            Error::WindowTooLarge { .. } => "window_too_large",
            Error::BatchTooSmall(_) => "batch_too_small",
            Error::LabelOutOfRange { .. } => "label_out_of_range",
            Error::NonBinaryLabel(_) => "non_binary_label",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::NonFinite(_) => "non_finite",
            Error::StaleTrace => "stale_trace",
            Error::IdxFormat { .. } => "idx_format",
            Error::Checkpoint(_) => "checkpoint",
            Error::Io(_) => "io",
        }
    }
}
