use thiserror::Error;

/// Errors produced by the filters, codecs and metrics in this crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid image: {0}")]
    InvalidImage(String),

    #[error("degenerate image: {0}")]
    DegenerateImage(String),

    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),

    #[error("unsupported depth: maxval {0} (only 255 is supported)")]
    UnsupportedDepth(u64),

    #[error("corrupt file: {0}")]
    CorruptFile(String),

    #[error("invalid table: {0}")]
    InvalidTable(String),

    #[error("invalid image pair: {0}")]
    InvalidPair(String),

    #[error("invalid size: {0}")]
    InvalidSize(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
