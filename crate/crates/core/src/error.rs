use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum KcpError {
    #[error("dimension mismatch: expected {expected} entries, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("index {index} out of range for mode {mode} of size {size}")]
    IndexOutOfRange {
        mode: usize,
        index: usize,
        size: usize,
    },

    #[error("flat index {flat} out of range for {count} elements")]
    FlatIndexOutOfRange { flat: usize, count: usize },

    #[error("invalid shape: {0}")]
    InvalidShape(String),

    #[error("element count mismatch: {from} elements cannot be viewed as {to}")]
    CountMismatch { from: usize, to: usize },

    #[error("mode lists do not form a permutation of 0..{order}: {detail}")]
    InvalidPermutation { order: usize, detail: String },

    #[error("size mismatch on contracted modes: {0}")]
    SizeMismatch(String),

    #[error("expected a tensor of order {expected}, got order {actual}")]
    RankMismatch { expected: usize, actual: usize },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("mode {mode} out of range for order {order}")]
    ModeOutOfRange { mode: usize, order: usize },

    #[error("intermediate of {required} scalars exceeds the cap of {cap}")]
    TooLarge { required: u128, cap: u128 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("singular value decomposition failed: {0}")]
    Svd(String),

    #[error("bad magic at byte 0: expected {expected:?}, found {found:?}")]
    MagicMismatch { expected: Vec<u8>, found: Vec<u8> },

    #[error("truncated stream while reading {what}: expected {expected} bytes, got {actual}")]
    Truncated {
        what: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("inconsistent header at byte {position}: {detail}")]
    InconsistentShape { position: usize, detail: String },

    #[error("{0} trailing bytes after the factor payload")]
    TrailingBytes(usize),

    #[error(
        "relaxed multiplication needs an even order, got d = {0}: the relaxed contraction \
         pairs each odd mode with the following even mode and has no trailing rank reduction"
    )]
    OddOrder(usize),

    #[error("worker count must be at least 1")]
    ZeroWorkers,

    #[error("division by zero: {0}")]
    DivisionByZero(&'static str),

    #[error("training diverged at epoch {epoch}: loss is {loss}")]
    Divergence { epoch: usize, loss: f64 },
}

pub type Result<T> = std::result::Result<T, KcpError>;
