use crate::engine::EngineMode;
use crate::matrix::ElementPrecision;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("int8 element {value} at index {index} is outside [-128, 127]")]
    Int8Range { index: usize, value: i64 },

    #[error("float element at index {index} is not finite")]
    NonFinite { index: usize },

    #[error("data length {len} does not match a {rows}x{cols} matrix")]
    DataLength {
        rows: usize,
        cols: usize,
        len: usize,
    },

    #[error("malformed sparse structure: {0}")]
    Structure(String),

    #[error("precision mismatch: expected {expected:?}, found {found:?}")]
    PrecisionMismatch {
        expected: ElementPrecision,
        found: ElementPrecision,
    },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("inner dimension {m} exceeds the int8 accumulator guard of 65536")]
    OverflowGuard { m: usize },

    #[error("int8 with scaling enabled requires per-channel quantization parameters")]
    MissingQuantParams,

    #[error("quantization parameters supplied but scaling is not active for this configuration")]
    UnexpectedQuantParams,

    #[error("{mode:?} engine cannot accept a {repr} A operand")]
    ModeMismatch {
        mode: EngineMode,
        repr: &'static str,
    },

    #[error("invalid accelerator configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid quantization parameters: {0}")]
    InvalidQuantParams(String),

    #[error("sparsity fraction {0} is outside [0, 1]")]
    InvalidSparsity(f64),

    #[error("invalid model parameters: {0}")]
    InvalidParams(String),

    #[error("inconsistent stage trace: {0}")]
    InconsistentTrace(String),

    #[error("matrix container: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
