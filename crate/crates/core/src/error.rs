use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("construction {kind}: {reason}")]
    Components { kind: String, reason: String },

    #[error("operation not supported: {0}")]
    Unsupported(String),

    #[error("simulation needs {required} qubits, cap is {cap}")]
    QubitCap { required: u32, cap: u32 },

    #[error("unknown register `{0}`")]
    UnknownRegister(String),

    #[error("size mismatch: {0}")]
    SizeMismatch(String),

    #[error("cannot measure a zero-norm state")]
    DegenerateState,

    #[error("unreachable target advantage {0}")]
    Unreachable(f64),

    #[error("config field `{field}`: {reason}")]
    Config { field: String, reason: String },

    #[error("csv schema: {0}")]
    Schema(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
