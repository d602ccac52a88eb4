use std::path::PathBuf;

/// Errors produced anywhere in the detection pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("missing required column `{0}` in log header")]
    Schema(String),
    #[error("parse error at row {row}: {msg}")]
    Parse { row: usize, msg: String },
    #[error("packet too short: {samples} samples; trimming {trim_seconds} s from each end needs more than {min_duration_s} s of data")]
    PacketTooShort {
        samples: usize,
        trim_seconds: f64,
        min_duration_s: f64,
    },
    #[error("packet already trimmed")]
    AlreadyTrimmed,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("undefined correlation: input vector `{0}` is constant")]
    UndefinedCorrelation(&'static str),
    #[error("data error: {0}")]
    Data(String),
    #[error("feature schema mismatch: model expects {expected}, got {found}")]
    SchemaMismatch { expected: String, found: String },
    #[error("unsupported model format version {found} (loader supports {supported})")]
    ModelVersion { found: String, supported: String },
    #[error("corrupt model file {path}: {msg}")]
    CorruptModel { path: PathBuf, msg: String },
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Stream(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
