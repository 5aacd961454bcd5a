use std::path::PathBuf;

/// Errors produced anywhere in the audit toolkit.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch at layer {layer}: expected {expected} inputs, got {got}")]
    LayerDimension {
        layer: usize,
        expected: usize,
        got: usize,
    },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },

    #[error("invalid configuration: {}", .0.join("; "))]
    InvalidConfig(Vec<String>),

    #[error("training diverged at epoch {epoch} (loss is not finite)")]
    Diverged { epoch: usize },

    #[error("empty input: {0}")]
    Empty(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("insufficient samples: split needs {needed} rows but dataset has {available} (short by {})", .needed - .available)]
    InsufficientSamples { needed: usize, available: usize },

    #[error("architecture mismatch: {0}")]
    ArchitectureMismatch(String),

    #[error("attack training set contains a single membership class")]
    SingleClass,

    #[error("invalid binary format: {0}")]
    Format(String),

    #[error("hash mismatch for {path}: manifest records {expected}, file hashes to {found}")]
    HashMismatch {
        path: String,
        expected: String,
        found: String,
    },

    #[error("stage `{stage}` has not been run for this run id; run `seqmia {stage}` first")]
    MissingStage { stage: String },

    #[error("stage `{stage}` is out of date with the current inputs; run `seqmia {stage}` first")]
    StaleStage { stage: String },

    #[error("run directory {0} is locked by another process")]
    Locked(PathBuf),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("verification failed: {0}")]
    Verification(String),
}

impl Error {
    /// Stable machine-readable name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::LayerDimension { .. } => "layer_dimension",
            Error::Shape(_) => "shape",
            Error::NonFinite(_) => "non_finite",
            Error::LabelOutOfRange { .. } => "label_out_of_range",
            Error::InvalidConfig(_) => "invalid_config",
            Error::Diverged { .. } => "diverged",
            Error::Empty(_) => "empty",
            Error::Parse { .. } => "parse",
            Error::InsufficientSamples { .. } => "insufficient_samples",
            Error::ArchitectureMismatch(_) => "architecture_mismatch",
            Error::SingleClass => "single_class",
            Error::Format(_) => "format",
            Error::HashMismatch { .. } => "hash_mismatch",
            Error::MissingStage { .. } => "missing_stage",
            Error::StaleStage { .. } => "stale_stage",
            Error::Locked(_) => "locked",
            Error::Io { .. } => "io",
            Error::Json(_) => "json",
            Error::Verification(_) => "verification",
        }
    }

    /// Process exit status for a command that failed with this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidConfig(_) | Error::Parse { .. } => 2,
            Error::MissingStage { .. } | Error::StaleStage { .. } | Error::Locked(_) => 3,
            Error::HashMismatch { .. } | Error::Verification(_) | Error::Format(_) => 4,
            _ => 1,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
