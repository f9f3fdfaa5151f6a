use std::path::PathBuf;

/// Process exit status for a successful run.
pub const EXIT_OK: i32 = 0;
/// A property check or bound comparison failed.
pub const EXIT_CHECK_FAILED: i32 = 1;
/// The configuration could not be read, parsed or realised.
pub const EXIT_CONFIG: i32 = 2;

#[derive(Debug, thiserror::Error)]
pub enum LabError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("cannot parse config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error(transparent)]
    Core(#[from] lagcov::Error),
    #[error("output error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv output: {0}")]
    Csv(#[from] csv::Error),
    #[error("json output: {0}")]
    Json(#[from] serde_json::Error),
    #[error("worker pool: {0}")]
    Pool(#[from] rayon::ThreadPoolBuildError),
}

impl LabError {
    pub fn config(msg: impl Into<String>) -> Self {
        LabError::Config(msg.into())
    }
}

pub type LabResult<T> = Result<T, LabError>;
