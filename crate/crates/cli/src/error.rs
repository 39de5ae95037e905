use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = CliError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{stage}: {source}")]
    Pipeline {
        stage: &'static str,
        #[source]
        source: diffexplain::Error,
    },
    #[error("{stage}: missing artifact {}; run `diffexplain {upstream}` first", path.display())]
    MissingStage {
        stage: &'static str,
        upstream: &'static str,
        path: PathBuf,
    },
    #[error("config {}: {reason}", path.display())]
    Config { path: PathBuf, reason: String },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: {source}", path.display())]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

/// Attach a stage name to library errors.
pub(crate) trait StageContext<T> {
    fn stage(self, stage: &'static str) -> Result<T>;
}

impl<T> StageContext<T> for diffexplain::Result<T> {
    fn stage(self, stage: &'static str) -> Result<T> {
        self.map_err(|source| CliError::Pipeline { stage, source })
    }
}
