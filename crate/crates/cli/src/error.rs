use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Invalid or unreadable configuration (exit code 2).
    #[error("config error: {0}")]
    Config(String),
    /// A pipeline stage failed (exit code 1).
    #[error("{stage} failed: {source}")]
    Stage {
        stage: String,
        #[source]
        source: oaprog::Error,
    },
    #[error("{stage} failed: {message}")]
    StageMessage { stage: String, message: String },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            _ => 1,
        }
    }

    pub fn record(&self) -> ErrorRecord {
        let (kind, stage) = match self {
            CliError::Config(_) => ("config", None),
            CliError::Stage { stage, .. } | CliError::StageMessage { stage, .. } => ("stage", Some(stage.clone())),
        };
        ErrorRecord {
            error: kind,
            stage,
            message: self.to_string(),
            exit_code: self.exit_code(),
        }
    }
}

/// Machine-readable failure report.
#[derive(Debug, Serialize)]
pub struct ErrorRecord {
    pub error: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stage: Option<String>,
    pub message: String,
    pub exit_code: i32,
}

pub(crate) trait StageContext<T> {
    fn stage(self, stage: &str) -> Result<T, CliError>;
}

impl<T> StageContext<T> for oaprog::Result<T> {
    fn stage(self, stage: &str) -> Result<T, CliError> {
        self.map_err(|source| CliError::Stage {
            stage: stage.to_string(),
            source,
        })
    }
}
