use std::path::PathBuf;

use thiserror::Error;

/// Exit codes: 2 config/usage, 3 I/O, 4 model or numerical failure,
/// 5 a sum-rule check failed.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("config parse error: {0}")]
    ConfigParse(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Model(#[from] disorder_core::Error),

    #[error("sum rules failed: {0}")]
    SumRules(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::ConfigParse(_) | CliError::Config(_) => 2,
            CliError::Io { .. } => 3,
            CliError::Model(_) => 4,
            CliError::SumRules(_) => 5,
        }
    }
}
