use std::io;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] hdfts_core::Error),
    #[error("io error on {path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("malformed {what}: {msg}")]
    Format { what: &'static str, msg: String },
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    TomlDe(#[from] toml::de::Error),
    #[error(transparent)]
    TomlSer(#[from] toml::ser::Error),
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    pub fn io(path: impl AsRef<std::path::Path>, source: io::Error) -> Self {
        Self::Io { path: path.as_ref().display().to_string(), source }
    }

    pub fn format(what: &'static str, msg: impl Into<String>) -> Self {
        Self::Format { what, msg: msg.into() }
    }

    /// Process exit status: 2 for bad input or configuration, 3 for
    /// numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Core(e) if !e.is_config() => 3,
            _ => 2,
        }
    }

    /// Short machine-readable category.
    pub fn kind(&self) -> &'static str {
        match self {
            Self::Core(e) if e.is_config() => "config",
            Self::Core(_) => "numerical",
            Self::Io { .. } => "io",
            Self::Format { .. } | Self::Csv(_) | Self::Json(_) => "format",
            Self::Config(_) | Self::TomlDe(_) | Self::TomlSer(_) => "config",
        }
    }
}
