use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum LabError {
    /// Invalid configuration; `line` points into the config file when known.
    #[error("{}", config_message(.key, .line, .message))]
    Config {
        key: String,
        line: Option<usize>,
        message: String,
    },
    #[error("{0}")]
    Numeric(hypstokes::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

fn config_message(key: &str, line: &Option<usize>, message: &str) -> String {
    match (key.is_empty(), line) {
        (true, Some(l)) => format!("config error at line {l}: {message}"),
        (true, None) => format!("config error: {message}"),
        (false, Some(l)) => format!("config error at line {l} ({key}): {message}"),
        (false, None) => format!("config error ({key}): {message}"),
    }
}

impl LabError {
    pub fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        LabError::Config {
            key: key.into(),
            line: None,
            message: message.into(),
        }
    }

    /// Process exit code: 2 for configuration problems, 3 for failures while
    /// running.
    pub fn exit_code(&self) -> i32 {
        match self {
            LabError::Config { .. } | LabError::Numeric(hypstokes::Error::Config(_)) => 2,
            _ => 3,
        }
    }
}

impl From<hypstokes::Error> for LabError {
    fn from(e: hypstokes::Error) -> Self {
        LabError::Numeric(e)
    }
}

pub type Result<T> = std::result::Result<T, LabError>;
