use std::fmt;
use std::io;
use std::path::PathBuf;

use serde::Serialize;
use thiserror::Error;

/// One validation failure, addressed by its dotted key path.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Issue {
    pub path: String,
    pub message: String,
}

impl Issue {
    pub fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            path: path.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

fn list(issues: &[Issue]) -> String {
    issues.iter().map(|i| format!("  {i}")).collect::<Vec<_>>().join("\n")
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("config is not valid JSON: {0}")]
    Parse(String),
    #[error("config failed validation:\n{}", list(.0))]
    Validation(Vec<Issue>),
    #[error("numerical failure: {0}")]
    Numerical(#[from] weakosc_core::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

impl ScenarioError {
    pub fn validation(path: impl Into<String>, message: impl Into<String>) -> Self {
        ScenarioError::Validation(vec![Issue::new(path, message)])
    }

    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        ScenarioError::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit status: 2 validation, 3 numerical, 4 I/O.
    pub fn exit_code(&self) -> u8 {
        match self {
            ScenarioError::Parse(_) | ScenarioError::Validation(_) => 2,
            ScenarioError::Numerical(_) => 3,
            ScenarioError::Io { .. } => 4,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            ScenarioError::Parse(_) => "ParseError",
            ScenarioError::Validation(_) => "ValidationError",
            ScenarioError::Numerical(_) => "NumericalError",
            ScenarioError::Io { .. } => "IoError",
        }
    }
}
