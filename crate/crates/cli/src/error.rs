use std::fmt;

use serde::Serialize;

/// Failure classes, each with its own process exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorKind {
    Config,
    Io,
    Data,
    Numerical,
}

impl ErrorKind {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorKind::Config => 1,
            ErrorKind::Io => 2,
            ErrorKind::Data => 3,
            ErrorKind::Numerical => 4,
        }
    }
}

#[derive(Debug)]
pub struct CliError {
    pub kind: ErrorKind,
    pub message: String,
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        Self {
            kind: ErrorKind::Config,
            message: message.into(),
        }
    }

    pub fn io(message: impl Into<String>) -> Self {
        Self {
            kind: ErrorKind::Io,
            message: message.into(),
        }
    }

    pub fn data(message: impl Into<String>) -> Self {
        Self {
            kind: ErrorKind::Data,
            message: message.into(),
        }
    }

    /// Machine-readable form written to stderr.
    pub fn to_json(&self) -> String {
        serde_json::json!({
            "error": {
                "kind": self.kind,
                "exit_code": self.kind.exit_code(),
                "message": self.message,
            }
        })
        .to_string()
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?} error: {}", self.kind, self.message)
    }
}

impl std::error::Error for CliError {}

impl From<hawkes_vb::Error> for CliError {
    fn from(e: hawkes_vb::Error) -> Self {
        use hawkes_vb::Error as E;
        let kind = match e {
            E::Numerical(_) | E::SimulationDiverged { .. } | E::ZeroIntensity { .. } | E::NoGap => {
                ErrorKind::Numerical
            }
            E::UnsupportedLink(_) | E::EmptyModelSet(_) => ErrorKind::Config,
            E::Domain(_) | E::InvalidInput(_) | E::ShapeMismatch(_) => ErrorKind::Data,
        };
        Self {
            kind,
            message: e.to_string(),
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
