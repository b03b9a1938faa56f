use std::fmt;
use std::path::Path;

use regloss_core::Error as CoreError;

/// Failure classes, each with its own process exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    /// Unreadable or malformed input, unwritable output.
    Io,
    /// The inputs admit no answer (empty masks, no feasible shift).
    NoSolution,
    /// Flag or config values out of range.
    Flags,
}

impl Kind {
    pub fn exit_code(self) -> u8 {
        match self {
            Kind::Io => 1,
            Kind::NoSolution => 2,
            Kind::Flags => 3,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CliError {
    pub kind: Kind,
    pub message: String,
}

impl CliError {
    pub fn io(message: impl Into<String>) -> Self {
        Self {
            kind: Kind::Io,
            message: message.into(),
        }
    }

    pub fn flags(message: impl Into<String>) -> Self {
        Self {
            kind: Kind::Flags,
            message: message.into(),
        }
    }

    pub fn no_solution(message: impl Into<String>) -> Self {
        Self {
            kind: Kind::NoSolution,
            message: message.into(),
        }
    }

    pub fn exit_code(&self) -> u8 {
        self.kind.exit_code()
    }

    /// Prefixes the message with a file path.
    pub fn at(mut self, path: &Path) -> Self {
        self.message = format!("{}: {}", path.display(), self.message);
        self
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        let kind = match e {
            CoreError::Input(_) | CoreError::Dimension(_) => Kind::Io,
            CoreError::DegenerateInput(_) | CoreError::NoSolution(_) | CoreError::Coverage(_) => {
                Kind::NoSolution
            }
            CoreError::Parameter(_) => Kind::Flags,
        };
        Self {
            kind,
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::io(e.to_string())
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
