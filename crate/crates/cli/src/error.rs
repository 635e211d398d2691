use std::fmt;
use std::path::PathBuf;

use sufficiency_core::error::Error as CoreError;

/// One problem found in an input file, located by a JSON field path such as
/// `kernel[3].probs`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub field: String,
    pub message: String,
}

impl Diagnostic {
    pub fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            field: field.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.field.is_empty() {
            write!(f, "{}", self.message)
        } else {
            write!(f, "{}: {}", self.field, self.message)
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}:{line}:{column}: {message}", path.display())]
    Syntax {
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{}: {}", path.display(), join(diagnostics))]
    Invalid { path: PathBuf, diagnostics: Vec<Diagnostic> },
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Engine(#[from] CoreError),
}

fn join(ds: &[Diagnostic]) -> String {
    ds.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

impl CliError {
    /// Every error exits above the verdict codes 0, 1 and 2.
    pub const EXIT_CODE: i32 = 3;
}

pub type Result<T> = std::result::Result<T, CliError>;
