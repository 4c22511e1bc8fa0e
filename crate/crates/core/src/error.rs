use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Coarse failure class; the CLI maps it onto its exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    Usage,
    Data,
    Numeric,
}

impl ErrorCategory {
    pub fn as_str(self) -> &'static str {
        match self {
            ErrorCategory::Usage => "usage",
            ErrorCategory::Data => "data",
            ErrorCategory::Numeric => "numeric",
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },

    #[error("{}: {source}", path.display())]
    InFile { path: PathBuf, source: Box<Error> },

    #[error("line {line}: {reason}")]
    MalformedLine { line: usize, reason: String },

    #[error("line {line}: duplicate id {id:?}")]
    DuplicateId { id: String, line: usize },

    #[error("{}unknown label {label:?}", line.map(|l| format!("line {l}: ")).unwrap_or_default())]
    UnknownLabel { label: String, line: Option<usize> },

    #[error("split {split:?}: record {id:?} has no label")]
    UnlabeledRecord { split: String, id: String },

    #[error("line {line}: expected {expected} vector components, found {found}")]
    EmbeddingDimension { line: usize, expected: usize, found: usize },

    #[error("line {line}: {reason}")]
    BadVectorValue { line: usize, reason: String },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },

    #[error("id sets differ on {} id(s): {}", ids.len(), preview(ids))]
    IdMismatch { ids: Vec<String> },

    #[error("voting needs at least 2 prediction sets, got {0}")]
    TooFewMembers(usize),

    #[error("checkpoint: {0}")]
    Checkpoint(String),
}

fn preview(ids: &[String]) -> String {
    const SHOWN: usize = 10;
    let mut out = ids.iter().take(SHOWN).cloned().collect::<Vec<_>>().join(", ");
    if ids.len() > SHOWN {
        out.push_str(&format!(", ... ({} more)", ids.len() - SHOWN));
    }
    out
}

impl Error {
    pub fn io(path: impl AsRef<Path>, source: io::Error) -> Self {
        Error::Io {
            path: path.as_ref().to_path_buf(),
            source,
        }
    }

    pub(crate) fn in_file(self, path: impl AsRef<Path>) -> Self {
        match self {
            e @ (Error::Io { .. } | Error::InFile { .. }) => e,
            e => Error::InFile {
                path: path.as_ref().to_path_buf(),
                source: Box::new(e),
            },
        }
    }

    pub(crate) fn at_line(self, line_no: usize) -> Self {
        match self {
            Error::UnknownLabel { label, .. } => Error::UnknownLabel {
                label,
                line: Some(line_no),
            },
            other => other,
        }
    }

    /// Innermost error, looking through file-context wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::InFile { source, .. } => source.root(),
            e => e,
        }
    }

    pub fn category(&self) -> ErrorCategory {
        match self.root() {
            Error::Config(_) => ErrorCategory::Usage,
            Error::NonFiniteLoss { .. } => ErrorCategory::Numeric,
            _ => ErrorCategory::Data,
        }
    }
}
