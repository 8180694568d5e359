use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors raised by the library.
///
/// Variants are grouped by the caller-facing failure class; the CLI maps
/// [`Error::Validation`] and [`Error::Structural`] to the data-validation
/// exit code and everything else to the runtime exit code.
#[derive(Debug, Error)]
pub enum Error {
    /// The learning task itself is ill-posed (e.g. a single class).
    #[error("invalid task: {0}")]
    InvalidTask(String),

    /// A hyper-parameter or argument is out of its admissible range.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// Shapes or instance orderings of the inputs do not agree.
    #[error("structural mismatch: {0}")]
    Structural(String),

    /// Input is numerically degenerate (zero norm, empty subspace, ...).
    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// A computation would exceed a configured resource cap.
    #[error("resource limit: {0}")]
    Resource(String),

    /// Dataset files failed validation.
    #[error("{}: {message}", location(path, *line))]
    Validation {
        path: PathBuf,
        line: Option<usize>,
        message: String,
    },

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },

    #[error("serialization: {0}")]
    Serde(String),

    /// A failure inside one run of an experiment, annotated with where it happened.
    #[error("run {run} ({dataset}) failed during {stage}: {source}")]
    Run {
        dataset: String,
        run: usize,
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

fn location(path: &std::path::Path, line: Option<usize>) -> String {
    match line {
        Some(line) => format!("{}:{}", path.display(), line),
        None => path.display().to_string(),
    }
}

impl Error {
    pub(crate) fn validation(path: impl Into<PathBuf>, line: Option<usize>, message: impl Into<String>) -> Self {
        Error::Validation {
            path: path.into(),
            line,
            message: message.into(),
        }
    }

    pub(crate) fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }

    /// Whether the error stems from invalid input data rather than from a
    /// failure while computing.
    pub fn is_data_error(&self) -> bool {
        match self {
            Error::Validation { .. } | Error::Structural(_) | Error::InvalidTask(_) => true,
            Error::Run { source, .. } => source.is_data_error(),
            _ => false,
        }
    }

    /// Short stable identifier used in machine-readable diagnostics.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidTask(_) => "invalid-task",
            Error::Parameter(_) => "parameter",
            Error::Structural(_) => "structural",
            Error::Degenerate(_) => "degenerate",
            Error::Resource(_) => "resource",
            Error::Validation { .. } => "validation",
            Error::Io { .. } => "io",
            Error::Serde(_) => "serde",
            Error::Run { source, .. } => source.kind(),
        }
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Serde(e.to_string())
    }
}
