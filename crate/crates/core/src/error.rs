use thiserror::Error;

/// Errors produced anywhere in the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// Structurally unusable input, e.g. an empty graph.
    #[error("rejected input: {0}")]
    RejectedInput(String),

    /// A graph lacks the premise/conclusion structure an operation needs.
    #[error("degenerate graph: {0}")]
    DegenerateGraph(String),

    /// A coefficient or configuration value violates its contract.
    #[error("configuration error: {0}")]
    Config(String),

    /// A record or value violates a type invariant; `path` names the field.
    #[error("validation error at {path}: {message}")]
    Validation { path: String, message: String },

    /// Malformed JSON input.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    /// Unknown prompt or response id.
    #[error("lookup error: {0}")]
    Lookup(String),

    /// Two tabular objects disagree on shape.
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    /// A non-finite value appeared during optimization.
    #[error("numerical failure at step {step}: {message}")]
    Numerical {
        step: usize,
        message: String,
        /// JSON snapshot of the optimizer state when the failure was detected.
        state: String,
    },

    /// Temperature fit without both label classes.
    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    /// Effect size with zero pooled variance.
    #[error("undefined effect size: pooled standard deviation is zero")]
    UndefinedEffect,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn validation(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation {
            path: path.into(),
            message: message.into(),
        }
    }

    /// Process exit code for the command line: 2 for numerical failures, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Numerical { .. } => 2,
            _ => 1,
        }
    }

    /// Prefixes the field path of a validation error.
    pub fn within(self, prefix: &str) -> Self {
        match self {
            Error::Validation { path, message } => Error::Validation {
                path: if path.is_empty() {
                    prefix.to_string()
                } else {
                    format!("{prefix}.{path}")
                },
                message,
            },
            other => other,
        }
    }

    /// Tags a validation error with the 1-based input line it came from.
    pub fn at_line(self, line: usize) -> Self {
        match self {
            Error::Validation { path, message } => Error::Validation {
                path: if path.is_empty() {
                    format!("line {line}")
                } else {
                    format!("line {line}: {path}")
                },
                message,
            },
            other => other,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
