use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Input(String),

    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("numerical failure{}{}: {message}", fmt_step(.step), fmt_index(.index))]
    Numerical {
        step: Option<usize>,
        index: Option<usize>,
        message: String,
    },

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error on {path}: {message}")]
    Csv { path: String, message: String },
}

fn fmt_step(step: &Option<usize>) -> String {
    step.map(|s| format!(" at step {s}")).unwrap_or_default()
}

fn fmt_index(index: &Option<usize>) -> String {
    index.map(|i| format!(" (index {i})")).unwrap_or_default()
}

impl Error {
    pub fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub fn numerical(message: impl Into<String>) -> Self {
        Error::Numerical {
            step: None,
            index: None,
            message: message.into(),
        }
    }

    /// Attaches a step index to a numerical failure; other variants pass through.
    pub fn at_step(self, step: usize) -> Self {
        match self {
            Error::Numerical { index, message, .. } => Error::Numerical {
                step: Some(step),
                index,
                message,
            },
            other => other,
        }
    }

    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::Numerical { .. })
    }
}

pub(crate) fn check_dim(what: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::Dimension {
            what,
            expected,
            got,
        });
    }
    Ok(())
}
