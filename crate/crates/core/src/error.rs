use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Input(String),

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("dataset is not linearly separable: {0}")]
    Infeasible(String),

    /// The solver stopped without meeting its tolerance. `best` carries the
    /// best iterate seen so far when one exists.
    #[error("solver did not converge: {msg}")]
    NonConvergence { msg: String, best: Option<Vec<f64>> },

    #[error("numerical overflow at sample {sample}: {msg}")]
    Overflow { sample: usize, msg: String },

    #[error("unsupported case: {0}")]
    Unsupported(String),

    #[error("not applicable: {0}")]
    NotApplicable(String),

    #[error("parse error at row {row}: {msg}")]
    Parse { row: usize, msg: String },

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        Error::Io {
            path: path.display().to_string(),
            source,
        }
    }
}
