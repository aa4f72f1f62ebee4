use thiserror::Error;

/// Errors raised by the numeric core, the solver and the file loaders.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {op}: {left:?} vs {right:?}")]
    DimensionMismatch {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },

    #[error("non-finite value produced by {0}")]
    NonFinite(String),

    #[error("unknown type id {0}")]
    UnknownType(usize),

    #[error("relation ({0}, {1}) is not declared")]
    UndeclaredRelation(usize, usize),

    #[error("invalid graph: {}", .0.join("; "))]
    InvalidGraph(Vec<String>),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error(
        "objective increased at sweep {sweep}: {previous:e} -> {current:e} (relative {relative:e})"
    )]
    Divergence {
        sweep: usize,
        previous: f64,
        current: f64,
        relative: f64,
    },

    #[error("evaluation error: {0}")]
    Eval(String),

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    #[error("{0}")]
    Format(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    /// Whether the error stems from bad numerics rather than bad input data.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::NonFinite(_) | Error::Divergence { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
