use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("degenerate tangent frame at point {index}: {msg}")]
    Frame { index: usize, msg: String },

    #[error("laplacian construction failed at points {0:?}")]
    Operator(Vec<usize>),

    #[error("solver error: {0}")]
    Solver(String),

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("agent lost: only {found} points within {radius} mm")]
    LostAgent { found: usize, radius: f64 },

    #[error("gradient estimation failed: {0}")]
    Gradient(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("{phase}: {source}")]
    Phase {
        phase: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn geometry(msg: impl Into<String>) -> Self {
        Error::Geometry(msg.into())
    }

    pub fn in_phase(self, phase: &'static str) -> Self {
        Error::Phase {
            phase,
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
