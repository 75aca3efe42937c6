use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    /// All values on an axis coincide, so no control grid can be placed.
    #[error("degenerate range: all values are identical")]
    DegenerateRange,

    #[error("need at least 2 binned correspondences, got {0}")]
    InsufficientCorrespondences(usize),

    #[error("transforms use different control points")]
    ControlPointMismatch,

    #[error("non-finite objective or gradient at iteration {iteration} (f = {value})")]
    NonFinite { iteration: usize, value: f64 },

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Image {
        path: String,
        #[source]
        source: image::ImageError,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn dim(msg: impl Into<String>) -> Self {
        Error::Dimension(msg.into())
    }

    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }
}
