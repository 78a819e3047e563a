use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("column {0} has zero norm and cannot be a candidate")]
    ZeroNormColumn(usize),

    #[error("candidate column set is empty")]
    EmptyCandidates,

    #[error("support system became rank deficient after adding column {atom}")]
    RankDeficient { atom: usize },

    #[error("margin entry {index} is {value}, margins must be strictly positive")]
    NonPositiveMargin { index: usize, value: f64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("enumeration bound exceeded: {0}")]
    EnumerationBound(String),

    #[error("margin update failed at outer iteration {iteration}: {source}")]
    MarginLoop {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {reason}")]
    ImageFormat { path: String, reason: String },

    #[error("malformed {what}: {reason}")]
    FileFormat { what: &'static str, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::ShapeMismatch(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::InvalidConfig(msg.into())
    }

    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn format(what: &'static str, reason: impl Into<String>) -> Self {
        Error::FileFormat {
            what,
            reason: reason.into(),
        }
    }
}
