use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{op}: shape mismatch between {left:?} and {right:?}")]
    Dimension {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },

    #[error("{what}: index {index} out of range for length {len}")]
    Index {
        what: &'static str,
        index: usize,
        len: usize,
    },

    #[error("{what}: {detail}")]
    Domain { what: &'static str, detail: String },

    #[error("non-finite value at epoch {epoch}, layer {layer}: {detail}")]
    NonFinite {
        epoch: usize,
        layer: usize,
        detail: String,
    },

    #[error("{file}: malformed {field}: {detail}")]
    Format {
        file: String,
        field: &'static str,
        detail: String,
    },

    #[error("{0}")]
    State(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn domain(what: &'static str, detail: impl Into<String>) -> Self {
        Error::Domain {
            what,
            detail: detail.into(),
        }
    }
}
