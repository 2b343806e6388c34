use std::path::PathBuf;

/// Failures of the experiment runner, grouped by exit status.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{file}:{line}: `{key}`: {detail}", file = file.display())]
    Config {
        file: PathBuf,
        key: String,
        /// 1-based; 0 when the key is absent from the file.
        line: usize,
        detail: String,
    },

    #[error("checkpoint {path}: {detail}", path = path.display())]
    Checkpoint { path: PathBuf, detail: String },

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },

    #[error("writing metrics: {0}")]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Engine(#[from] amga::Error),
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;

impl CliError {
    pub(crate) fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Self::Io {
            context: context.into(),
            source,
        }
    }

    /// Process exit status: 2 for configuration, data and format problems,
    /// 3 when training diverges.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Engine(amga::Error::NonFinite { .. }) => 3,
            _ => 2,
        }
    }
}
