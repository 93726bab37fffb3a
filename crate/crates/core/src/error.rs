use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("no papers survived ingestion ({skipped} malformed, {filtered} filtered out)")]
    EmptyDataset { skipped: usize, filtered: usize },

    #[error("cannot split venue `{venue}`: {count} paper(s), need at least 2")]
    Split { venue: String, count: usize },

    #[error("venue `{venue}` has {count} paper(s), fewer than the {folds} folds requested; use fewer folds")]
    TooFewForFolds { venue: String, count: usize, folds: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("logistic regression needs at least two distinct classes")]
    SingleClass,

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("correlation undefined: zero rank variance")]
    UndefinedCorrelation,

    #[error("unknown venue `{0}`")]
    UnknownVenue(String),

    #[error("unsupported format_version {found} (expected {expected})")]
    FormatVersion { found: u64, expected: u64 },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{context}: {source}")]
    Json {
        context: String,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn json(context: impl Into<String>, source: serde_json::Error) -> Self {
        Error::Json {
            context: context.into(),
            source,
        }
    }
}
