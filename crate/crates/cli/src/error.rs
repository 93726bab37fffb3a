use std::fmt;
use std::process::ExitCode;

use serde::Serialize;
use venuerec::Error;
use venuerec_service::ServeError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Runtime,
    Usage,
    Config,
    Io,
    Schema,
    Data,
}

impl Kind {
    pub fn code(self) -> u8 {
        match self {
            Kind::Runtime => 1,
            Kind::Usage => 2,
            Kind::Config => 3,
            Kind::Io => 4,
            Kind::Schema => 5,
            Kind::Data => 6,
        }
    }
}

#[derive(Debug)]
pub struct CliError {
    pub kind: Kind,
    pub message: String,
}

impl CliError {
    pub fn new(kind: Kind, message: impl Into<String>) -> Self {
        CliError {
            kind,
            message: message.into(),
        }
    }

    pub fn config(message: impl Into<String>) -> Self {
        Self::new(Kind::Config, message)
    }

    pub fn usage(message: impl Into<String>) -> Self {
        Self::new(Kind::Usage, message)
    }

    /// Print `{"error": {...}}` on stderr and return the matching exit code.
    pub fn report(&self) -> ExitCode {
        #[derive(Serialize)]
        struct Body<'a> {
            kind: Kind,
            code: u8,
            message: &'a str,
        }
        let body = serde_json::json!({ "error": Body { kind: self.kind, code: self.kind.code(), message: &self.message } });
        eprintln!("{body}");
        ExitCode::from(self.kind.code())
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let kind = match &e {
            Error::Io { .. } => Kind::Io,
            Error::Json { .. } | Error::FormatVersion { .. } => Kind::Schema,
            Error::Config(_) => Kind::Config,
            Error::EmptyDataset { .. }
            | Error::Split { .. }
            | Error::TooFewForFolds { .. }
            | Error::InvalidInput(_)
            | Error::SingleClass
            | Error::UndefinedCorrelation
            | Error::UnknownVenue(_) => Kind::Data,
            Error::NonFinite(_) => Kind::Runtime,
        };
        CliError::new(kind, e.to_string())
    }
}

impl From<ServeError> for CliError {
    fn from(e: ServeError) -> Self {
        match e {
            ServeError::Model(inner) => inner.into(),
            ServeError::Address(_) => CliError::usage(e.to_string()),
            ServeError::Io(_) => CliError::new(Kind::Io, e.to_string()),
        }
    }
}
