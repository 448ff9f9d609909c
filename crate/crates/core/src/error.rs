//! Error type shared by every module.

use thiserror::Error;

/// Failures raised by the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("matrix not positive definite at pivot {pivot}")]
    SingularMatrix { pivot: usize },
    #[error("insufficient samples in group {group} class {class}: {count} rows, need 2")]
    InsufficientSamples { group: char, class: u8, count: usize },
    #[error("no viable candidate feature")]
    NoViableCandidate,
    #[error("target {target} outside achievable range [{lo}, {hi}]")]
    Range { target: f64, lo: f64, hi: f64 },
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("expected exactly 2 groups, found {0}")]
    UnsupportedGroups(usize),
    #[error("data error: {0}")]
    Data(String),
    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    /// True for errors caused by the input data rather than by numerics.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::InsufficientSamples { .. }
                | Error::UnsupportedGroups(_)
                | Error::Data(_)
                | Error::Io(_)
                | Error::Domain(_)
                | Error::NoViableCandidate
                | Error::Range { .. }
        )
    }
}

impl Error {
    /// Short machine-readable tag.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Domain(_) => "domain",
            Error::SingularMatrix { .. } => "singular-matrix",
            Error::InsufficientSamples { .. } => "insufficient-samples",
            Error::NoViableCandidate => "no-viable-candidate",
            Error::Range { .. } => "range",
            Error::Numeric(_) => "numeric",
            Error::UnsupportedGroups(_) => "unsupported-groups",
            Error::Data(_) => "data",
            Error::Io(_) => "io",
        }
    }

    /// Process exit code: 1 for data errors, 2 for numeric ones.
    pub fn exit_code(&self) -> i32 {
        if self.is_data_error() {
            1
        } else {
            2
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
