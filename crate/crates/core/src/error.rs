use thiserror::Error;

/// Errors produced by the analysis routines.
#[derive(Debug, Error)]
#[non_exhaustive]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid system: {0}")]
    InvalidSystem(String),

    #[error("systems are not comparable: {0}")]
    Mismatch(String),

    #[error("query addressed to exhausted or inadmissible system {system} at history {history}")]
    Exhausted { system: usize, history: String },

    #[error("adversary is undefined at history {0}")]
    AdversaryUndefined(String),

    #[error("instance too large for exhaustive verification: {count} adversaries exceed cap {cap}")]
    TooLarge { count: u128, cap: u128 },

    #[error("label {0:?} is reserved for schedule normalization")]
    ReservedLabel(String),

    #[error("{stage}: {message}")]
    Construction { stage: &'static str, message: String },

    #[error("insufficient runs: {0}")]
    InsufficientRuns(String),

    #[error("mechanism halted after reaching the cutoff")]
    Halted,

    #[error("dataset error: {0}")]
    Dataset(String),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn construction(stage: &'static str, message: impl Into<String>) -> Self {
        Error::Construction {
            stage,
            message: message.into(),
        }
    }
}
