use thiserror::Error;

/// Errors produced by the catalog, learner, simulator and persistence layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("embedding dimension must be at least 1")]
    ZeroDimension,

    #[error("duplicate item id `{0}`")]
    DuplicateId(String),

    #[error("unknown id `{0}`")]
    UnknownId(String),

    #[error("item id `{0}` was removed earlier in this run and cannot be reused")]
    IdRetired(String),

    #[error("non-finite value in input")]
    NonFiniteInput,

    #[error("catalog is empty")]
    EmptyCatalog,

    #[error("cannot draw {k} items from a catalog of {items}")]
    KTooLarge { k: usize, items: usize },

    #[error("propensity {found} does not match the scored probability {expected}")]
    PropensityMismatch { expected: f64, found: f64 },

    #[error("propensity of the chosen item is zero")]
    ZeroPropensity,

    #[error("gradient batch is empty")]
    EmptyBatch,

    #[error("catalog generation mismatch: expected {expected}, found {found}")]
    GenerationMismatch { expected: u64, found: u64 },

    #[error("query norm {norm} exceeds the configured bound {bound}")]
    QueryNormExceeded { norm: f64, bound: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("round {0} is not defined by the environment")]
    UndefinedRound(u64),

    #[error("no events to fit")]
    EmptyEvents,

    #[error("round {0} carries no ground truth")]
    MissingGroundTruth(u64),

    #[error("ranked list has no relevant items")]
    NoRelevantItems,

    #[error("window {window} exceeds sequence length {len}")]
    WindowTooLarge { window: usize, len: usize },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("validation error at `{field}`: {message}")]
    Validation { field: String, message: String },

    #[error("schema error on line {line}: {message}")]
    Schema { line: usize, message: String },

    #[error("malformed snapshot: {0}")]
    Snapshot(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn validation(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation {
            field: field.into(),
            message: message.into(),
        }
    }

    /// True for errors caused by bad user input (configuration, arguments, file
    /// contents) rather than by the run itself.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Validation { .. }
                | Error::Parse(_)
                | Error::InvalidConfig(_)
                | Error::Schema { .. }
                | Error::Snapshot(_)
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
