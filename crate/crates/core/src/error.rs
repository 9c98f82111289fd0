use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("transcript {id}: missing @Begin/@End envelope")]
    MalformedHeader { id: String },
    #[error("transcript {id}: no participant (*PAR) speech")]
    NoParticipantSpeech { id: String },

    #[error("empty vocabulary: every token was filtered out")]
    EmptyVocabulary,
    #[error("invalid parameter: {0}")]
    InvalidParams(String),

    #[error("training labels contain a single class")]
    SingleClass,
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("model has no probability calibration")]
    UncalibratedModel,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("empty sequence at position {0}")]
    EmptySequence(usize),

    #[error("embedding ids not present in dataset: {0:?}")]
    UnknownId(Vec<String>),
    #[error("dataset ids missing from embedding file: {0:?}")]
    MissingId(Vec<String>),

    #[error("cannot make {k} folds from {groups} groups")]
    TooFewGroups { k: usize, groups: usize },
    #[error("cannot make {k} folds from {samples} samples")]
    TooFewSamples { k: usize, samples: usize },

    #[error("unsupported combination: {0}")]
    Unsupported(String),
    #[error("configuration: {0}")]
    Config(String),
    #[error("data: {0}")]
    Data(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("invariant violated: {0}")]
    Internal(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Stable machine-readable name of the error class.
    pub fn class(&self) -> &'static str {
        match self {
            Error::MalformedHeader { .. } => "MalformedHeader",
            Error::NoParticipantSpeech { .. } => "NoParticipantSpeech",
            Error::EmptyVocabulary => "EmptyVocabulary",
            Error::InvalidParams(_) => "InvalidParams",
            Error::SingleClass => "SingleClass",
            Error::NonFinite(_) => "NonFinite",
            Error::UncalibratedModel => "UncalibratedModel",
            Error::DimensionMismatch(_) => "DimensionMismatch",
            Error::EmptySequence(_) => "EmptySequence",
            Error::UnknownId(_) => "UnknownId",
            Error::MissingId(_) => "MissingId",
            Error::TooFewGroups { .. } => "TooFewGroups",
            Error::TooFewSamples { .. } => "TooFewSamples",
            Error::Unsupported(_) => "Unsupported",
            Error::Config(_) => "Config",
            Error::Data(_) => "Data",
            Error::Io { .. } => "Io",
            Error::Json(_) => "Json",
            Error::Csv(_) => "Csv",
            Error::Internal(_) => "Internal",
        }
    }
}
