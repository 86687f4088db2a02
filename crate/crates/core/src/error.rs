use std::path::PathBuf;

use crate::model::Family;
use crate::slate::{Method, Objective};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("unknown user id {0}")]
    UnknownUser(usize),

    #[error("unknown item id {0}")]
    UnknownItem(usize),

    #[error("{family} has no categorical choice likelihood")]
    NotCategorical { family: Family },

    #[error("operation requires the {expected} family, got {actual}")]
    WrongFamily { expected: Family, actual: Family },

    #[error("decision set must contain the no-buy option")]
    MissingNoBuy,

    #[error("chosen alternative is not in the decision set")]
    ChoiceNotExposed,

    #[error("objective {objective} is not available for {method}")]
    UnsupportedObjective {
        method: Method,
        objective: Objective,
    },

    #[error("{family} does not recover willingness-to-pay")]
    NoWtp { family: Family },

    #[error("empty event log")]
    EmptyEvents,

    #[error("non-finite gradient at step {step}: {what}")]
    NonFiniteGradient { step: u64, what: String },

    #[error("no slate for user {0}")]
    MissingSlate(usize),

    #[error("unknown preset {0:?} (expected medium1, medium2 or hard)")]
    UnknownPreset(String),

    #[error("malformed {what}: {detail}")]
    Format { what: &'static str, detail: String },

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
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
