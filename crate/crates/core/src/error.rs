use alloc::string::String;
use core::fmt;

use crate::graph::ObjectId;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    ObjectNotFound(ObjectId),
    NoRatings,
    InsufficientRelationCoverage { needed: usize, available: usize },
    EmptyInput(&'static str),
    RatingOutOfRange(f64),
    UseGlobalFallback,
    TooFewEntities(usize),
    Divergence { epoch: usize },
    DegenerateLabels,
    NonFiniteFeature { index: usize },
    MissingScores { trustor: ObjectId, trustee: ObjectId },
    InvalidFolds { k: usize, n: usize },
    InvalidParameter(String),
    ShapeMismatch(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::ObjectNotFound(id) => write!(f, "object not found: {id}"),
            Error::NoRatings => f.write_str("no ratings"),
            Error::InsufficientRelationCoverage { needed, available } => write!(
                f,
                "insufficient relation coverage: need {needed} objects, relation graph has {available}"
            ),
            Error::EmptyInput(what) => write!(f, "empty input: {what}"),
            Error::RatingOutOfRange(v) => write!(f, "rating {v} outside [0,1]"),
            Error::UseGlobalFallback => f.write_str("recommender set is empty: use global fallback"),
            Error::TooFewEntities(n) => {
                write!(f, "negative sampling needs at least 2 entities, got {n}")
            }
            Error::Divergence { epoch } => write!(f, "training diverged (NaN loss) at epoch {epoch}"),
            Error::DegenerateLabels => f.write_str("degenerate labels: training data has a single class"),
            Error::NonFiniteFeature { index } => write!(f, "non-finite feature at position {index}"),
            Error::MissingScores { trustor, trustee } => {
                write!(f, "missing scores for pair ({trustor}, {trustee})")
            }
            Error::InvalidFolds { k, n } => write!(f, "cannot split {n} samples into {k} folds"),
            Error::InvalidParameter(msg) => write!(f, "invalid parameter: {msg}"),
            Error::ShapeMismatch(msg) => write!(f, "shape mismatch: {msg}"),
        }
    }
}

impl core::error::Error for Error {}
