use std::path::PathBuf;

use chrono::NaiveDate;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: malformed record ({reason})")]
    MalformedRecord { line: usize, reason: String },
    #[error("duplicate date {0}")]
    DuplicateDate(NaiveDate),
    #[error("line {line}: non-positive close {value}")]
    NonPositiveClose { line: usize, value: f64 },
    #[error("price file contains no records")]
    EmptySeries,
    #[error("series too short: need at least {needed} values, got {got}")]
    TooShort { needed: usize, got: usize },
    #[error("return {value} at index {index} is not above -1")]
    InvalidReturn { index: usize, value: f64 },

    #[error("periods '{first}' and '{second}' overlap or are out of order")]
    OverlappingPeriods { first: String, second: String },
    #[error("period '{0}' contains no trading days")]
    EmptySegment(String),

    #[error("zero variance in {0}")]
    ZeroVariance(&'static str),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("circulant embedding of size {size} is not positive definite")]
    EmbeddingNotPositive { size: usize },

    #[error("fewer than {needed} usable box scales ({got})")]
    TooFewScales { needed: usize, got: usize },
    #[error("spectrum regression at moment order {order} has R^2 = {r2:.4} < 0.9")]
    PoorSpectrumRegression { order: f64, r2: f64 },
    #[error("spectrum has a single branch; endpoints undefined")]
    SingleBranch,
    #[error("spectrum endpoints must be positive (alpha_min = {alpha_min}, alpha_max = {alpha_max})")]
    NonPositiveEndpoints { alpha_min: f64, alpha_max: f64 },
    #[error("all returns are zero")]
    ZeroMeasure,

    #[error("degenerate binning: {0}")]
    DegenerateBinning(String),
    #[error("decay curve does not decay (log-log slope {0} >= 0)")]
    NoDecay(f64),
    #[error("insufficient qualifying lags: need {needed}, got {got}")]
    InsufficientLags { needed: usize, got: usize },

    #[error("order {0} missing from the GHE grid")]
    MissingOrder(f64),

    #[error("q_sen = 1 makes (1 - q_sen)^-1 singular")]
    SingularQSen,
    #[error("triplet component {0} is undefined")]
    UndefinedComponent(&'static str),
    #[error("period average of {0} is zero")]
    ZeroAverage(&'static str),
    #[error("zero range: all values are equal")]
    ZeroRange,
    #[error("need at least {needed} points, got {got}")]
    InsufficientPoints { needed: usize, got: usize },

    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
