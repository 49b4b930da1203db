use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("series is empty")]
    EmptySeries,
    #[error("no close on or before calendar date {date}")]
    NoPriorClose { date: chrono::NaiveDate },
    #[error("non-positive price {value} at index {index}")]
    NonPositivePrice { index: usize, value: f64 },
    #[error("series too short: need at least {needed} observations, got {got}")]
    TooShort { needed: usize, got: usize },
    #[error("invalid series: {0}")]
    InvalidSeries(String),
    #[error("duplicate label `{0}`")]
    DuplicateLabel(String),
    #[error("unknown label `{0}`")]
    UnknownLabel(String),
    #[error("lag {max_lag} too large for {rows} rows")]
    LagTooLarge { max_lag: usize, rows: usize },
    #[error("no data to fit")]
    EmptyData,
    #[error("bin width must be positive and finite, got {0}")]
    ZeroWidth(f64),
    #[error("value {value} outside binning range [{lo}, {hi}]")]
    OutOfRange { value: f64, lo: f64, hi: f64 },
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("history order (k={k}, l={l}) outside 1..=4")]
    InvalidOrder { k: usize, l: usize },
    #[error("labels of the two matrices differ")]
    LabelMismatch,
    #[error("matrix kind mismatch: expected {expected}, got {got}")]
    KindMismatch { expected: String, got: String },
    #[error("column `{0}` has zero variance")]
    ZeroVariance(String),
    #[error("shape too small: {0}")]
    ShapeTooSmall(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("graph has no nodes")]
    EmptyGraph,
    #[error("power iteration did not converge within {steps} steps")]
    NonConvergence { steps: usize },
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("missing artifact {0}")]
    MissingArtifact(PathBuf),
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
    #[error("series `{ticker}`: {source}")]
    Series {
        ticker: String,
        #[source]
        source: Box<Error>,
    },
    #[error("pair {source_label} -> {dest_label}: {source}")]
    Pair {
        source_label: String,
        dest_label: String,
        #[source]
        source: Box<Error>,
    },
    #[error("stage `{stage}`: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn for_series(ticker: &str, err: Error) -> Self {
        Error::Series {
            ticker: ticker.to_string(),
            source: Box::new(err),
        }
    }

    pub fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            message: message.into(),
        }
    }
}
