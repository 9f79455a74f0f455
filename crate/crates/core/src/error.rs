use std::path::PathBuf;

use thiserror::Error;

use crate::timeseries::Timestamp;

/// Coarse grouping of errors, used by the CLI to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    Data,
    Runtime,
}

#[derive(Debug, Error)]
pub enum Error {
    // -- data ingestion --
    #[error("file not found: {0}")]
    MissingFile(PathBuf),
    #[error("non-uniform timestamp spacing at row {row}: {detail}")]
    NonUniformSpacing { row: usize, detail: String },
    #[error("non-finite value in column `{column}` at row {row}")]
    NonFiniteValue { row: usize, column: String },
    #[error("malformed value in column `{column}` at row {row}: {value:?}")]
    Malformed { row: usize, column: String, value: String },
    #[error("unknown column `{0}`")]
    UnknownColumn(String),
    #[error("invalid time series: {0}")]
    InvalidSeries(String),
    #[error("window out of range: {0}")]
    OutOfRange(String),
    #[error("degenerate range: series min equals max ({0}); supply explicit bounds")]
    DegenerateRange(f64),
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("insufficient history: need {needed} steps, have {available}")]
    InsufficientHistory { needed: usize, available: usize },
    #[error("out-of-order data: {got} is not after {last}")]
    OutOfOrderData { got: Timestamp, last: Timestamp },
    #[error("unexpected timestamp {got}, expected {expected}")]
    UnexpectedTimestamp { got: Timestamp, expected: Timestamp },

    // -- model / configuration --
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },
    #[error("config invalid at `{path}`: {reason}")]
    ConfigInvalid { path: String, reason: String },
    #[error("unknown entity `{0}`")]
    UnknownEntity(String),
    #[error("granularity mismatch in decision unit: `{entity}` has {found} min, unit uses {expected} min")]
    GranularityMismatch { entity: String, expected: u32, found: u32 },

    // -- simulation --
    #[error("infeasible action {action} at soc {soc:.6}: {reason}")]
    InfeasibleAction { action: String, soc: f64, reason: String },
    #[error("battery capacity exhausted")]
    CapacityExhausted,
    #[error("bid for market `{market}` slot {slot} outside an open window at {now}")]
    MissedDeadline { market: String, slot: Timestamp, now: Timestamp },
    #[error("missing formulation variable: {0}")]
    MissingVariable(String),
    #[error("commitment for `{market}` at {slot} not resolved")]
    UnresolvedCommitment { market: String, slot: Timestamp },
    #[error("episode already finished")]
    EpisodeFinished,

    // -- optimizers --
    #[error("horizon of {horizon} steps exceeds available data ({available})")]
    HorizonExceedsData { horizon: usize, available: usize },
    #[error("no action sequence satisfies the state-of-charge constraints")]
    Infeasible,
    #[error("simulated annealing found no feasible plan after {0} iterations")]
    NoFeasibleFound(usize),
    #[error("insufficient training data: {0}")]
    InsufficientData(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn config(path: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::ConfigInvalid { path: path.into(), reason: reason.into() }
    }

    pub fn param(name: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter { name: name.into(), reason: reason.into() }
    }

    pub fn class(&self) -> ErrorClass {
        use Error::*;
        match self {
            ConfigInvalid { .. } | InvalidParameter { .. } | UnknownEntity(_) | GranularityMismatch { .. } => {
                ErrorClass::Config
            }
            MissingFile(_)
            | NonUniformSpacing { .. }
            | NonFiniteValue { .. }
            | Malformed { .. }
            | UnknownColumn(_)
            | InvalidSeries(_)
            | OutOfRange(_)
            | DegenerateRange(_)
            | LengthMismatch { .. }
            | InsufficientHistory { .. }
            | OutOfOrderData { .. }
            | UnexpectedTimestamp { .. }
            | HorizonExceedsData { .. }
            | InsufficientData(_)
            | Csv(_) => ErrorClass::Data,
            _ => ErrorClass::Runtime,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
