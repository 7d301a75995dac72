use std::path::PathBuf;

use chrono::{DateTime, NaiveDate, Utc};
use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("simultaneous charge ({charge} MW) and discharge ({discharge} MW)")]
    SimultaneousChargeDischarge { charge: f64, discharge: f64 },

    #[error("power {power} MW outside [0, {p_nom}] MW")]
    PowerOutOfRange { power: f64, p_nom: f64 },

    #[error("FCR bid of {bid} MW outside the admissible range 0..={max} MW")]
    InvalidBid { bid: u32, max: u32 },

    #[error(
        "FCR bid of {bid} MW needs {reserve:.4} MWh in each direction, more than half of the {e_cap} MWh capacity"
    )]
    InfeasibleMargin { bid: u32, reserve: f64, e_cap: f64 },

    #[error("converter limit exceeded: |{total}| MW > {p_nom} MW")]
    ConverterLimit { total: f64, p_nom: f64 },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("{path}:{line}: timestamp {timestamp} does not advance past the previous row")]
    NonMonotoneTimestamp {
        path: PathBuf,
        line: u64,
        timestamp: DateTime<Utc>,
    },

    #[error("{path}: gap of {missing_seconds} s after {after} exceeds the {limit_seconds} s hold limit")]
    OversizedGap {
        path: PathBuf,
        after: DateTime<Utc>,
        missing_seconds: i64,
        limit_seconds: i64,
    },

    #[error("{path}: expected a row at {expected}, found {found}")]
    MissingInterval {
        path: PathBuf,
        expected: DateTime<Utc>,
        found: DateTime<Utc>,
    },

    #[error("misaligned market data: {0}")]
    Misaligned(String),

    #[error("horizon of {quarters} quarter-hours does not partition into whole 4-hour blocks")]
    PartialBlock { quarters: usize },

    #[error("no candidate evaluations to select from")]
    EmptyEvaluation,

    #[error("day {day} belongs to the {actual} split, not {requested}")]
    DayNotInSplit {
        day: NaiveDate,
        requested: String,
        actual: String,
    },

    #[error("day {0} is not fully covered by the dataset and bid schedule")]
    DayNotCovered(NaiveDate),

    #[error("action mask leaves no admissible action")]
    AllActionsMasked,

    #[error("training diverged at episode {episode}: loss {loss}")]
    Diverged { episode: usize, loss: f64 },

    #[error("missing {}: {hint}", path.display())]
    MissingArtifact { path: PathBuf, hint: String },

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors caused by bad user input (config, data files, schedules)
    /// as opposed to failures during a run.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidParameter(_)
                | Error::InvalidBid { .. }
                | Error::InfeasibleMargin { .. }
                | Error::Parse { .. }
                | Error::NonMonotoneTimestamp { .. }
                | Error::OversizedGap { .. }
                | Error::MissingInterval { .. }
                | Error::Misaligned(_)
                | Error::PartialBlock { .. }
                | Error::DayNotInSplit { .. }
                | Error::DayNotCovered(_)
                | Error::Checkpoint(_)
                | Error::MissingArtifact { .. }
                | Error::Config(_)
                | Error::Csv(_)
        )
    }
}
