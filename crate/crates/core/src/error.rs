use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("value {value} lies outside the unit interval; was the data scaled?")]
    Domain { value: f64 },

    #[error("cannot fit a scaling transform: {0}")]
    Degenerate(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("coefficient index {index} out of range (have 0..={max})")]
    Index { index: usize, max: usize },

    #[error("sample size {n} exceeds population size {population}")]
    SampleTooLarge { n: usize, population: usize },

    #[error("design drew an empty sample {attempts} times in a row")]
    EmptySample { attempts: u32 },

    #[error("inclusion probability {value} exceeds 1 for stratum {stratum}")]
    ProbabilityAboveOne { stratum: usize, value: f64 },

    #[error("projection cannot reach unit mass (mass at lower bound is {mass})")]
    Projection { mass: f64 },

    #[error("scaling mismatch between estimates and truth")]
    ScalingMismatch,

    #[error("{failed} of {total} replicates failed, above the tolerated 0.1%")]
    TooManyFailures { failed: usize, total: usize },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
