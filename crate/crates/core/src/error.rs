use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid physical parameters: {0}")]
    InvalidParams(String),

    #[error("ITU channel {0} is outside the C-band grid (16..=59)")]
    ChannelOutOfBand(u32),

    #[error("invalid channel plan: {0}")]
    InvalidPlan(String),

    #[error("grid needs {required} samples, above the configured cap of {cap}")]
    GridTooLarge { required: usize, cap: usize },

    #[error("frequency {offset} lies outside the grid's Nyquist range ±{nyquist}")]
    BeyondNyquist { offset: f64, nyquist: f64 },

    #[error("invalid signal configuration: {0}")]
    InvalidSignal(String),

    #[error("sample arrays have mismatched lengths ({0} vs {1})")]
    LengthMismatch(usize, usize),

    #[error("negative temperature {0} K")]
    NegativeTemperature(f64),

    #[error("midpoint iteration diverged at step {step} (residual {previous:e} -> {last:e}); reduce the step size")]
    MidpointDivergence { step: usize, previous: f64, last: f64 },

    #[error("non-finite field values at step {step}")]
    NonFinite { step: usize },

    #[error("intensity profile has no positive weight")]
    EmptyProfile,

    #[error("intensity profile has negative centered second moment {0:e}")]
    NegativeVariance(f64),

    #[error("mismatched runs: {0}")]
    RunMismatch(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("run directory {0} already exists with a different configuration (use --force to replace it)")]
    RunExists(PathBuf),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
