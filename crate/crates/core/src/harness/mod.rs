//! Configuration, sweep orchestration and result persistence.

pub mod config;
pub mod oracle;
pub mod output;
pub mod sweep;

pub use config::{load_config, parse_config, NoiseMode, NoiseSettings, PlanConfig, RunConfig, SweepSpec};
pub use oracle::{run_oracle_suite, OracleCheck};
pub use output::{config_fingerprint, read_rows_csv, simulate, write_rows_csv, Manifest, RunSummary};
pub use sweep::{
    plan_sweep, run_channel_sweep, run_colormap, run_power_sweep, run_pulsewidth_sweep, run_sweep, Colormap, PointOutcome, PointRecord,
    RunOptions, Runner, SeriesResult, SeriesSpec, SweepRow,
};
