//! Experiment runner: distribution generators, declarative configs, trial
//! execution, sweeps, naive-vs-estimator comparisons and CSV/JSON output.
//!
//! Trial `t` of a config with seed `s` uses seed `splitmix64(s ^ splitmix64(t))`
//! (SplitMix64 output function), and every oracle draws from `ChaCha8Rng`.
//! Trials run in parallel and are collected in trial order, so a config and
//! seed determine every output byte.

mod config;
mod generate;
mod report;
mod run;
pub mod verify;

pub use config::{
    EstimatorSpec, ExperimentConfig, Instance, OracleModel, OracleSpec, QueryKind, QuerySpec,
    SweepSpec,
};
pub use generate::{
    generate_coordinates, generate_distribution, DistributionSpec, MAX_GRID_POINTS,
};
pub use report::{emit_results, parse_results, render_results, Format, ResultRow, CSV_HEADER};
pub use run::{
    compare_naive, crafted_point_mass_config, run_experiment, run_sweep, run_trials, splitmix64,
    trial_seed, Comparison, HarnessFactory, HarnessOracle, Ratio, TrialRecord,
};
