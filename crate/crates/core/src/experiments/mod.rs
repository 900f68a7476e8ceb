//! Reproducible experiments: configuration, parameter studies and result
//! files.

pub mod config;
pub mod persist;
pub mod studies;

pub use config::{load_config, parse_config, ExperimentConfig};
pub use studies::{
    compare_controls, gamma_sweep, grid_initializers, run_optimization, uniqueness_study,
    yield_loss_table, Discrepancy, GammaSweep, Outcome, RunRecord, UniquenessReport,
    YieldLossTable,
};
