//! Experiment orchestration: the equivariance sweep, stability trials, basis
//! validation and filter-bound reports, plus their CSV/JSON emission.

mod pool;
mod reports;
mod stability;
mod sweep;

pub use pool::run_jobs;
pub use reports::{
    basis_validate, bounds_report, BasisValidation, BoundsConfig, BoundsDraw, BoundsReport,
};
pub use stability::{run_stability_trials, StabilityConfig, StabilityTrial};
pub use sweep::{
    layer_medians, run_equivariance_sweep, sweep_csv, DataSource, SweepConfig, SweepRow,
};

/// Environment variable naming the default directory for IDX inputs.
pub const DATA_DIR_ENV: &str = "RST_DATA_DIR";
