//! Configuration-driven sweeps, output files and canned figure configurations.

mod canned;
mod config;
mod output;
mod sweep;

pub use canned::{canned, FIGURE_IDS};
pub use config::{
    default_t_grid, BmsbOptions, BoundsOptions, Estimator, ExperimentConfig, ModelConfig,
    NoiseConfig, PolicyConfig, QuadrotorGainsConfig, SimulateOptions, SmeOptions, SweepConfig,
    SCHEMA_VERSION,
};
pub use output::{sweep_csv, to_json, trajectory_csv, write_sweep, Format, ModelSummary, CSV_HEADER};
pub use sweep::{
    aggregate, fit_loglog_slope, run_sweep, Aggregate, BoundSummary, NestingAudit,
    ProjectionRecord, Record, SweepResult, MAX_FAILED_FRACTION,
};

/// Rayon pool sized by `NLSYSID_THREADS` (unset or 0 means one thread per core).
pub fn thread_pool() -> crate::Result<rayon::ThreadPool> {
    let n = std::env::var("NLSYSID_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .unwrap_or(0);
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build()
        .map_err(|e| crate::CoreError::Config(format!("NLSYSID_THREADS: {e}")))
}
