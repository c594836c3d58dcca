//! Seeded Monte Carlo sweeps over (H, σ_ε) grids and their summaries.

mod config;
mod report;
mod sweep;

pub use config::{ExperimentConfig, LevelRanges, MIN_LEVEL};
pub use report::{
    evaluate_metrics, pair_reliability, write_metrics_csv, MetricRow, PairReliabilityMap,
};
pub use sweep::{
    build_training_matrix, read_results_csv, replicate_seed, run_sweep, run_sweep_detailed,
    with_workers, worker_count, write_results_csv, PairDetail, ResultRecord, SweepOutput,
    TrainingSet, THREADS_ENV,
};
