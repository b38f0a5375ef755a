//! Dataset splitting, target normalization, training, evaluation and the
//! statistical comparison of runs.

mod metrics;
mod normalize;
mod split;
mod stats;
mod trainer;

pub use metrics::{compute_metrics, fit_power_law, Metrics, SampleError};
pub use normalize::Normalizer;
pub use split::{k_fold_indices, split_indices, SplitPreset, SplitRatios};
pub use stats::{regularized_incomplete_beta, summarize_runs, two_sample_t_test, two_tailed_p, TTest};
pub use trainer::{
    evaluate, fit_target_normalizer, sample_efficiency_sweep, train, validation_mae,
    write_history, EpochRecord, Sample, StopReason, SweepPoint, TrainConfig, TrainResult,
};
