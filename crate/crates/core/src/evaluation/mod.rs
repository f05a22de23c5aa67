//! Metrics, frequency summaries and sweep harnesses.

mod frequency;
mod harness;
mod metrics;

pub use frequency::{
    dataset_frequencies, frequency_summary, FrequencyEntry, FrequencySummary, GroupShares,
    ShareRecord,
};
pub use harness::{
    evaluate, evaluate_with, predicted_frequencies, run_seed, sweep, EvalConfig, EvalReport,
    SeedResult, SeedRun, SweepAxis, SweepRow, SweepTable, DEFAULT_K_SWEEP, DEFAULT_SEEDS,
};
pub use metrics::{accuracy, confusion, mean_std, shares, ClassMetrics, Confusion};
