//! Classifier performance, synthetic-data quality, and aggregation.

pub mod confusion;
pub mod mmd;
pub mod quality;
pub mod stats;

pub use confusion::{cohen_kappa, confusion_stats, t_metric, ConfusionMatrix, Rates};
pub use mmd::{
    median_heuristic, median_heuristic_vectors, mmd2_unbiased, mmd2_unbiased_vectors, mmd_test, optimize_kernel,
    optimize_kernel_vectors, KernelFit, MmdReport,
};
pub use stats::{aggregate, t_test_one_tailed, Aggregate, TTest};
pub use quality::{evaluate_quality, trts, tstr, QualityReport, ScoreMetric};
