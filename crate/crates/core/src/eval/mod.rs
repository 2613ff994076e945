//! Splitting, metrics and the original-vs-SMOTE experiment runner.

mod experiment;
mod metrics;
mod split;

pub use experiment::{
    render_csv, render_metrics_table, render_timing_table, run_experiment, run_experiment_on,
    EvalReport, ExperimentConfig, ExperimentResult, TrainOverrides, Variant,
};
pub use metrics::{compute_metrics, confusion, f1_score, format_pct, ConfusionMatrix, Metrics};
pub use split::stratified_split;
