//! Logistic mapping of objective scores to MOS and agreement statistics.

pub mod logistic;
pub mod report;
pub mod stats;

pub use logistic::{logistic, logistic_fit, LogisticFit};
pub use report::{evaluate, evaluate_columns, EvaluationConfig, EvaluationReport, MetricStats, ScoreTable};
pub use stats::{correlation_stats, error_stats, pearson, ranks, spearman, ErrorStats};
