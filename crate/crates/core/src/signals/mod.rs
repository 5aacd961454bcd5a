//! Per-posterior metrics, multi-metric sequences and their statistics.

pub mod metrics;
pub mod sequence;
pub mod stats;
pub mod store;

pub use metrics::{
    metric_entropy, metric_loss, metric_max, metric_mentropy, metric_sd, Metric, MetricSet, PosteriorVector,
};
pub use sequence::{build_sequence, build_sequences, MetricSequenceMatrix};
pub use stats::{abs_corr_matrix, clfa, decline_rate, pearson, sequence_stats, summarize, GroupSummary, SequenceStats};
pub use store::SequenceSet;
