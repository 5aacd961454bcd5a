//! ROC analysis, balanced accuracy and ablation sweeps.

pub mod ablation;
mod roc;

pub use ablation::{ablation_csv, AblationAxis, AblationGrid, AblationPoint, AblationRow};
pub use roc::{
    auc_oracle, balanced_accuracy_at, best_threshold, export_log_roc, parse_roc_csv, read_roc_csv, roc, roc_csv,
    RocReport, DEFAULT_FPR_LEVELS,
};
