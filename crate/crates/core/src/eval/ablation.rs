//! Parameter sweeps over the full experiment.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::config::{RunConfig, ShadowArch};
use crate::error::{Error, Result};
use crate::experiment::{prepare, prepare_data, prepare_from_models, run_attacks, train_models, AttackKind, Prepared};
use crate::nn::Activation;
use crate::signals::MetricSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AblationAxis {
    DistillEpochs,
    DistillSize,
    TrainSize,
    MetricSubset,
    Shuffle,
    DatasetMismatch,
    ArchMismatch,
}

impl AblationAxis {
    pub const ALL: [AblationAxis; 7] = [
        Self::DistillEpochs,
        Self::DistillSize,
        Self::TrainSize,
        Self::MetricSubset,
        Self::Shuffle,
        Self::DatasetMismatch,
        Self::ArchMismatch,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::DistillEpochs => "distill_epochs",
            Self::DistillSize => "distill_size",
            Self::TrainSize => "train_size",
            Self::MetricSubset => "metric_subset",
            Self::Shuffle => "shuffle",
            Self::DatasetMismatch => "dataset_mismatch",
            Self::ArchMismatch => "arch_mismatch",
        }
    }

    /// Axes whose points share trained target and shadow models.
    fn shares_models(self) -> bool {
        matches!(self, Self::DistillEpochs | Self::DistillSize | Self::MetricSubset | Self::Shuffle)
    }

    /// Axes whose points also share distillation and sequences.
    fn shares_sequences(self) -> bool {
        matches!(self, Self::MetricSubset | Self::Shuffle)
    }
}

impl fmt::Display for AblationAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AblationAxis {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| Error::InvalidConfig(vec![format!("unknown ablation axis {s:?}")]))
    }
}

/// One sweep point: a full configuration and the attack evaluated on it.
#[derive(Debug, Clone, PartialEq)]
pub struct AblationPoint {
    pub value: String,
    pub config: RunConfig,
    pub attack: AttackKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationGrid {
    pub axis: AblationAxis,
    pub points: Vec<AblationPoint>,
}

/// Adversary architecture used by the architecture-mismatch point.
fn mismatched_arch(cfg: &RunConfig) -> ShadowArch {
    let hidden = cfg.model.hidden.iter().map(|&h| (h / 2).max(1)).chain([64]).collect();
    let activation = match cfg.model.activation {
        Activation::Relu => Activation::Tanh,
        Activation::Tanh => Activation::Relu,
    };
    ShadowArch { hidden, activation }
}

impl AblationGrid {
    /// Points differ from `base` only along `axis`.
    pub fn new(axis: AblationAxis, base: &RunConfig) -> Self {
        let ab = &base.eval.ablation;
        let seqmia = AttackKind::SeqMia(base.attack.metrics.clone());
        let point = |value: String, config: RunConfig, attack: AttackKind| AblationPoint { value, config, attack };
        let points = match axis {
            AblationAxis::DistillEpochs => ab
                .distill_epochs
                .iter()
                .map(|&n| {
                    let mut c = base.clone();
                    c.distill.epochs = n;
                    point(n.to_string(), c, seqmia.clone())
                })
                .collect(),
            AblationAxis::DistillSize => ab
                .distill_size
                .iter()
                .map(|&n| {
                    let mut c = base.clone();
                    c.distill.size = Some(n);
                    point(n.to_string(), c, seqmia.clone())
                })
                .collect(),
            AblationAxis::TrainSize => ab
                .train_size
                .iter()
                .map(|&n| {
                    let mut c = base.clone();
                    c.dataset.train_size = Some(n);
                    point(n.to_string(), c, seqmia.clone())
                })
                .collect(),
            AblationAxis::MetricSubset => MetricSet::all_pairs()
                .into_iter()
                .map(|m| point(m.label(), base.clone(), AttackKind::SeqMia(m)))
                .collect(),
            AblationAxis::Shuffle => vec![
                point("ordered".into(), base.clone(), AttackKind::LossSet),
                point("shuffled".into(), base.clone(), AttackKind::LossSetShuffled),
            ],
            AblationAxis::DatasetMismatch => [false, true]
                .into_iter()
                .map(|on| {
                    let mut c = base.clone();
                    c.dataset.mismatch = on;
                    point(on.to_string(), c, seqmia.clone())
                })
                .collect(),
            AblationAxis::ArchMismatch => {
                let mut c = base.clone();
                c.model.shadow = Some(mismatched_arch(base));
                vec![
                    point("false".into(), base.clone(), seqmia.clone()),
                    point("true".into(), c, seqmia),
                ]
            }
        };
        Self { axis, points }
    }
}

/// One results row. `error` is set, and the metrics are NaN, when the point
/// failed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub axis: AblationAxis,
    pub value: String,
    pub attack: String,
    #[serde(with = "crate::serde_float")]
    pub tpr_at_0_1pct_fpr: f64,
    #[serde(with = "crate::serde_float")]
    pub tpr_at_1pct_fpr: f64,
    #[serde(with = "crate::serde_float")]
    pub balanced_accuracy: f64,
    #[serde(with = "crate::serde_float")]
    pub calibrated_balanced_accuracy: f64,
    #[serde(with = "crate::serde_float")]
    pub auc: f64,
    #[serde(with = "crate::serde_float")]
    pub overfitting_level: f64,
    pub error: Option<String>,
}

impl AblationRow {
    fn failed(axis: AblationAxis, p: &AblationPoint, e: &Error) -> Self {
        Self {
            axis,
            value: p.value.clone(),
            attack: p.attack.name(),
            tpr_at_0_1pct_fpr: f64::NAN,
            tpr_at_1pct_fpr: f64::NAN,
            balanced_accuracy: f64::NAN,
            calibrated_balanced_accuracy: f64::NAN,
            auc: f64::NAN,
            overfitting_level: f64::NAN,
            error: Some(e.to_string()),
        }
    }
}

fn evaluate_point(axis: AblationAxis, p: &AblationPoint, prepared: &Prepared) -> Result<AblationRow> {
    let res = run_attacks(&p.config, prepared, std::slice::from_ref(&p.attack))?;
    let ev = &res.evaluations[0];
    Ok(AblationRow {
        axis,
        value: p.value.clone(),
        attack: ev.name.clone(),
        tpr_at_0_1pct_fpr: ev.report.tpr_at(0.001),
        tpr_at_1pct_fpr: ev.report.tpr_at(0.01),
        balanced_accuracy: ev.report.balanced_accuracy,
        calibrated_balanced_accuracy: ev.calibrated_balanced_accuracy,
        auc: ev.report.auc,
        overfitting_level: res.models.overfitting_level,
        error: None,
    })
}

/// Runs every point. Work that no point along the axis changes is shared;
/// a failing point is recorded and the sweep continues.
pub fn run_ablation(grid: &AblationGrid, base: &RunConfig) -> Vec<AblationRow> {
    let axis = grid.axis;
    let shared = if axis.shares_models() {
        prepare_data(base).and_then(|d| train_models(base, &d).map(|m| (d, m)))
    } else {
        Err(Error::Empty("unused".into()))
    };
    let shared_prepared = match (&shared, axis.shares_sequences()) {
        (Ok((d, m)), true) => Some(prepare_from_models(base, d.clone(), m.clone())),
        _ => None,
    };
    grid.points
        .iter()
        .map(|p| {
            log::info!("ablation {axis} = {}", p.value);
            let prepared = match (&shared_prepared, &shared) {
                (Some(sp), _) => sp.as_ref().map_err(|e| Error::Verification(e.to_string())).cloned(),
                (None, Ok((d, m))) if axis.shares_models() => prepare_from_models(&p.config, d.clone(), m.clone()),
                (None, Err(e)) if axis.shares_models() => Err(Error::Verification(e.to_string())),
                _ => prepare(&p.config),
            };
            prepared
                .and_then(|pr| evaluate_point(axis, p, &pr))
                .unwrap_or_else(|e| AblationRow::failed(axis, p, &e))
        })
        .collect()
}

pub fn ablation_csv(rows: &[AblationRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "axis",
        "value",
        "attack",
        "tpr_at_0.1%fpr",
        "tpr_at_1%fpr",
        "balanced_accuracy",
        "calibrated_balanced_accuracy",
        "auc",
        "overfitting_level",
        "error",
    ])
    .map_err(|e| Error::Format(e.to_string()))?;
    for r in rows {
        w.write_record([
            r.axis.as_str().to_string(),
            r.value.clone(),
            r.attack.clone(),
            r.tpr_at_0_1pct_fpr.to_string(),
            r.tpr_at_1pct_fpr.to_string(),
            r.balanced_accuracy.to_string(),
            r.calibrated_balanced_accuracy.to_string(),
            r.auc.to_string(),
            r.overfitting_level.to_string(),
            r.error.clone().unwrap_or_default(),
        ])
        .map_err(|e| Error::Format(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Format(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Format(e.to_string()))
}
