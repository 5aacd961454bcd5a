//! In-memory experiment driver. The on-disk stages in [`crate::run`] call
//! the same functions one step at a time.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::attacks::{
    attack_loss_set, attack_mba, attack_st, infer_seqmia, mean_attention, train_seqmia, AttackExample, AttackScore,
    LossSetVariant, MetricObservation, SeqMiaModel,
};
use crate::config::{DataSource, RunConfig};
use crate::data::{generate_from_prototypes, load_csv, random_prototypes, split, DataSplits, Dataset};
use crate::error::{Error, Result};
use crate::eval::{balanced_accuracy_at, best_threshold, roc, RocReport};
use crate::nn::{softmax_rows, Matrix, MlpModel};
use crate::pipeline::{distill_cross_architecture, train_original, Origin, OriginalModel, SnapshotSeries};
use crate::rng::derive_seed;
use crate::signals::{build_sequences, summarize, GroupSummary, Metric, MetricSet, SequenceSet};

/// Primary data plus, under dataset mismatch, the adversary's auxiliary
/// data. Target splits index `primary`; shadow and distillation splits
/// index [`ExperimentData::adversary`].
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentData {
    pub primary: Dataset,
    pub auxiliary: Option<Dataset>,
    pub splits: DataSplits,
}

impl ExperimentData {
    pub fn adversary(&self) -> &Dataset {
        self.auxiliary.as_ref().unwrap_or(&self.primary)
    }

    /// Target and shadow training rows after the optional size cap.
    pub fn train_rows(&self, cfg: &RunConfig) -> (&[usize], &[usize]) {
        let cap = |v: &'_ [usize]| cfg.dataset.train_size.map_or(v.len(), |m| m.min(v.len()));
        let t = &self.splits.target_train;
        let s = &self.splits.shadow_train;
        (&t[..cap(t)], &s[..cap(s)])
    }

    pub fn distill_features(&self, cfg: &RunConfig) -> Matrix {
        let d = &self.splits.distill;
        let n = cfg.distill.size.map_or(d.len(), |m| m.min(d.len()));
        self.adversary().features.select_rows(&d[..n])
    }
}

pub fn prepare_data(cfg: &RunConfig) -> Result<ExperimentData> {
    cfg.validate()?;
    let ds = &cfg.dataset;
    let seeds = cfg.seeds();
    let (primary, prototypes) = match ds.source {
        DataSource::Synthetic => {
            let protos = random_prototypes(ds.num_classes, ds.dim, derive_seed(seeds.dataset, "prototypes"));
            let d = generate_from_prototypes(&protos, ds.per_class, ds.flip_prob, seeds.dataset, "synthetic")?;
            (d, Some(protos))
        }
        DataSource::Csv => {
            let path = ds.path.as_ref().expect("validated");
            (load_csv(path)?, None)
        }
    };
    let spec = cfg.split_spec();
    let mut splits = split(primary.len(), &spec)?;
    let auxiliary = match (ds.mismatch, prototypes) {
        (true, Some(protos)) => {
            let aux = generate_from_prototypes(&protos, ds.per_class, ds.mismatch_flip_prob, seeds.auxiliary, "auxiliary")?;
            let aux_spec = crate::data::SplitSpec {
                seed: derive_seed(seeds.auxiliary, "split"),
                ..spec
            };
            let aux_splits = split(aux.len(), &aux_spec)?;
            splits.shadow_train = aux_splits.shadow_train;
            splits.shadow_test = aux_splits.shadow_test;
            splits.distill = aux_splits.distill;
            Some(aux)
        }
        _ => None,
    };
    Ok(ExperimentData {
        primary,
        auxiliary,
        splits,
    })
}

#[derive(Debug, Clone)]
pub struct TrainedModels {
    pub target: OriginalModel,
    pub shadow: OriginalModel,
}

pub fn train_models(cfg: &RunConfig, data: &ExperimentData) -> Result<TrainedModels> {
    let (t_rows, s_rows) = data.train_rows(cfg);
    let p = &data.primary;
    let a = data.adversary();
    let target = train_original(
        p,
        t_rows,
        &data.splits.target_test,
        &cfg.target_arch(p.dim(), p.num_classes),
        &cfg.target_sgd(),
    )?;
    let shadow = train_original(
        a,
        s_rows,
        &data.splits.shadow_test,
        &cfg.shadow_arch(a.dim(), a.num_classes),
        &cfg.shadow_sgd(),
    )?;
    log::info!(
        "target train/test accuracy {:.3}/{:.3}, shadow {:.3}/{:.3}",
        target.train_accuracy,
        target.test_accuracy,
        shadow.train_accuracy,
        shadow.test_accuracy
    );
    Ok(TrainedModels { target, shadow })
}

/// Distils both models with the same settings; students use the
/// adversary's (shadow) architecture.
pub fn distill_models(
    cfg: &RunConfig,
    data: &ExperimentData,
    target: &MlpModel,
    shadow: &MlpModel,
) -> Result<(SnapshotSeries, SnapshotSeries)> {
    let features = data.distill_features(cfg);
    let a = data.adversary();
    let student = cfg.shadow_arch(a.dim(), a.num_classes);
    let dc = cfg.distill_config();
    let t = distill_cross_architecture(target, &student, &features, &dc, Origin::Target)?;
    let s = distill_cross_architecture(shadow, &student, &features, &dc, Origin::Shadow)?;
    Ok((t, s))
}

/// Five-metric sequences: shadow (attack training) and target (evaluation).
#[derive(Debug, Clone, PartialEq)]
pub struct AttackSequences {
    pub shadow: SequenceSet,
    pub target: SequenceSet,
}

fn sequence_set(series: &SnapshotSeries, data: &Dataset, members: &[usize], others: &[usize]) -> Result<SequenceSet> {
    let ids: Vec<usize> = members.iter().chain(others).copied().collect();
    let subset = data.subset(&ids);
    let seqs = build_sequences(series, &subset.features, &subset.labels, &ids, &MetricSet::all())?;
    let truth = (0..ids.len()).map(|i| i < members.len()).collect();
    SequenceSet::new(seqs, truth)
}

pub fn build_attack_sequences(
    cfg: &RunConfig,
    data: &ExperimentData,
    target_series: &SnapshotSeries,
    shadow_series: &SnapshotSeries,
) -> Result<AttackSequences> {
    let (t_rows, s_rows) = data.train_rows(cfg);
    Ok(AttackSequences {
        shadow: sequence_set(shadow_series, data.adversary(), s_rows, &data.splits.shadow_test)?,
        target: sequence_set(target_series, &data.primary, t_rows, &data.splits.target_test)?,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackKind {
    SeqMia(MetricSet),
    LossSet,
    LossSetShuffled,
    MultiMetricSet,
    MbaEntropy,
    MbaMentropy,
    St,
}

impl AttackKind {
    /// SeqMIA with the configured metrics, its loss-only variant and every
    /// baseline.
    pub fn standard(cfg: &RunConfig) -> Vec<Self> {
        let mut v = vec![Self::SeqMia(cfg.attack.metrics.clone())];
        if cfg.attack.metrics != RunConfig::loss_metrics() {
            v.push(Self::SeqMia(RunConfig::loss_metrics()));
        }
        v.extend([
            Self::LossSet,
            Self::LossSetShuffled,
            Self::MultiMetricSet,
            Self::MbaEntropy,
            Self::MbaMentropy,
            Self::St,
        ]);
        v
    }

    pub fn name(&self) -> String {
        match self {
            Self::SeqMia(m) if *m == MetricSet::all() => "seqmia".into(),
            Self::SeqMia(m) => format!("seqmia_{}", m.label()),
            Self::LossSet => "loss_set".into(),
            Self::LossSetShuffled => "loss_set_shuffled".into(),
            Self::MultiMetricSet => "multi_metric_set".into(),
            Self::MbaEntropy => "mba_entropy".into(),
            Self::MbaMentropy => "mba_mentropy".into(),
            Self::St => "st".into(),
        }
    }
}

impl fmt::Display for AttackKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

/// Scores of one attack on the shadow (calibration) and target sets.
#[derive(Debug, Clone, PartialEq)]
pub struct AttackRun {
    pub name: String,
    pub shadow_scores: Vec<AttackScore>,
    pub shadow_truth: Vec<bool>,
    pub target_scores: Vec<AttackScore>,
    pub target_truth: Vec<bool>,
    /// Trained recurrent attack, for sequence attacks only.
    pub model: Option<SeqMiaModel>,
}

fn examples(set: &SequenceSet) -> Vec<AttackExample> {
    set.iter().map(|(s, m)| AttackExample::new(s.clone(), m)).collect()
}

fn observations(set: &SequenceSet, data: &Dataset, metric: Metric) -> Result<Vec<MetricObservation>> {
    set.iter()
        .map(|(s, member)| {
            let row = s
                .row(metric)
                .ok_or_else(|| Error::Shape(format!("metric {metric} missing from sequences")))?;
            Ok(MetricObservation {
                sample_id: s.sample_id(),
                class_label: data.labels[s.sample_id()],
                value: *row.last().expect("non-empty"),
                member,
            })
        })
        .collect()
}

fn final_posteriors(series: &SnapshotSeries, data: &Dataset, set: &SequenceSet) -> Result<(Matrix, Vec<usize>)> {
    let ids: Vec<usize> = set.sequences.iter().map(|s| s.sample_id()).collect();
    let logits = series.original().forward(&data.features.select_rows(&ids))?;
    Ok((softmax_rows(&logits)?, ids))
}

pub fn run_attack(
    cfg: &RunConfig,
    kind: &AttackKind,
    data: &ExperimentData,
    target_series: &SnapshotSeries,
    shadow_series: &SnapshotSeries,
    seqs: &AttackSequences,
) -> Result<AttackRun> {
    let shadow_truth = seqs.shadow.members.clone();
    let target_truth = seqs.target.members.clone();
    let mut model_out = None;
    let (shadow_scores, target_scores) = match kind {
        AttackKind::SeqMia(metrics) => {
            let shadow = seqs.shadow.select(metrics)?;
            let target = seqs.target.select(metrics)?;
            let model = train_seqmia(&examples(&shadow), &cfg.seqmia_config())?;
            log::debug!("{kind} attack losses {:?}", model.epoch_losses);
            let scores = (
                infer_seqmia(&model, &shadow.sequences)?,
                infer_seqmia(&model, &target.sequences)?,
            );
            model_out = Some(model);
            scores
        }
        AttackKind::LossSet | AttackKind::LossSetShuffled | AttackKind::MultiMetricSet => {
            let metrics = if *kind == AttackKind::MultiMetricSet {
                MetricSet::all()
            } else {
                RunConfig::loss_metrics()
            };
            let variant = if *kind == AttackKind::LossSetShuffled {
                LossSetVariant::Shuffled {
                    seed: cfg.seeds().shuffle,
                }
            } else {
                LossSetVariant::Ordered
            };
            let shadow = seqs.shadow.select(&metrics)?;
            let target = seqs.target.select(&metrics)?;
            let train = examples(&shadow);
            let bc = cfg.baseline_config();
            // One trained attack scores both sets; training is deterministic,
            // so scoring the shadow set separately reproduces the same model.
            let mut all = shadow.sequences.clone();
            all.extend(target.sequences.iter().cloned());
            let mut scores = attack_loss_set(&train, &all, &bc, &variant)?;
            let target_scores = scores.split_off(shadow.len());
            (scores, target_scores)
        }
        AttackKind::MbaEntropy | AttackKind::MbaMentropy => {
            let metric = if *kind == AttackKind::MbaEntropy {
                Metric::Entropy
            } else {
                Metric::Mentropy
            };
            let shadow = observations(&seqs.shadow, data.adversary(), metric)?;
            let target = observations(&seqs.target, &data.primary, metric)?;
            (attack_mba(&shadow, &shadow)?, attack_mba(&shadow, &target)?)
        }
        AttackKind::St => {
            let (sp, sids) = final_posteriors(shadow_series, data.adversary(), &seqs.shadow)?;
            let (tp, tids) = final_posteriors(target_series, &data.primary, &seqs.target)?;
            let bc = cfg.baseline_config();
            (
                attack_st(&sp, &shadow_truth, &sp, &sids, &bc)?,
                attack_st(&sp, &shadow_truth, &tp, &tids, &bc)?,
            )
        }
    };
    Ok(AttackRun {
        name: kind.name(),
        shadow_scores,
        shadow_truth,
        target_scores,
        target_truth,
        model: model_out,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackEvaluation {
    pub name: String,
    pub report: RocReport,
    /// Threshold maximising balanced accuracy on the shadow scores.
    #[serde(with = "crate::serde_float")]
    pub calibrated_threshold: f64,
    /// Balanced accuracy on target scores at the calibrated threshold.
    pub calibrated_balanced_accuracy: f64,
}

impl AttackEvaluation {
    pub fn auc(&self) -> f64 {
        self.report.auc
    }
}

pub fn evaluate_attack(run: &AttackRun, fpr_levels: &[f64]) -> Result<AttackEvaluation> {
    let target: Vec<f64> = run.target_scores.iter().map(|s| s.score).collect();
    let shadow: Vec<f64> = run.shadow_scores.iter().map(|s| s.score).collect();
    let report = roc(&target, &run.target_truth, fpr_levels)?;
    let threshold = best_threshold(&shadow, &run.shadow_truth)?;
    Ok(AttackEvaluation {
        name: run.name.clone(),
        calibrated_balanced_accuracy: balanced_accuracy_at(&target, &run.target_truth, threshold)?,
        calibrated_threshold: threshold,
        report,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSummary {
    pub target_train_accuracy: f64,
    pub target_test_accuracy: f64,
    pub shadow_train_accuracy: f64,
    pub shadow_test_accuracy: f64,
    pub overfitting_level: f64,
}

impl ModelSummary {
    pub fn new(models: &TrainedModels) -> Self {
        Self {
            target_train_accuracy: models.target.train_accuracy,
            target_test_accuracy: models.target.test_accuracy,
            shadow_train_accuracy: models.shadow.train_accuracy,
            shadow_test_accuracy: models.shadow.test_accuracy,
            overfitting_level: models.target.overfitting_level(),
        }
    }
}

/// Target-sequence statistics split by membership.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalSummary {
    pub members: GroupSummary,
    pub nonmembers: GroupSummary,
}

pub fn signal_summary(target: &SequenceSet) -> Result<SignalSummary> {
    let pick = |want: bool| target.iter().filter(move |(_, m)| *m == want).map(|(s, _)| s);
    Ok(SignalSummary {
        members: summarize(pick(true))?,
        nonmembers: summarize(pick(false))?,
    })
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub models: ModelSummary,
    pub runs: Vec<AttackRun>,
    pub evaluations: Vec<AttackEvaluation>,
    pub signals: SignalSummary,
}

impl ExperimentResult {
    pub fn evaluation(&self, name: &str) -> Option<&AttackEvaluation> {
        self.evaluations.iter().find(|e| e.name == name)
    }

    /// Mean attention of the first sequence attack, members then
    /// non-members.
    pub fn attention(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        let run = self.runs.iter().find(|r| r.target_scores.iter().any(|s| !s.attention.is_empty()))?;
        mean_attention(&run.target_scores, &run.target_truth).ok()
    }
}

/// Everything up to and including the sequences.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub data: ExperimentData,
    pub models: TrainedModels,
    pub target_series: SnapshotSeries,
    pub shadow_series: SnapshotSeries,
    pub sequences: AttackSequences,
}

pub fn prepare(cfg: &RunConfig) -> Result<Prepared> {
    let data = prepare_data(cfg)?;
    let models = train_models(cfg, &data)?;
    prepare_from_models(cfg, data, models)
}

pub fn prepare_from_models(cfg: &RunConfig, data: ExperimentData, models: TrainedModels) -> Result<Prepared> {
    let (target_series, shadow_series) = distill_models(cfg, &data, &models.target.model, &models.shadow.model)?;
    let sequences = build_attack_sequences(cfg, &data, &target_series, &shadow_series)?;
    Ok(Prepared {
        data,
        models,
        target_series,
        shadow_series,
        sequences,
    })
}

pub fn run_attacks(cfg: &RunConfig, prepared: &Prepared, kinds: &[AttackKind]) -> Result<ExperimentResult> {
    let mut runs = Vec::with_capacity(kinds.len());
    let mut evaluations = Vec::with_capacity(kinds.len());
    for kind in kinds {
        let run = run_attack(
            cfg,
            kind,
            &prepared.data,
            &prepared.target_series,
            &prepared.shadow_series,
            &prepared.sequences,
        )?;
        let ev = evaluate_attack(&run, &cfg.eval.fpr_levels)?;
        log::info!(
            "{kind}: auc {:.4} balanced accuracy {:.4} (calibrated {:.4})",
            ev.report.auc,
            ev.report.balanced_accuracy,
            ev.calibrated_balanced_accuracy
        );
        runs.push(run);
        evaluations.push(ev);
    }
    Ok(ExperimentResult {
        models: ModelSummary::new(&prepared.models),
        runs,
        evaluations,
        signals: signal_summary(&prepared.sequences.target)?,
    })
}

pub fn run_experiment(cfg: &RunConfig, kinds: &[AttackKind]) -> Result<ExperimentResult> {
    let prepared = prepare(cfg)?;
    run_attacks(cfg, &prepared, kinds)
}
