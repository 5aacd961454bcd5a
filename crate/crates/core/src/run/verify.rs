//! Independent consistency checks over a finished run directory.

use std::collections::BTreeSet;
use std::fmt;

use crate::error::Result;
use crate::eval::{auc_oracle, roc};
use crate::experiment::AttackKind;
use crate::nn::{decode_rnn, gradient_check_subset, ClassificationObjective, Matrix, Objective, Parameters, SequenceObjective};
use crate::pipeline::Origin;

use super::{
    sha256_hex, list_files, AttackModelRecord, EvaluationRecord, Run, Stage, CONFIG_FILE, EVALUATION, LOCK_FILE,
    MANIFEST_FILE, TARGET_MODEL,
};

/// Largest relative gradient error accepted by the spot checks.
pub const GRADIENT_TOLERANCE: f64 = 1e-4;
const AUC_ORACLE_TOLERANCE: f64 = 1e-9;
const GRADIENT_SAMPLES: usize = 3;
const GRADIENT_PARAMS: usize = 24;

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyCheck {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct VerifyReport {
    pub checks: Vec<VerifyCheck>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        !self.checks.is_empty() && self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &VerifyCheck> {
        self.checks.iter().filter(|c| !c.passed)
    }

    fn push(&mut self, name: impl Into<String>, outcome: std::result::Result<String, String>) {
        let (passed, detail) = match outcome {
            Ok(d) => (true, d),
            Err(d) => (false, d),
        };
        self.checks.push(VerifyCheck {
            name: name.into(),
            passed,
            detail,
        });
    }
}

impl fmt::Display for VerifyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let width = self.checks.iter().map(|c| c.name.len()).max().unwrap_or(0);
        for c in &self.checks {
            let tag = if c.passed { "PASS" } else { "FAIL" };
            writeln!(f, "{tag}  {:width$}  {}", c.name, c.detail)?;
        }
        Ok(())
    }
}

fn err_string<T>(r: Result<T>) -> std::result::Result<T, String> {
    r.map_err(|e| e.to_string())
}

/// Parameter indices with the largest analytic gradient magnitude, so the
/// finite-difference comparison is not dominated by round-off.
fn busiest_params<O: Objective>(model: &O::Model, obj: &O, index: usize) -> Vec<usize>
where
    O::Model: Parameters,
{
    let mut g = model.zeros_like();
    obj.loss_and_grad(model, index, &mut g);
    let flat = g.flat_params();
    let mut order: Vec<usize> = (0..flat.len()).collect();
    order.sort_by(|&a, &b| flat[b].abs().total_cmp(&flat[a].abs()).then(a.cmp(&b)));
    order.truncate(GRADIENT_PARAMS);
    order
}

/// The samples with the highest loss. Confidently fitted samples have
/// gradients near round-off and make poor finite-difference probes.
fn hardest_samples<O: Objective>(model: &O::Model, obj: &O, count: usize) -> Vec<usize> {
    let losses: Vec<f64> = (0..obj.len()).map(|i| obj.loss(model, i)).collect();
    let mut order: Vec<usize> = (0..losses.len()).collect();
    order.sort_by(|&a, &b| losses[b].total_cmp(&losses[a]).then(a.cmp(&b)));
    order.truncate(count);
    order
}

fn check_integrity(run: &Run) -> std::result::Result<String, String> {
    let dir = run.dir();
    let config = std::fs::read(dir.join(CONFIG_FILE)).map_err(|e| e.to_string())?;
    if sha256_hex(&config) != run.manifest().config_hash {
        return Err("config.toml does not match the recorded config hash".into());
    }
    let mut listed = BTreeSet::new();
    for (stage, record) in &run.manifest().stages {
        for (path, expected) in &record.artifacts {
            let bytes = std::fs::read(dir.join(path)).map_err(|e| format!("{stage}: {path}: {e}"))?;
            let found = sha256_hex(&bytes);
            if &found != expected {
                return Err(format!("{stage}: {path}: sha256 {found} != recorded {expected}"));
            }
            listed.insert(path.clone());
        }
    }
    let extra: Vec<String> = err_string(list_files(dir))?
        .into_iter()
        .filter(|p| ![MANIFEST_FILE, CONFIG_FILE, LOCK_FILE].contains(&p.as_str()) && !listed.contains(p))
        .collect();
    if !extra.is_empty() {
        return Err(format!("files not in the manifest: {}", extra.join(", ")));
    }
    Ok(format!("{} artifacts match", listed.len()))
}

fn check_current(run: &Run) -> std::result::Result<String, String> {
    let stages: Vec<Stage> = Stage::ALL
        .into_iter()
        .filter(|s| run.manifest().stages.contains_key(s.as_str()))
        .collect();
    for &s in &stages {
        err_string(run.ensure_current(s))?;
    }
    let required = [Stage::Generate, Stage::Train, Stage::Distill, Stage::Sequences, Stage::Attack, Stage::Evaluate];
    let missing: Vec<&str> = required.iter().filter(|s| !stages.contains(s)).map(|s| s.as_str()).collect();
    if !missing.is_empty() {
        return Err(format!("stages not run: {}", missing.join(", ")));
    }
    Ok(format!("{} stages current", stages.len()))
}

fn check_sequences(run: &Run) -> std::result::Result<String, String> {
    let seqs = err_string(run.load_sequences())?;
    let data = err_string(run.load_data())?;
    let cfg = run.config();
    let (t_rows, s_rows) = data.train_rows(cfg);
    let steps = cfg.distill.epochs + 1;
    let k = cfg.attack.metrics.len();
    let expect = [
        (Origin::Target, &seqs.target, t_rows.len() + data.splits.target_test.len()),
        (Origin::Shadow, &seqs.shadow, s_rows.len() + data.splits.shadow_test.len()),
    ];
    for (origin, set, count) in expect {
        let (sk, ss) = set.shape().ok_or_else(|| format!("{} sequences are empty", origin.as_str()))?;
        if set.len() != count || sk != k || ss != steps {
            return Err(format!(
                "{}: {} sequences of {sk}x{ss}, expected {count} of {k}x{steps}",
                origin.as_str(),
                set.len()
            ));
        }
    }
    Ok(format!("{k}x{steps} per sample"))
}

fn check_roc(run: &Run) -> std::result::Result<String, String> {
    let record: EvaluationRecord = err_string(run.read_json(EVALUATION))?;
    let kinds = AttackKind::standard(run.config());
    if record.evaluations.len() != kinds.len() {
        return Err(format!("{} evaluations for {} attacks", record.evaluations.len(), kinds.len()));
    }
    for (kind, stored) in kinds.iter().zip(&record.evaluations) {
        let name = kind.name();
        if stored.name != name {
            return Err(format!("evaluation {:?} where {name:?} was expected", stored.name));
        }
        let attack = err_string(run.load_attack_run(&name))?;
        let scores: Vec<f64> = attack.target_scores.iter().map(|s| s.score).collect();
        let fresh = err_string(roc(&scores, &attack.target_truth, &run.config().eval.fpr_levels))?;
        if fresh != stored.report {
            return Err(format!("{name}: recomputed ROC differs from evaluation.json"));
        }
        let oracle = err_string(auc_oracle(&scores, &attack.target_truth))?;
        if (oracle - fresh.auc).abs() > AUC_ORACLE_TOLERANCE {
            return Err(format!("{name}: AUC {} vs pairwise {oracle}", fresh.auc));
        }
    }
    Ok(format!("{} attacks reproduce", kinds.len()))
}

fn check_target_gradient(run: &Run) -> std::result::Result<String, String> {
    let data = err_string(run.load_data())?;
    let model = err_string(run.load_model(TARGET_MODEL))?;
    let rows = &data.splits.target_test;
    let features = data.primary.features.select_rows(rows);
    let labels: Vec<usize> = rows.iter().map(|&r| data.primary.labels[r]).collect();
    let obj = err_string(ClassificationObjective::new(&features, &labels))?;
    let mut worst = 0.0f64;
    for i in hardest_samples(&model, &obj, GRADIENT_SAMPLES) {
        let params = busiest_params(&model, &obj, i);
        worst = worst.max(gradient_check_subset(&model, &obj, i, &params));
    }
    if worst < GRADIENT_TOLERANCE {
        Ok(format!("max relative error {worst:.2e}"))
    } else {
        Err(format!("max relative error {worst:.2e} >= {GRADIENT_TOLERANCE:e}"))
    }
}

fn check_attack_gradient(run: &Run) -> std::result::Result<String, String> {
    let Some(kind) = AttackKind::standard(run.config())
        .into_iter()
        .find(|k| matches!(k, AttackKind::SeqMia(_)))
    else {
        return Ok("no recurrent attack configured".into());
    };
    let name = kind.name();
    let record: AttackModelRecord = err_string(run.read_json(&format!("models/attack_{name}.json")))?;
    let rnn = err_string(run.read(&format!("models/attack_{name}.sqm")).and_then(|b| decode_rnn(&b)))?;
    let seqs = err_string(run.load_sequences())?;
    let mut inputs: Vec<Matrix> = Vec::new();
    let mut labels = Vec::new();
    for (seq, member) in seqs.target.iter() {
        let seq = err_string(seq.select(&record.metrics))?;
        inputs.push(err_string(record.normalizer.transform(&seq))?);
        labels.push(member as usize);
    }
    let obj = SequenceObjective {
        sequences: &inputs,
        labels: &labels,
    };
    let mut worst = 0.0f64;
    for i in hardest_samples(&rnn, &obj, GRADIENT_SAMPLES) {
        let params = busiest_params(&rnn, &obj, i);
        worst = worst.max(gradient_check_subset(&rnn, &obj, i, &params));
    }
    if worst < GRADIENT_TOLERANCE {
        Ok(format!("{name}: max relative error {worst:.2e}"))
    } else {
        Err(format!("{name}: max relative error {worst:.2e} >= {GRADIENT_TOLERANCE:e}"))
    }
}

/// Runs every check against `run`. Individual failures are reported in the
/// table rather than as an error.
pub fn verify_run(run: &Run) -> VerifyReport {
    let mut report = VerifyReport::default();
    report.push("artifact hashes", check_integrity(run));
    report.push("stages current", check_current(run));
    if !report.passed() {
        return report;
    }
    report.push("sequence shapes", check_sequences(run));
    report.push("roc recomputation", check_roc(run));
    report.push("target gradient", check_target_gradient(run));
    report.push("attack gradient", check_attack_gradient(run));
    report
}
