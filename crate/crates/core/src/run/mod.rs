//! Persistent, staged runs. Each stage reads the artifacts of the stages it
//! depends on, verifies their hashes, and records its own outputs in the
//! run manifest. A stage whose inputs are unchanged is not re-run.

mod store;
mod verify;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::attacks::{attention_csv, parse_scores_csv, scores_csv, AttackScore, Normalizer};
use crate::config::{RunConfig, StageSeeds};
use crate::data::{load_csv, DataSplits, DatasetManifest};
use crate::error::{Error, Result};
use crate::eval::ablation::run_ablation;
use crate::eval::{ablation_csv, roc_csv, AblationGrid, AblationRow};
use crate::experiment::{
    build_attack_sequences, distill_models, evaluate_attack, prepare_data, run_attack, signal_summary, train_models,
    AttackEvaluation, AttackKind, AttackRun, AttackSequences, ExperimentData, ModelSummary, SignalSummary,
};
use crate::nn::{decode_mlp, encode_mlp, encode_rnn, MlpModel};
use crate::pipeline::{read_series, series_files, Origin, SnapshotManifest, SnapshotSeries};
use crate::signals::{MetricSet, SequenceSet};

pub use store::{
    list_files, sha256_hex, write_atomic, Manifest, RunLock, RunStore, StageRecord, CONFIG_FILE, LOCK_FILE,
    MANIFEST_FILE, RUNS_ENV,
};
pub use verify::{verify_run, VerifyCheck, VerifyReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Stage {
    Generate,
    Train,
    Distill,
    Sequences,
    Attack,
    Evaluate,
    Ablate,
    Report,
}

impl Stage {
    pub const ALL: [Stage; 8] = [
        Stage::Generate,
        Stage::Train,
        Stage::Distill,
        Stage::Sequences,
        Stage::Attack,
        Stage::Evaluate,
        Stage::Ablate,
        Stage::Report,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Generate => "generate",
            Stage::Train => "train",
            Stage::Distill => "distill",
            Stage::Sequences => "sequences",
            Stage::Attack => "attack",
            Stage::Evaluate => "evaluate",
            Stage::Ablate => "ablate",
            Stage::Report => "report",
        }
    }

    pub fn deps(self) -> &'static [Stage] {
        match self {
            Stage::Generate | Stage::Ablate => &[],
            Stage::Train => &[Stage::Generate],
            Stage::Distill => &[Stage::Generate, Stage::Train],
            Stage::Sequences => &[Stage::Generate, Stage::Distill],
            Stage::Attack => &[Stage::Generate, Stage::Distill, Stage::Sequences],
            Stage::Evaluate => &[Stage::Train, Stage::Sequences, Stage::Attack],
            Stage::Report => &[Stage::Evaluate],
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Stage {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|st| st.as_str() == s)
            .ok_or_else(|| Error::InvalidConfig(vec![format!("unknown stage {s:?}")]))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StageOutcome {
    Ran,
    Cached,
}

/// Accuracy record written by the train stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainRecord {
    pub summary: ModelSummary,
    pub target_epoch_losses: Vec<f64>,
    pub shadow_epoch_losses: Vec<f64>,
}

/// Recurrent attack metadata stored next to its weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackModelRecord {
    pub name: String,
    pub metrics: MetricSet,
    pub steps: usize,
    pub normalizer: Normalizer,
    pub epoch_losses: Vec<f64>,
}

/// Output of the evaluate stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationRecord {
    pub models: ModelSummary,
    pub evaluations: Vec<AttackEvaluation>,
    pub signals: SignalSummary,
}

/// Condensed per-attack figures for the run summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackSummary {
    pub name: String,
    pub auc: f64,
    pub balanced_accuracy: f64,
    pub calibrated_balanced_accuracy: f64,
    #[serde(with = "crate::serde_float")]
    pub calibrated_threshold: f64,
    pub tpr_at_fpr: Vec<(f64, f64)>,
    pub n_members: usize,
    pub n_nonmembers: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub run_id: String,
    pub config_hash: String,
    pub dataset_hash: Option<String>,
    pub seeds: StageSeeds,
    pub config: RunConfig,
    pub models: ModelSummary,
    pub attacks: Vec<AttackSummary>,
    pub signals: SignalSummary,
    pub ablation: Vec<AblationRow>,
    /// Stage name to `(artifact, sha256)` for every stage the report covers.
    pub artifacts: BTreeMap<String, BTreeMap<String, String>>,
}

pub(crate) const DATASET: &str = "data/dataset.csv";
pub(crate) const AUXILIARY: &str = "data/auxiliary.csv";
pub(crate) const SPLITS: &str = "data/splits.json";
pub(crate) const DATASET_MANIFEST: &str = "data/dataset.json";
pub(crate) const TARGET_MODEL: &str = "models/target.sqm";
pub(crate) const SHADOW_MODEL: &str = "models/shadow.sqm";
pub(crate) const TRAIN_RECORD: &str = "models/train.json";
pub(crate) const SNAPSHOT_MANIFEST: &str = "snapshots/manifest.json";
pub(crate) const SHADOW_SEQUENCES: &str = "sequences/shadow.sqs";
pub(crate) const TARGET_SEQUENCES: &str = "sequences/target.sqs";
pub(crate) const TARGET_SEQUENCES_CSV: &str = "sequences/target.csv";
pub(crate) const ATTENTION: &str = "scores/attention.csv";
pub(crate) const EVALUATION: &str = "reports/evaluation.json";
pub(crate) const ABLATION: &str = "reports/ablation.csv";
pub(crate) const ABLATION_JSON: &str = "reports/ablation.json";
pub(crate) const REPORT_MD: &str = "reports/report.md";
pub(crate) const SUMMARY: &str = "reports/summary.json";

pub(crate) fn scores_path(name: &str, origin: Origin) -> String {
    format!("scores/{name}.{}.csv", origin.as_str())
}

pub(crate) fn roc_path(name: &str) -> String {
    format!("reports/roc/{name}.csv")
}

fn snapshot_path(origin: Origin, file: &str) -> String {
    format!("snapshots/{}/{file}", origin.as_str())
}

fn json<T: Serialize>(value: &T) -> Vec<u8> {
    let mut v = serde_json::to_vec_pretty(value).expect("serialisable");
    v.push(b'\n');
    v
}

type Files = Vec<(String, Vec<u8>)>;

/// An open run directory holding the writer lock.
#[derive(Debug)]
pub struct Run {
    dir: std::path::PathBuf,
    cfg: RunConfig,
    manifest: Manifest,
    _lock: RunLock,
}

impl Run {
    /// Opens (creating if needed) `run_id` with `cfg`.
    pub fn open(store: &RunStore, run_id: &str, cfg: RunConfig) -> Result<Self> {
        cfg.validate()?;
        let dir = store.run_dir(run_id)?;
        let lock = RunLock::acquire(&dir)?;
        let text = cfg.to_toml_string();
        let config_hash = sha256_hex(text.as_bytes());
        let mut manifest = match std::fs::read(dir.join(MANIFEST_FILE)) {
            Ok(bytes) => serde_json::from_slice::<Manifest>(&bytes)?,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Manifest::new(run_id, config_hash.clone()),
            Err(e) => return Err(Error::io(dir.join(MANIFEST_FILE), e)),
        };
        if manifest.run_id != run_id {
            return Err(Error::Verification(format!(
                "manifest in {} belongs to run {:?}",
                dir.display(),
                manifest.run_id
            )));
        }
        manifest.config_hash = config_hash;
        write_atomic(&dir.join(CONFIG_FILE), text.as_bytes())?;
        let run = Self {
            dir,
            cfg,
            manifest,
            _lock: lock,
        };
        run.save_manifest()?;
        Ok(run)
    }

    /// Opens an existing run with the configuration stored in it.
    pub fn open_existing(store: &RunStore, run_id: &str) -> Result<Self> {
        let path = store.run_dir(run_id)?.join(CONFIG_FILE);
        if !path.exists() {
            return Err(Error::MissingStage {
                stage: Stage::Generate.to_string(),
            });
        }
        let cfg = RunConfig::load(&path)?;
        Self::open(store, run_id, cfg)
    }

    pub fn dir(&self) -> &std::path::Path {
        &self.dir
    }

    pub fn config(&self) -> &RunConfig {
        &self.cfg
    }

    pub fn manifest(&self) -> &Manifest {
        &self.manifest
    }

    fn save_manifest(&self) -> Result<()> {
        write_atomic(&self.dir.join(MANIFEST_FILE), &self.manifest.to_bytes())
    }

    fn deps_of(&self, stage: Stage) -> Vec<Stage> {
        let mut d = stage.deps().to_vec();
        if stage == Stage::Report && self.manifest.stages.contains_key(Stage::Ablate.as_str()) {
            d.push(Stage::Ablate);
        }
        d
    }

    /// Hash over the stage name, the configuration and every dependency's
    /// record.
    pub fn input_hash(&self, stage: Stage) -> String {
        let mut h = Sha256::new();
        h.update(b"stage\0");
        h.update(stage.as_str());
        h.update(b"\0config\0");
        h.update(&self.manifest.config_hash);
        for dep in self.deps_of(stage) {
            h.update(b"\0dep\0");
            h.update(dep.as_str());
            if let Some(r) = self.manifest.stages.get(dep.as_str()) {
                h.update(&r.input_hash);
                for (path, hash) in &r.artifacts {
                    h.update(path);
                    h.update(hash);
                }
            }
        }
        hex::encode(h.finalize())
    }

    fn check_artifacts(&self, record: &StageRecord) -> Result<()> {
        for (path, expected) in &record.artifacts {
            let full = self.dir.join(path);
            let bytes = std::fs::read(&full).map_err(|e| Error::io(&full, e))?;
            let found = sha256_hex(&bytes);
            if &found != expected {
                return Err(Error::HashMismatch {
                    path: path.clone(),
                    expected: expected.clone(),
                    found,
                });
            }
        }
        Ok(())
    }

    /// Errors unless `stage` and everything it depends on are recorded,
    /// up to date, and intact on disk.
    pub fn ensure_current(&self, stage: Stage) -> Result<()> {
        for dep in self.deps_of(stage) {
            self.ensure_current(dep)?;
        }
        let record = self
            .manifest
            .stages
            .get(stage.as_str())
            .ok_or_else(|| Error::MissingStage {
                stage: stage.to_string(),
            })?;
        if record.input_hash != self.input_hash(stage) {
            return Err(Error::StaleStage {
                stage: stage.to_string(),
            });
        }
        self.check_artifacts(record)
    }

    fn read(&self, rel: &str) -> Result<Vec<u8>> {
        let p = self.dir.join(rel);
        std::fs::read(&p).map_err(|e| Error::io(&p, e))
    }

    fn read_json<T: serde::de::DeserializeOwned>(&self, rel: &str) -> Result<T> {
        Ok(serde_json::from_slice(&self.read(rel)?)?)
    }

    fn has_artifact(&self, stage: Stage, rel: &str) -> bool {
        self.manifest
            .stages
            .get(stage.as_str())
            .is_some_and(|r| r.artifacts.contains_key(rel))
    }

    /// Runs one stage, or logs it as cached when its inputs are unchanged
    /// and its artifacts intact.
    pub fn run_stage(&mut self, stage: Stage) -> Result<StageOutcome> {
        for dep in self.deps_of(stage) {
            self.ensure_current(dep)?;
        }
        if self.ensure_current(stage).is_ok() {
            log::info!("{stage}: cached");
            return Ok(StageOutcome::Cached);
        }
        log::info!("{stage}: running");
        let input_hash = self.input_hash(stage);
        if let Some(old) = self.manifest.stages.remove(stage.as_str()) {
            for path in old.artifacts.keys() {
                let _ = std::fs::remove_file(self.dir.join(path));
            }
            self.save_manifest()?;
        }
        let files = self.execute(stage)?;
        let mut artifacts = BTreeMap::new();
        for (rel, bytes) in files {
            write_atomic(&self.dir.join(&rel), &bytes)?;
            artifacts.insert(rel, sha256_hex(&bytes));
        }
        self.manifest
            .stages
            .insert(stage.as_str().to_string(), StageRecord { input_hash, artifacts });
        self.save_manifest()?;
        Ok(StageOutcome::Ran)
    }

    /// Every stage in order; ablation only when axes are configured.
    pub fn run_all(&mut self) -> Result<Vec<(Stage, StageOutcome)>> {
        let mut out = Vec::new();
        for stage in Stage::ALL {
            if stage == Stage::Ablate && self.cfg.eval.ablation.axes.is_empty() {
                continue;
            }
            out.push((stage, self.run_stage(stage)?));
        }
        Ok(out)
    }

    fn execute(&mut self, stage: Stage) -> Result<Files> {
        match stage {
            Stage::Generate => self.stage_generate(),
            Stage::Train => self.stage_train(),
            Stage::Distill => self.stage_distill(),
            Stage::Sequences => self.stage_sequences(),
            Stage::Attack => self.stage_attack(),
            Stage::Evaluate => self.stage_evaluate(),
            Stage::Ablate => self.stage_ablate(),
            Stage::Report => self.stage_report(),
        }
    }

    fn stage_generate(&mut self) -> Result<Files> {
        let data = prepare_data(&self.cfg)?;
        let mut files = vec![(DATASET.to_string(), crate::data::csv_string(&data.primary).into_bytes())];
        if let Some(aux) = &data.auxiliary {
            files.push((AUXILIARY.to_string(), crate::data::csv_string(aux).into_bytes()));
        }
        files.push((SPLITS.to_string(), json(&data.splits)));
        let dm = DatasetManifest::new(&data.primary, self.cfg.seeds().dataset, self.cfg.split_spec());
        files.push((DATASET_MANIFEST.to_string(), json(&dm)));
        self.manifest.dataset_hash = Some(data.primary.content_hash());
        Ok(files)
    }

    pub(crate) fn load_data(&self) -> Result<ExperimentData> {
        let primary = load_csv(&self.dir.join(DATASET))?;
        let auxiliary = if self.has_artifact(Stage::Generate, AUXILIARY) {
            Some(load_csv(&self.dir.join(AUXILIARY))?)
        } else {
            None
        };
        let splits: DataSplits = self.read_json(SPLITS)?;
        Ok(ExperimentData {
            primary,
            auxiliary,
            splits,
        })
    }

    fn stage_train(&mut self) -> Result<Files> {
        let data = self.load_data()?;
        let models = train_models(&self.cfg, &data)?;
        let record = TrainRecord {
            summary: ModelSummary::new(&models),
            target_epoch_losses: models.target.epoch_losses.clone(),
            shadow_epoch_losses: models.shadow.epoch_losses.clone(),
        };
        Ok(vec![
            (TARGET_MODEL.into(), encode_mlp(&models.target.model)),
            (SHADOW_MODEL.into(), encode_mlp(&models.shadow.model)),
            (TRAIN_RECORD.into(), json(&record)),
        ])
    }

    pub(crate) fn load_model(&self, rel: &str) -> Result<MlpModel> {
        decode_mlp(&self.read(rel)?)
    }

    fn stage_distill(&mut self) -> Result<Files> {
        let data = self.load_data()?;
        let target = self.load_model(TARGET_MODEL)?;
        let shadow = self.load_model(SHADOW_MODEL)?;
        let (ts, ss) = distill_models(&self.cfg, &data, &target, &shadow)?;
        let seeds = self.cfg.seeds();
        let sm = SnapshotManifest {
            run_id: self.manifest.run_id.clone(),
            dataset_hash: self.manifest.dataset_hash.clone().unwrap_or_default(),
            target_seed: seeds.target,
            shadow_seed: seeds.shadow,
            distill: self.cfg.distill_config(),
            files_per_series: ts.len(),
        };
        let mut files = vec![(SNAPSHOT_MANIFEST.to_string(), json(&sm))];
        for series in [&ts, &ss] {
            for (name, bytes) in series_files(series) {
                files.push((snapshot_path(series.origin(), &name), bytes));
            }
        }
        Ok(files)
    }

    pub(crate) fn load_series(&self) -> Result<(SnapshotSeries, SnapshotSeries)> {
        let sm: SnapshotManifest = self.read_json(SNAPSHOT_MANIFEST)?;
        let load = |o: Origin| read_series(&self.dir.join("snapshots").join(o.as_str()), sm.files_per_series, o);
        Ok((load(Origin::Target)?, load(Origin::Shadow)?))
    }

    fn stage_sequences(&mut self) -> Result<Files> {
        let data = self.load_data()?;
        let (ts, ss) = self.load_series()?;
        let seqs = build_attack_sequences(&self.cfg, &data, &ts, &ss)?;
        Ok(vec![
            (SHADOW_SEQUENCES.into(), seqs.shadow.encode()?),
            (TARGET_SEQUENCES.into(), seqs.target.encode()?),
            (TARGET_SEQUENCES_CSV.into(), seqs.target.csv_string()?.into_bytes()),
        ])
    }

    pub(crate) fn load_sequences(&self) -> Result<AttackSequences> {
        Ok(AttackSequences {
            shadow: SequenceSet::decode(&self.read(SHADOW_SEQUENCES)?)?,
            target: SequenceSet::decode(&self.read(TARGET_SEQUENCES)?)?,
        })
    }

    fn stage_attack(&mut self) -> Result<Files> {
        let data = self.load_data()?;
        let (ts, ss) = self.load_series()?;
        let seqs = self.load_sequences()?;
        let mut files = Vec::new();
        let mut attention = None;
        for kind in AttackKind::standard(&self.cfg) {
            log::info!("attack {kind}");
            let run = run_attack(&self.cfg, &kind, &data, &ts, &ss, &seqs)?;
            files.push((
                scores_path(&run.name, Origin::Shadow),
                scores_csv(&run.name, &run.shadow_scores, &run.shadow_truth)?.into_bytes(),
            ));
            files.push((
                scores_path(&run.name, Origin::Target),
                scores_csv(&run.name, &run.target_scores, &run.target_truth)?.into_bytes(),
            ));
            if let Some(model) = &run.model {
                let record = AttackModelRecord {
                    name: run.name.clone(),
                    metrics: model.metrics.clone(),
                    steps: model.steps,
                    normalizer: model.normalizer.clone(),
                    epoch_losses: model.epoch_losses.clone(),
                };
                files.push((format!("models/attack_{}.sqm", run.name), encode_rnn(&model.rnn)));
                files.push((format!("models/attack_{}.json", run.name), json(&record)));
                if attention.is_none() {
                    attention = Some(attention_csv(&run.target_scores, &run.target_truth)?);
                }
            }
        }
        if let Some(a) = attention {
            files.push((ATTENTION.into(), a.into_bytes()));
        }
        Ok(files)
    }

    /// Scores of one attack as persisted by the attack stage.
    pub(crate) fn load_attack_run(&self, name: &str) -> Result<AttackRun> {
        let load = |o: Origin| -> Result<(Vec<AttackScore>, Vec<bool>)> {
            let text = String::from_utf8(self.read(&scores_path(name, o))?)
                .map_err(|e| Error::Format(e.to_string()))?;
            let rows = parse_scores_csv(&text)?;
            Ok(rows
                .into_iter()
                .map(|r| {
                    (
                        AttackScore {
                            sample_id: r.sample_id,
                            score: r.score,
                            attention: Vec::new(),
                        },
                        r.member,
                    )
                })
                .unzip())
        };
        let (shadow_scores, shadow_truth) = load(Origin::Shadow)?;
        let (target_scores, target_truth) = load(Origin::Target)?;
        Ok(AttackRun {
            name: name.to_string(),
            shadow_scores,
            shadow_truth,
            target_scores,
            target_truth,
            model: None,
        })
    }

    pub(crate) fn evaluate_from_disk(&self) -> Result<EvaluationRecord> {
        let train: TrainRecord = self.read_json(TRAIN_RECORD)?;
        let seqs = self.load_sequences()?;
        let mut evaluations = Vec::new();
        for kind in AttackKind::standard(&self.cfg) {
            let run = self.load_attack_run(&kind.name())?;
            evaluations.push(evaluate_attack(&run, &self.cfg.eval.fpr_levels)?);
        }
        Ok(EvaluationRecord {
            models: train.summary,
            evaluations,
            signals: signal_summary(&seqs.target)?,
        })
    }

    fn stage_evaluate(&mut self) -> Result<Files> {
        let record = self.evaluate_from_disk()?;
        let mut files: Files = record
            .evaluations
            .iter()
            .map(|e| (roc_path(&e.name), roc_csv(&e.report).into_bytes()))
            .collect();
        files.push((EVALUATION.into(), json(&record)));
        Ok(files)
    }

    fn stage_ablate(&mut self) -> Result<Files> {
        let mut rows = Vec::new();
        for &axis in &self.cfg.eval.ablation.axes {
            let grid = AblationGrid::new(axis, &self.cfg);
            rows.extend(run_ablation(&grid, &self.cfg));
        }
        Ok(vec![
            (ABLATION.into(), ablation_csv(&rows)?.into_bytes()),
            (ABLATION_JSON.into(), json(&rows)),
        ])
    }

    fn stage_report(&mut self) -> Result<Files> {
        let eval: EvaluationRecord = self.read_json(EVALUATION)?;
        let ablation: Vec<AblationRow> = if self.manifest.stages.contains_key(Stage::Ablate.as_str()) {
            self.read_json(ABLATION_JSON)?
        } else {
            Vec::new()
        };
        let attention = if self.has_artifact(Stage::Attack, ATTENTION) {
            Some(String::from_utf8_lossy(&self.read(ATTENTION)?).into_owned())
        } else {
            None
        };
        let artifacts = self
            .deps_of(Stage::Report)
            .into_iter()
            .flat_map(|s| {
                let mut v = vec![s];
                v.extend(s.deps());
                v
            })
            .chain(Stage::Evaluate.deps().iter().flat_map(|s| {
                let mut v = vec![*s];
                v.extend(s.deps());
                v
            }))
            .filter_map(|s| {
                self.manifest
                    .stages
                    .get(s.as_str())
                    .map(|r| (s.as_str().to_string(), r.artifacts.clone()))
            })
            .collect();
        let summary = RunSummary {
            run_id: self.manifest.run_id.clone(),
            config_hash: self.manifest.config_hash.clone(),
            dataset_hash: self.manifest.dataset_hash.clone(),
            seeds: self.cfg.seeds(),
            config: self.cfg.clone(),
            models: eval.models.clone(),
            attacks: eval
                .evaluations
                .iter()
                .map(|e| AttackSummary {
                    name: e.name.clone(),
                    auc: e.report.auc,
                    balanced_accuracy: e.report.balanced_accuracy,
                    calibrated_balanced_accuracy: e.calibrated_balanced_accuracy,
                    calibrated_threshold: e.calibrated_threshold,
                    tpr_at_fpr: e.report.tpr_at_fpr.clone(),
                    n_members: e.report.n_members,
                    n_nonmembers: e.report.n_nonmembers,
                })
                .collect(),
            signals: eval.signals.clone(),
            ablation,
            artifacts,
        };
        let md = render_report(&summary, attention.as_deref());
        Ok(vec![(SUMMARY.into(), json(&summary)), (REPORT_MD.into(), md.into_bytes())])
    }
}

fn pct(v: f64) -> String {
    format!("{:.2}%", v * 100.0)
}

fn render_report(s: &RunSummary, attention: Option<&str>) -> String {
    use std::fmt::Write as _;
    let mut out = String::new();
    let _ = writeln!(out, "# Membership inference report: {}\n", s.run_id);
    let _ = writeln!(out, "- config hash: `{}`", s.config_hash);
    if let Some(h) = &s.dataset_hash {
        let _ = writeln!(out, "- dataset hash: `{h}`");
    }
    let _ = writeln!(out, "- master seed: {}\n", s.config.seeds.master);
    let m = &s.models;
    let _ = writeln!(out, "## Models\n");
    let _ = writeln!(out, "| model | train acc | test acc |\n|---|---|---|");
    let _ = writeln!(out, "| target | {:.4} | {:.4} |", m.target_train_accuracy, m.target_test_accuracy);
    let _ = writeln!(out, "| shadow | {:.4} | {:.4} |", m.shadow_train_accuracy, m.shadow_test_accuracy);
    let _ = writeln!(out, "\nOverfitting level: {:.4}\n", m.overfitting_level);
    let _ = writeln!(out, "## Attacks\n");
    let levels: Vec<f64> = s.attacks.first().map(|a| a.tpr_at_fpr.iter().map(|p| p.0).collect()).unwrap_or_default();
    let mut header = "| attack | AUC | balanced acc (oracle-threshold) | balanced acc (shadow-calibrated) |".to_string();
    let mut rule = "|---|---|---|---|".to_string();
    for l in &levels {
        let _ = write!(header, " TPR@{} FPR |", pct(*l));
        rule.push_str("---|");
    }
    let _ = writeln!(out, "{header}\n{rule}");
    for a in &s.attacks {
        let mut row = format!(
            "| {} | {:.4} | {:.4} | {:.4} |",
            a.name, a.auc, a.balanced_accuracy, a.calibrated_balanced_accuracy
        );
        for (_, t) in &a.tpr_at_fpr {
            let _ = write!(row, " {} |", pct(*t));
        }
        let _ = writeln!(out, "{row}");
    }
    let _ = writeln!(out, "\n## Signal statistics (target sequences)\n");
    let _ = writeln!(out, "| metric | CLFA members | CLFA non-members | decline members | decline non-members |");
    let _ = writeln!(out, "|---|---|---|---|---|");
    let (mem, non) = (&s.signals.members, &s.signals.nonmembers);
    for (i, metric) in mem.metrics.iter().enumerate() {
        let _ = writeln!(
            out,
            "| {metric} | {:.4} | {:.4} | {:.4} | {:.4} |",
            mem.mean_clfa[i], non.mean_clfa[i], mem.mean_decline_rate[i], non.mean_decline_rate[i]
        );
    }
    let _ = writeln!(out, "\nMean |corr| between metric rows, members / non-members:\n");
    let k = mem.metrics.len();
    let mut header = "| |".to_string();
    for m in &mem.metrics {
        let _ = write!(header, " {m} |");
    }
    let _ = writeln!(out, "{header}\n|---|{}", "---|".repeat(k));
    for i in 0..k {
        let mut row = format!("| {} |", mem.metrics[i]);
        for j in 0..k {
            let _ = write!(row, " {:.3} / {:.3} |", mem.mean_abs_corr[i * k + j], non.mean_abs_corr[i * k + j]);
        }
        let _ = writeln!(out, "{row}");
    }
    if let Some(a) = attention {
        let _ = writeln!(out, "\n## Attention per timestep\n\n```csv\n{}```", a);
    }
    if !s.ablation.is_empty() {
        let _ = writeln!(out, "\n## Ablations\n");
        let _ = writeln!(
            out,
            "| axis | value | attack | TPR@0.1% FPR | TPR@1% FPR | balanced acc | AUC | overfitting | error |"
        );
        let _ = writeln!(out, "|---|---|---|---|---|---|---|---|---|");
        for r in &s.ablation {
            let _ = writeln!(
                out,
                "| {} | {} | {} | {} | {} | {:.4} | {:.4} | {:.4} | {} |",
                r.axis,
                r.value,
                r.attack,
                pct(r.tpr_at_0_1pct_fpr),
                pct(r.tpr_at_1pct_fpr),
                r.balanced_accuracy,
                r.auc,
                r.overfitting_level,
                r.error.as_deref().unwrap_or("")
            );
        }
    }
    out
}
