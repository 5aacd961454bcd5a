//! Run configuration. Parsed from TOML, validated as a whole before any
//! compute, with every stage seed derived from `seeds.master`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::attacks::{MlpAttackConfig, SeqMiaConfig};
use crate::data::SplitSpec;
use crate::error::{Error, Result};
use crate::eval::AblationAxis;
use crate::nn::{Activation, Architecture, SgdConfig};
use crate::pipeline::DistillConfig;
use crate::rng::derive_seed;
use crate::signals::{Metric, MetricSet};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seeds: SeedsSection,
    pub dataset: DatasetSection,
    pub model: ModelSection,
    pub distill: DistillSection,
    pub attack: AttackSection,
    #[serde(default)]
    pub eval: EvalSection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeedsSection {
    pub master: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DataSource {
    Synthetic,
    Csv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSection {
    pub source: DataSource,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    #[serde(default = "d_classes")]
    pub num_classes: usize,
    #[serde(default = "d_dim")]
    pub dim: usize,
    #[serde(default = "d_per_class")]
    pub per_class: usize,
    #[serde(default = "d_flip")]
    pub flip_prob: f64,
    /// Bit-flip rate of the adversary's data under the dataset-mismatch
    /// setting.
    #[serde(default = "d_aux_flip")]
    pub mismatch_flip_prob: f64,
    /// Shadow, shadow-test and distillation rows come from a differently
    /// distributed auxiliary dataset.
    #[serde(default)]
    pub mismatch: bool,
    /// Use only the first `train_size` rows of the target and shadow
    /// training splits.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train_size: Option<usize>,
    pub split: SplitSizes,
}

fn d_classes() -> usize {
    30
}
fn d_dim() -> usize {
    446
}
fn d_per_class() -> usize {
    167
}
fn d_flip() -> f64 {
    0.4
}
fn d_aux_flip() -> f64 {
    0.42
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitSizes {
    pub target_train: usize,
    pub target_test: usize,
    pub shadow_train: usize,
    pub shadow_test: usize,
    pub distill: usize,
}

impl SplitSizes {
    pub fn location() -> Self {
        let s = SplitSpec::location(0);
        Self {
            target_train: s.target_train,
            target_test: s.target_test,
            shadow_train: s.shadow_train,
            shadow_test: s.shadow_test,
            distill: s.distill,
        }
    }

    pub fn with_seed(&self, seed: u64) -> SplitSpec {
        SplitSpec {
            target_train: self.target_train,
            target_test: self.target_test,
            shadow_train: self.shadow_train,
            shadow_test: self.shadow_test,
            distill: self.distill,
            seed,
        }
    }
}

/// SGD settings without a seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lr_decay: Option<f64>,
}

impl TrainSection {
    pub fn new(learning_rate: f64, batch_size: usize, epochs: usize) -> Self {
        Self {
            learning_rate,
            batch_size,
            epochs,
            lr_decay: None,
        }
    }

    pub fn sgd(&self, seed: u64) -> SgdConfig {
        SgdConfig {
            learning_rate: self.learning_rate,
            batch_size: self.batch_size,
            epochs: self.epochs,
            seed,
            lr_decay: self.lr_decay,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub hidden: Vec<usize>,
    #[serde(default = "d_relu")]
    pub activation: Activation,
    pub sgd: TrainSection,
    /// Adversary architecture for the architecture-mismatch setting.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shadow: Option<ShadowArch>,
}

fn d_relu() -> Activation {
    Activation::Relu
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShadowArch {
    pub hidden: Vec<usize>,
    #[serde(default = "d_relu")]
    pub activation: Activation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistillSection {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lr_decay: Option<f64>,
    #[serde(default = "d_alpha")]
    pub alpha: f64,
    /// Use only the first `size` distillation rows.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub size: Option<usize>,
}

fn d_alpha() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttackSection {
    #[serde(default = "d_metrics")]
    pub metrics: MetricSet,
    #[serde(default = "d_true")]
    pub normalize: bool,
    #[serde(default = "d_64")]
    pub hidden_dim: usize,
    #[serde(default = "d_64")]
    pub attention_dim: usize,
    pub sgd: TrainSection,
    pub baseline: BaselineSection,
}

fn d_metrics() -> MetricSet {
    MetricSet::all()
}
fn d_true() -> bool {
    true
}
fn d_64() -> usize {
    64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaselineSection {
    #[serde(default = "d_baseline_hidden")]
    pub hidden: Vec<usize>,
    pub sgd: TrainSection,
}

fn d_baseline_hidden() -> Vec<usize> {
    vec![64, 32]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalSection {
    #[serde(default = "d_levels")]
    pub fpr_levels: Vec<f64>,
    #[serde(default)]
    pub ablation: AblationSection,
}

impl Default for EvalSection {
    fn default() -> Self {
        Self {
            fpr_levels: d_levels(),
            ablation: AblationSection::default(),
        }
    }
}

fn d_levels() -> Vec<f64> {
    crate::eval::DEFAULT_FPR_LEVELS.to_vec()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AblationSection {
    #[serde(default)]
    pub axes: Vec<AblationAxis>,
    #[serde(default = "d_distill_epochs")]
    pub distill_epochs: Vec<usize>,
    #[serde(default = "d_distill_size")]
    pub distill_size: Vec<usize>,
    #[serde(default = "d_train_size")]
    pub train_size: Vec<usize>,
}

impl Default for AblationSection {
    fn default() -> Self {
        Self {
            axes: Vec::new(),
            distill_epochs: d_distill_epochs(),
            distill_size: d_distill_size(),
            train_size: d_train_size(),
        }
    }
}

fn d_distill_epochs() -> Vec<usize> {
    vec![5, 30]
}
fn d_distill_size() -> Vec<usize> {
    vec![350, 700, 1400]
}
fn d_train_size() -> Vec<usize> {
    vec![200, 400, 800]
}

/// Seeds for every stage, derived from the master seed by label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageSeeds {
    pub dataset: u64,
    pub auxiliary: u64,
    pub split: u64,
    pub target: u64,
    pub shadow: u64,
    pub distill: u64,
    pub attack: u64,
    pub baseline: u64,
    pub shuffle: u64,
}

impl StageSeeds {
    pub fn derive(master: u64) -> Self {
        let d = |label| derive_seed(master, label);
        Self {
            dataset: d("dataset"),
            auxiliary: d("auxiliary-dataset"),
            split: d("split"),
            target: d("target"),
            shadow: d("shadow"),
            distill: d("distill"),
            attack: d("attack"),
            baseline: d("baseline"),
            shuffle: d("column-shuffle"),
        }
    }
}

impl RunConfig {
    /// Synthetic Location-like desk configuration.
    pub fn canonical(master: u64) -> Self {
        Self {
            seeds: SeedsSection { master },
            dataset: DatasetSection {
                source: DataSource::Synthetic,
                path: None,
                num_classes: d_classes(),
                dim: d_dim(),
                per_class: d_per_class(),
                flip_prob: d_flip(),
                mismatch_flip_prob: d_aux_flip(),
                mismatch: false,
                train_size: None,
                split: SplitSizes::location(),
            },
            model: ModelSection {
                hidden: vec![128],
                activation: Activation::Relu,
                sgd: TrainSection::new(0.05, 32, 100),
                shadow: None,
            },
            distill: DistillSection {
                epochs: 30,
                learning_rate: 0.1,
                batch_size: 32,
                lr_decay: None,
                alpha: 1.0,
                size: None,
            },
            attack: AttackSection {
                metrics: MetricSet::all(),
                normalize: true,
                hidden_dim: 64,
                attention_dim: 64,
                sgd: TrainSection::new(0.03, 16, 40),
                baseline: BaselineSection {
                    hidden: d_baseline_hidden(),
                    sgd: TrainSection::new(0.01, 16, 40),
                },
            },
            eval: EvalSection::default(),
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::InvalidConfig(vec![e.to_string()]))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config is always representable as TOML")
    }

    pub fn seeds(&self) -> StageSeeds {
        StageSeeds::derive(self.seeds.master)
    }

    pub fn split_spec(&self) -> SplitSpec {
        self.dataset.split.with_seed(self.seeds().split)
    }

    fn arch(&self, hidden: &[usize], activation: Activation, dim: usize, classes: usize) -> Architecture {
        let mut dims = vec![dim];
        dims.extend(hidden);
        dims.push(classes);
        Architecture::new(dims, activation)
    }

    pub fn target_arch(&self, dim: usize, classes: usize) -> Architecture {
        self.arch(&self.model.hidden, self.model.activation, dim, classes)
    }

    /// Architecture of the shadow model and of every distilled student.
    pub fn shadow_arch(&self, dim: usize, classes: usize) -> Architecture {
        match &self.model.shadow {
            Some(s) => self.arch(&s.hidden, s.activation, dim, classes),
            None => self.target_arch(dim, classes),
        }
    }

    pub fn target_sgd(&self) -> SgdConfig {
        self.model.sgd.sgd(self.seeds().target)
    }

    pub fn shadow_sgd(&self) -> SgdConfig {
        self.model.sgd.sgd(self.seeds().shadow)
    }

    /// Shared by the target and shadow distillations.
    pub fn distill_config(&self) -> DistillConfig {
        DistillConfig {
            epochs: self.distill.epochs,
            learning_rate: self.distill.learning_rate,
            batch_size: self.distill.batch_size,
            seed: self.seeds().distill,
            lr_decay: self.distill.lr_decay,
            alpha: self.distill.alpha,
        }
    }

    pub fn seqmia_config(&self) -> SeqMiaConfig {
        SeqMiaConfig {
            hidden_dim: self.attack.hidden_dim,
            attention_dim: self.attack.attention_dim,
            normalize: self.attack.normalize,
            sgd: self.attack.sgd.sgd(self.seeds().attack),
        }
    }

    pub fn baseline_config(&self) -> MlpAttackConfig {
        MlpAttackConfig {
            hidden: self.attack.baseline.hidden.clone(),
            activation: Activation::Relu,
            sgd: self.attack.baseline.sgd.sgd(self.seeds().baseline),
        }
    }

    /// Every problem with the configuration; empty when valid.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        let ds = &self.dataset;
        match ds.source {
            DataSource::Csv if ds.path.is_none() => out.push("dataset.path is required for csv sources".into()),
            DataSource::Csv if ds.mismatch => out.push("dataset.mismatch needs a synthetic source".into()),
            DataSource::Synthetic => {
                if ds.num_classes < 2 {
                    out.push("dataset.num_classes must be at least 2".into());
                }
                if ds.dim < ds.num_classes {
                    out.push(format!(
                        "dataset.dim ({}) must be at least num_classes ({})",
                        ds.dim, ds.num_classes
                    ));
                }
                if ds.per_class == 0 {
                    out.push("dataset.per_class must be at least 1".into());
                }
                for (name, p) in [("flip_prob", ds.flip_prob), ("mismatch_flip_prob", ds.mismatch_flip_prob)] {
                    if !(0.0..0.5).contains(&p) {
                        out.push(format!("dataset.{name} must lie in [0, 0.5), got {p}"));
                    }
                }
                let rows = ds.num_classes * ds.per_class;
                let needed = self.split_spec().total();
                if needed > rows {
                    out.push(format!("dataset.split needs {needed} rows but the generator yields {rows}"));
                }
            }
            DataSource::Csv => {}
        }
        if let Some(m) = ds.train_size {
            let max = ds.split.target_train.min(ds.split.shadow_train);
            if m == 0 || m > max {
                out.push(format!("dataset.train_size must lie in 1..={max}, got {m}"));
            }
        }
        out.extend(self.split_spec().violations().into_iter().map(|v| format!("dataset.{v}")));
        if self.model.hidden.contains(&0) {
            out.push("model.hidden widths must be at least 1".into());
        }
        if let Some(s) = &self.model.shadow {
            if s.hidden.contains(&0) {
                out.push("model.shadow.hidden widths must be at least 1".into());
            }
        }
        out.extend(self.target_sgd().violations().into_iter().map(|v| format!("model.sgd.{v}")));
        out.extend(self.distill_config().violations());
        if let Some(size) = self.distill.size {
            if size == 0 || size > ds.split.distill {
                out.push(format!("distill.size must lie in 1..={}, got {size}", ds.split.distill));
            }
        }
        out.extend(self.seqmia_config().violations().into_iter().map(|v| format!("attack.{v}")));
        out.extend(
            self.baseline_config()
                .violations()
                .into_iter()
                .map(|v| format!("attack.baseline.{v}")),
        );
        if self.eval.fpr_levels.iter().any(|l| !(0.0..=1.0).contains(l)) {
            out.push("eval.fpr_levels must lie in [0, 1]".into());
        }
        let ab = &self.eval.ablation;
        if ab.distill_size.iter().any(|&s| s == 0 || s > ds.split.distill) {
            out.push(format!("eval.ablation.distill_size entries must lie in 1..={}", ds.split.distill));
        }
        let max_train = ds.split.target_train.min(ds.split.shadow_train);
        if ab.train_size.iter().any(|&s| s == 0 || s > max_train) {
            out.push(format!("eval.ablation.train_size entries must lie in 1..={max_train}"));
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(v))
        }
    }

    /// Metric set of the loss-only sequence attack.
    pub fn loss_metrics() -> MetricSet {
        MetricSet::single(Metric::Loss)
    }
}
