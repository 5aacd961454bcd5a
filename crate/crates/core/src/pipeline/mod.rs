//! Original-model training and snapshot distillation.

mod snapshots;

use serde::{Deserialize, Serialize};

use crate::data::{DataSplits, Dataset};
use crate::error::{Error, Result};
use crate::nn::{
    sgd_train, sgd_train_with_hook, Architecture, ClassificationObjective, DistillationObjective, Matrix,
    MlpModel, SgdConfig,
};
use crate::rng::derive_seed;

pub use snapshots::{read_series, series_files, SnapshotManifest};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Origin {
    Target,
    Shadow,
}

impl Origin {
    pub fn as_str(self) -> &'static str {
        match self {
            Origin::Target => "target",
            Origin::Shadow => "shadow",
        }
    }
}

/// Distilled checkpoints `s_1..s_n` followed by the original model.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotSeries {
    snapshots: Vec<MlpModel>,
    epochs: usize,
    origin: Origin,
}

impl SnapshotSeries {
    pub fn new(snapshots: Vec<MlpModel>, origin: Origin) -> Result<Self> {
        if snapshots.is_empty() {
            return Err(Error::Empty("snapshot series".into()));
        }
        let epochs = snapshots.len() - 1;
        Ok(Self {
            snapshots,
            epochs,
            origin,
        })
    }

    pub fn snapshots(&self) -> &[MlpModel] {
        &self.snapshots
    }

    /// Number of distillation epochs `n`; the series holds `n + 1` models.
    pub fn epochs(&self) -> usize {
        self.epochs
    }

    pub fn len(&self) -> usize {
        self.snapshots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snapshots.is_empty()
    }

    pub fn origin(&self) -> Origin {
        self.origin
    }

    pub fn original(&self) -> &MlpModel {
        self.snapshots.last().expect("non-empty")
    }

    pub fn last_distilled(&self) -> Option<&MlpModel> {
        (self.epochs > 0).then(|| &self.snapshots[self.epochs - 1])
    }
}

/// Distillation settings. The loss weight on soft labels is fixed at one, so
/// the student never sees ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistillConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub seed: u64,
    #[serde(default)]
    pub lr_decay: Option<f64>,
    #[serde(default = "one")]
    pub alpha: f64,
}

fn one() -> f64 {
    1.0
}

impl DistillConfig {
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.alpha != 1.0 {
            out.push(format!("distill.alpha must be 1.0, got {}", self.alpha));
        }
        let sgd = SgdConfig {
            epochs: self.epochs.max(1),
            ..self.sgd()
        };
        out.extend(sgd.violations().into_iter().map(|v| format!("distill.{v}")));
        out
    }

    fn sgd(&self) -> SgdConfig {
        SgdConfig {
            learning_rate: self.learning_rate,
            batch_size: self.batch_size,
            epochs: self.epochs,
            seed: derive_seed(self.seed, "distill-shuffle"),
            lr_decay: self.lr_decay,
        }
    }

    fn student_seed(&self) -> u64 {
        derive_seed(self.seed, "distill-init")
    }
}

/// A trained original (target or shadow) model with its accuracy record.
#[derive(Debug, Clone, PartialEq)]
pub struct OriginalModel {
    pub model: MlpModel,
    pub train_accuracy: f64,
    pub test_accuracy: f64,
    pub epoch_losses: Vec<f64>,
}

impl OriginalModel {
    /// Train minus test accuracy.
    pub fn overfitting_level(&self) -> f64 {
        self.train_accuracy - self.test_accuracy
    }
}

/// Trains an MLP of `arch` on `train` rows and scores it on `test` rows.
/// Initialisation and batch order both derive from `sgd.seed`.
pub fn train_original(
    dataset: &Dataset,
    train: &[usize],
    test: &[usize],
    arch: &Architecture,
    sgd: &SgdConfig,
) -> Result<OriginalModel> {
    sgd.validate()?;
    if train.is_empty() || test.is_empty() {
        return Err(Error::Empty("train or test split".into()));
    }
    check_input(arch, dataset)?;
    let train_set = dataset.subset(train);
    let test_set = dataset.subset(test);
    let model = MlpModel::new(arch.clone(), derive_seed(sgd.seed, "init"))?;
    let objective = ClassificationObjective::new(&train_set.features, &train_set.labels)?;
    let run = SgdConfig {
        seed: derive_seed(sgd.seed, "shuffle"),
        ..sgd.clone()
    };
    let outcome = sgd_train(model, &objective, &run)?;
    Ok(OriginalModel {
        train_accuracy: outcome.model.accuracy(&train_set.features, &train_set.labels)?,
        test_accuracy: outcome.model.accuracy(&test_set.features, &test_set.labels)?,
        model: outcome.model,
        epoch_losses: outcome.epoch_losses,
    })
}

fn check_input(arch: &Architecture, dataset: &Dataset) -> Result<()> {
    arch.validate()?;
    if arch.layer_dims[0] != dataset.dim() {
        return Err(Error::ArchitectureMismatch(format!(
            "model input dim {} but dataset has {} features",
            arch.layer_dims[0],
            dataset.dim()
        )));
    }
    if *arch.layer_dims.last().expect("validated") != dataset.num_classes {
        return Err(Error::ArchitectureMismatch(format!(
            "model has {} outputs but dataset has {} classes",
            arch.layer_dims.last().expect("validated"),
            dataset.num_classes
        )));
    }
    Ok(())
}

/// Distils `teacher` into a fresh student of `student_arch`, which must equal
/// the teacher's architecture. Only feature rows are passed in, so the
/// distillation set's labels cannot influence the result.
pub fn distill_with_snapshots(
    teacher: &MlpModel,
    student_arch: &Architecture,
    distill_features: &Matrix,
    cfg: &DistillConfig,
    origin: Origin,
) -> Result<SnapshotSeries> {
    if student_arch != teacher.architecture() {
        return Err(Error::ArchitectureMismatch(format!(
            "student {:?} differs from teacher {:?}",
            student_arch.layer_dims,
            teacher.layer_dims()
        )));
    }
    distill_cross_architecture(teacher, student_arch, distill_features, cfg, origin)
}

/// Distillation without the same-architecture requirement. Used by the
/// architecture-mismatch ablation; the final snapshot is still the teacher.
pub fn distill_cross_architecture(
    teacher: &MlpModel,
    student_arch: &Architecture,
    distill_features: &Matrix,
    cfg: &DistillConfig,
    origin: Origin,
) -> Result<SnapshotSeries> {
    let v = cfg.violations();
    if !v.is_empty() {
        return Err(Error::InvalidConfig(v));
    }
    if distill_features.rows() == 0 {
        return Err(Error::Empty("distillation set".into()));
    }
    if distill_features.cols() != teacher.input_dim() || student_arch.layer_dims[0] != teacher.input_dim() {
        return Err(Error::ArchitectureMismatch(
            "distillation features do not match the model input".into(),
        ));
    }
    if student_arch.layer_dims.last() != Some(&teacher.num_classes()) {
        return Err(Error::ArchitectureMismatch(
            "student and teacher disagree on the number of classes".into(),
        ));
    }
    let mut snapshots = Vec::with_capacity(cfg.epochs + 1);
    if cfg.epochs > 0 {
        let student = MlpModel::new(student_arch.clone(), cfg.student_seed())?;
        let objective = DistillationObjective {
            features: distill_features,
            teacher,
        };
        sgd_train_with_hook(student, &objective, &cfg.sgd(), |_, m| snapshots.push(m.clone()))?;
    }
    snapshots.push(teacher.clone());
    SnapshotSeries::new(snapshots, origin)
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub target: OriginalModel,
    pub shadow: OriginalModel,
    pub target_series: SnapshotSeries,
    pub shadow_series: SnapshotSeries,
}

/// Trains the target on `target_train` and the shadow on `shadow_train`, then
/// distils both on the shared distillation set with the same settings.
pub fn run_pipeline(
    dataset: &Dataset,
    splits: &DataSplits,
    arch: &Architecture,
    target_sgd: &SgdConfig,
    shadow_sgd: &SgdConfig,
    distill: &DistillConfig,
) -> Result<PipelineOutput> {
    let target = train_original(dataset, &splits.target_train, &splits.target_test, arch, target_sgd)?;
    let shadow = train_original(dataset, &splits.shadow_train, &splits.shadow_test, arch, shadow_sgd)?;
    let features = dataset.features.select_rows(&splits.distill);
    let target_series = distill_with_snapshots(&target.model, arch, &features, distill, Origin::Target)?;
    let shadow_series = distill_with_snapshots(&shadow.model, arch, &features, distill, Origin::Shadow)?;
    Ok(PipelineOutput {
        target,
        shadow,
        target_series,
        shadow_series,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_synthetic, split, SplitSpec};
    use crate::nn::{Activation, Parameters};

    fn small() -> (Dataset, DataSplits, Architecture) {
        let d = generate_synthetic(4, 24, 60, 0.25, 1).unwrap();
        let spec = SplitSpec {
            target_train: 40,
            target_test: 40,
            shadow_train: 40,
            shadow_test: 40,
            distill: 60,
            seed: 2,
        };
        let s = split(d.len(), &spec).unwrap();
        (d, s, Architecture::new(vec![24, 16, 4], Activation::Relu))
    }

    fn distill_cfg(epochs: usize) -> DistillConfig {
        DistillConfig {
            epochs,
            learning_rate: 0.1,
            batch_size: 8,
            seed: 5,
            lr_decay: None,
            alpha: 1.0,
        }
    }

    #[test]
    fn zero_epoch_budget_is_rejected() {
        let (d, s, arch) = small();
        let sgd = SgdConfig::new(0.1, 8, 0, 1);
        assert!(matches!(
            train_original(&d, &s.target_train, &s.target_test, &arch, &sgd),
            Err(Error::InvalidConfig(_))
        ));
    }

    #[test]
    fn training_is_seed_deterministic() {
        let (d, s, arch) = small();
        let sgd = SgdConfig::new(0.1, 8, 5, 1);
        let a = train_original(&d, &s.target_train, &s.target_test, &arch, &sgd).unwrap();
        let b = train_original(&d, &s.target_train, &s.target_test, &arch, &sgd).unwrap();
        assert_eq!(a.model.param_bytes(), b.model.param_bytes());
    }

    #[test]
    fn zero_distill_epochs_leave_only_the_teacher() {
        let (d, s, arch) = small();
        let t = train_original(&d, &s.target_train, &s.target_test, &arch, &SgdConfig::new(0.1, 8, 3, 1)).unwrap();
        let x = d.features.select_rows(&s.distill);
        let series = distill_with_snapshots(&t.model, &arch, &x, &distill_cfg(0), Origin::Target).unwrap();
        assert_eq!(series.len(), 1);
        assert_eq!(series.original(), &t.model);
    }

    #[test]
    fn series_has_n_plus_one_models_and_teacher_is_untouched() {
        let (d, s, arch) = small();
        let t = train_original(&d, &s.target_train, &s.target_test, &arch, &SgdConfig::new(0.1, 8, 3, 1)).unwrap();
        let before = t.model.param_bytes();
        let x = d.features.select_rows(&s.distill);
        let series = distill_with_snapshots(&t.model, &arch, &x, &distill_cfg(4), Origin::Shadow).unwrap();
        assert_eq!(series.len(), 5);
        assert_eq!(series.epochs(), 4);
        assert_eq!(series.original().param_bytes(), before);
        assert_ne!(series.snapshots()[0], series.snapshots()[1]);
    }

    #[test]
    fn mismatched_student_is_rejected() {
        let (d, s, arch) = small();
        let t = train_original(&d, &s.target_train, &s.target_test, &arch, &SgdConfig::new(0.1, 8, 1, 1)).unwrap();
        let x = d.features.select_rows(&s.distill);
        let other = Architecture::new(vec![24, 8, 4], Activation::Relu);
        assert!(matches!(
            distill_with_snapshots(&t.model, &other, &x, &distill_cfg(2), Origin::Target),
            Err(Error::ArchitectureMismatch(_))
        ));
        assert_eq!(
            distill_cross_architecture(&t.model, &other, &x, &distill_cfg(2), Origin::Target).unwrap().len(),
            3
        );
    }

    #[test]
    fn alpha_other_than_one_is_rejected() {
        let cfg = DistillConfig { alpha: 0.5, ..distill_cfg(2) };
        assert!(!cfg.violations().is_empty());
    }

    #[test]
    fn pipeline_series_have_equal_length() {
        let (d, s, arch) = small();
        let sgd = SgdConfig::new(0.1, 8, 3, 1);
        let out = run_pipeline(&d, &s, &arch, &sgd, &SgdConfig { seed: 2, ..sgd.clone() }, &distill_cfg(3)).unwrap();
        assert_eq!(out.target_series.len(), out.shadow_series.len());
        assert_eq!(out.target_series.len(), 4);
    }
}
