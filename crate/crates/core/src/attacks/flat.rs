use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::attacks::{check_both_classes, member_probability, AttackExample, AttackScore, STD_FLOOR};
use crate::error::{Error, Result};
use crate::nn::{sgd_train, Activation, Architecture, ClassificationObjective, Matrix, MlpModel, SgdConfig};
use crate::rng::{derive_seed, rng_from_seed};
use crate::signals::MetricSequenceMatrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MlpAttackConfig {
    #[serde(default = "default_hidden")]
    pub hidden: Vec<usize>,
    #[serde(default = "default_activation")]
    pub activation: Activation,
    pub sgd: SgdConfig,
}

fn default_hidden() -> Vec<usize> {
    vec![64, 32]
}

fn default_activation() -> Activation {
    Activation::Relu
}

impl MlpAttackConfig {
    pub fn new(sgd: SgdConfig) -> Self {
        Self {
            hidden: default_hidden(),
            activation: default_activation(),
            sgd,
        }
    }

    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.hidden.contains(&0) {
            out.push("hidden layer widths must be at least 1".into());
        }
        out.extend(self.sgd.violations());
        out
    }
}

/// Binary MLP classifier over fixed-length feature vectors with a
/// per-column standard scaler.
#[derive(Debug, Clone, PartialEq)]
pub struct FlatMlpAttack {
    pub mlp: MlpModel,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub epoch_losses: Vec<f64>,
}

impl FlatMlpAttack {
    pub fn train(features: &Matrix, members: &[bool], cfg: &MlpAttackConfig) -> Result<Self> {
        let mlp = Self::init(features.cols(), cfg)?;
        Self::train_from(mlp, features, members, cfg)
    }

    /// Freshly initialised network for `dim` inputs.
    pub fn init(dim: usize, cfg: &MlpAttackConfig) -> Result<MlpModel> {
        let v = cfg.violations();
        if !v.is_empty() {
            return Err(Error::InvalidConfig(v));
        }
        let mut dims = vec![dim];
        dims.extend(&cfg.hidden);
        dims.push(2);
        MlpModel::new(Architecture::new(dims, cfg.activation), derive_seed(cfg.sgd.seed, "attack-init"))
    }

    /// Trains starting from the supplied network.
    pub fn train_from(mlp: MlpModel, features: &Matrix, members: &[bool], cfg: &MlpAttackConfig) -> Result<Self> {
        if features.rows() != members.len() {
            return Err(Error::Shape(format!(
                "{} feature rows but {} labels",
                features.rows(),
                members.len()
            )));
        }
        if features.rows() == 0 {
            return Err(Error::Empty("attack training set".into()));
        }
        check_both_classes(members.iter().copied())?;
        let (rows, cols) = features.shape();
        let n = rows as f64;
        let mut mean = vec![0.0; cols];
        let mut sq = vec![0.0; cols];
        for row in features.row_iter() {
            for (j, v) in row.iter().enumerate() {
                mean[j] += v;
                sq[j] += v * v;
            }
        }
        for j in 0..cols {
            mean[j] /= n;
            sq[j] = (sq[j] / n - mean[j] * mean[j]).max(0.0).sqrt().max(STD_FLOOR);
        }
        let mut this = Self {
            mlp,
            mean,
            std: sq,
            epoch_losses: Vec::new(),
        };
        let scaled = this.scale(features)?;
        let labels: Vec<usize> = members.iter().map(|&m| m as usize).collect();
        let objective = ClassificationObjective::new(&scaled, &labels)?;
        let sgd = SgdConfig {
            seed: derive_seed(cfg.sgd.seed, "attack-shuffle"),
            ..cfg.sgd.clone()
        };
        let out = sgd_train(this.mlp.clone(), &objective, &sgd)?;
        this.mlp = out.model;
        this.epoch_losses = out.epoch_losses;
        Ok(this)
    }

    fn scale(&self, features: &Matrix) -> Result<Matrix> {
        if features.cols() != self.mean.len() {
            return Err(Error::Shape(format!(
                "{} features, attack expects {}",
                features.cols(),
                self.mean.len()
            )));
        }
        let mut out = features.clone();
        for r in 0..out.rows() {
            for (j, v) in out.row_mut(r).iter_mut().enumerate() {
                *v = (*v - self.mean[j]) / self.std[j];
            }
        }
        Ok(out)
    }

    pub fn score(&self, features: &Matrix) -> Result<Vec<f64>> {
        let logits = self.mlp.forward(&self.scale(features)?)?;
        Ok(logits.row_iter().map(member_probability).collect())
    }
}

/// Column order used by the loss-set attack.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossSetVariant {
    /// Columns in snapshot order.
    Ordered,
    /// One random column permutation, drawn from the seed and applied to
    /// every training and test vector.
    Shuffled { seed: u64 },
    /// An explicit column permutation.
    Permuted(Vec<usize>),
}

impl LossSetVariant {
    fn permutation(&self, width: usize) -> Result<Option<Vec<usize>>> {
        match self {
            Self::Ordered => Ok(None),
            Self::Shuffled { seed } => {
                let mut p: Vec<usize> = (0..width).collect();
                p.shuffle(&mut rng_from_seed(derive_seed(*seed, "column-shuffle")));
                Ok(Some(p))
            }
            Self::Permuted(p) => {
                let mut seen = vec![false; width];
                if p.len() != width || p.iter().any(|&i| i >= width || std::mem::replace(&mut seen[i], true)) {
                    return Err(Error::Shape(format!("not a permutation of {width} columns")));
                }
                Ok(Some(p.clone()))
            }
        }
    }
}

fn flatten(seqs: &[&MetricSequenceMatrix], perm: Option<&[usize]>) -> Result<Matrix> {
    let width = seqs.first().map_or(0, |s| s.values().as_slice().len());
    let mut data = Vec::with_capacity(seqs.len() * width);
    for s in seqs {
        let v = s.values().as_slice();
        if v.len() != width {
            return Err(Error::Shape("sequences differ in size".into()));
        }
        match perm {
            Some(p) => data.extend(p.iter().map(|&j| v[j])),
            None => data.extend_from_slice(v),
        }
    }
    Matrix::new(seqs.len(), width, data)
}

/// MLP over flattened sequences: the loss set (k = 1) or multi-metric set
/// (k = 5) attack.
pub fn attack_loss_set(
    train: &[AttackExample],
    test: &[MetricSequenceMatrix],
    cfg: &MlpAttackConfig,
    variant: &LossSetVariant,
) -> Result<Vec<AttackScore>> {
    let first = train.first().ok_or_else(|| Error::Empty("attack training set".into()))?;
    if let Some(bad) = test
        .iter()
        .find(|s| s.metrics() != first.sequence.metrics() || s.steps() != first.sequence.steps())
    {
        return Err(Error::Shape(format!("test sequence {} differs in shape", bad.sample_id())));
    }
    let perm = variant.permutation(first.sequence.values().as_slice().len())?;
    let x = flatten(&train.iter().map(|e| &e.sequence).collect::<Vec<_>>(), perm.as_deref())?;
    let members: Vec<bool> = train.iter().map(|e| e.member).collect();
    let attack = FlatMlpAttack::train(&x, &members, cfg)?;
    let tx = flatten(&test.iter().collect::<Vec<_>>(), perm.as_deref())?;
    Ok(attack
        .score(&tx)?
        .into_iter()
        .zip(test)
        .map(|(score, s)| AttackScore {
            sample_id: s.sample_id(),
            score,
            attention: Vec::new(),
        })
        .collect())
}

/// Each row sorted in descending order.
pub fn sorted_descending(posteriors: &Matrix) -> Matrix {
    let mut out = posteriors.clone();
    for r in 0..out.rows() {
        out.row_mut(r).sort_by(|a, b| b.total_cmp(a));
    }
    out
}

/// Shadow-training attack over sorted posteriors of the final models.
pub fn attack_st(
    shadow_posteriors: &Matrix,
    shadow_members: &[bool],
    target_posteriors: &Matrix,
    target_ids: &[usize],
    cfg: &MlpAttackConfig,
) -> Result<Vec<AttackScore>> {
    if target_posteriors.rows() != target_ids.len() {
        return Err(Error::Shape("target posteriors and ids differ in length".into()));
    }
    let attack = FlatMlpAttack::train(&sorted_descending(shadow_posteriors), shadow_members, cfg)?;
    Ok(attack
        .score(&sorted_descending(target_posteriors))?
        .into_iter()
        .zip(target_ids)
        .map(|(score, &sample_id)| AttackScore {
            sample_id,
            score,
            attention: Vec::new(),
        })
        .collect())
}
