//! Mini-batch SGD over any [`Objective`].

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::loss::{clamped_ln, kl_row, softmax_in_place};
use crate::nn::params::Parameters;
use crate::nn::{Matrix, MlpModel, RnnAttentionModel};
use crate::rng::rng_from_seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SgdConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    /// Multiplies the learning rate after every epoch.
    #[serde(default)]
    pub lr_decay: Option<f64>,
}

impl SgdConfig {
    pub fn new(learning_rate: f64, batch_size: usize, epochs: usize, seed: u64) -> Self {
        Self {
            learning_rate,
            batch_size,
            epochs,
            seed,
            lr_decay: None,
        }
    }

    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        // lr = 0 is allowed so that a zero-step run can be expressed
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            out.push(format!("learning_rate must be non-negative, got {}", self.learning_rate));
        }
        if self.batch_size == 0 {
            out.push("batch_size must be at least 1".into());
        }
        if self.epochs == 0 {
            out.push("epochs must be at least 1".into());
        }
        if let Some(d) = self.lr_decay {
            if !(d > 0.0 && d.is_finite()) {
                out.push(format!("lr_decay must be positive, got {d}"));
            }
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
}

/// A per-example differentiable loss over a fixed dataset.
pub trait Objective {
    type Model: Parameters;

    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn loss(&self, model: &Self::Model, index: usize) -> f64;

    /// Returns the loss of example `index` and adds its gradient into `grad`.
    fn loss_and_grad(&self, model: &Self::Model, index: usize, grad: &mut Self::Model) -> f64;
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<M> {
    pub model: M,
    /// Mean training loss of each epoch, measured on the fly.
    pub epoch_losses: Vec<f64>,
}

pub fn sgd_train<O: Objective>(model: O::Model, objective: &O, cfg: &SgdConfig) -> Result<TrainOutcome<O::Model>> {
    sgd_train_with_hook(model, objective, cfg, |_, _| {})
}

/// Trains `model` and calls `on_epoch(epoch, &model)` after every epoch
/// (epochs count from 1).
pub fn sgd_train_with_hook<O, F>(
    mut model: O::Model,
    objective: &O,
    cfg: &SgdConfig,
    mut on_epoch: F,
) -> Result<TrainOutcome<O::Model>>
where
    O: Objective,
    F: FnMut(usize, &O::Model),
{
    cfg.validate()?;
    if objective.is_empty() {
        return Err(Error::Empty("training set".into()));
    }
    let mut rng = rng_from_seed(cfg.seed);
    let mut order: Vec<usize> = (0..objective.len()).collect();
    let mut grad = model.zeros_like();
    let mut lr = cfg.learning_rate;
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            for s in grad.param_slices_mut() {
                s.fill(0.0);
            }
            for &i in batch {
                total += objective.loss_and_grad(&model, i, &mut grad);
            }
            let step = lr / batch.len() as f64;
            for (p, g) in model.param_slices_mut().into_iter().zip(grad.param_slices()) {
                for (pi, gi) in p.iter_mut().zip(g) {
                    *pi -= step * gi;
                }
            }
        }
        let mean = total / objective.len() as f64;
        if !mean.is_finite() {
            return Err(Error::Diverged { epoch });
        }
        epoch_losses.push(mean);
        on_epoch(epoch, &model);
        if let Some(decay) = cfg.lr_decay {
            lr *= decay;
        }
    }
    Ok(TrainOutcome { model, epoch_losses })
}

/// Cross-entropy of an MLP against hard labels.
pub struct ClassificationObjective<'a> {
    pub features: &'a Matrix,
    pub labels: &'a [usize],
}

impl<'a> ClassificationObjective<'a> {
    pub fn new(features: &'a Matrix, labels: &'a [usize]) -> Result<Self> {
        if features.rows() != labels.len() {
            return Err(Error::Shape(format!(
                "{} feature rows but {} labels",
                features.rows(),
                labels.len()
            )));
        }
        Ok(Self { features, labels })
    }
}

impl Objective for ClassificationObjective<'_> {
    type Model = MlpModel;

    fn len(&self) -> usize {
        self.labels.len()
    }

    fn loss(&self, model: &MlpModel, index: usize) -> f64 {
        let mut p = vec![0.0; model.num_classes()];
        model.forward_into(self.features.row(index), &mut Vec::new(), &mut p);
        softmax_in_place(&mut p);
        -clamped_ln(p[self.labels[index]])
    }

    fn loss_and_grad(&self, model: &MlpModel, index: usize, grad: &mut MlpModel) -> f64 {
        let trace = model.forward_trace(self.features.row(index));
        let mut p = trace.layers.last().expect("logits").clone();
        softmax_in_place(&mut p);
        let y = self.labels[index];
        let loss = -clamped_ln(p[y]);
        p[y] -= 1.0;
        model.backward(&trace, &p, grad);
        loss
    }
}

/// KL divergence from a teacher's posteriors; ground-truth labels are not
/// part of this objective at all. Soft labels are produced by querying the
/// teacher whenever an example is visited.
pub struct DistillationObjective<'a> {
    pub features: &'a Matrix,
    pub teacher: &'a MlpModel,
}

impl DistillationObjective<'_> {
    fn soft_label(&self, index: usize) -> Vec<f64> {
        let mut t = vec![0.0; self.teacher.num_classes()];
        self.teacher.forward_into(self.features.row(index), &mut Vec::new(), &mut t);
        softmax_in_place(&mut t);
        t
    }
}

impl Objective for DistillationObjective<'_> {
    type Model = MlpModel;

    fn len(&self) -> usize {
        self.features.rows()
    }

    fn loss(&self, model: &MlpModel, index: usize) -> f64 {
        let t = self.soft_label(index);
        let mut s = vec![0.0; model.num_classes()];
        model.forward_into(self.features.row(index), &mut Vec::new(), &mut s);
        softmax_in_place(&mut s);
        kl_row(&s, &t)
    }

    fn loss_and_grad(&self, model: &MlpModel, index: usize, grad: &mut MlpModel) -> f64 {
        let t = self.soft_label(index);
        let trace = model.forward_trace(self.features.row(index));
        let mut s = trace.layers.last().expect("logits").clone();
        softmax_in_place(&mut s);
        let loss = kl_row(&s, &t);
        // d KL / d logits = s - t for a normalised teacher row
        let d: Vec<f64> = s.iter().zip(&t).map(|(s, t)| s - t).collect();
        model.backward(&trace, &d, grad);
        loss
    }
}

/// Binary cross-entropy of the attention RNN on `(steps, k)` sequences.
pub struct SequenceObjective<'a> {
    pub sequences: &'a [Matrix],
    pub labels: &'a [usize],
}

impl Objective for SequenceObjective<'_> {
    type Model = RnnAttentionModel;

    fn len(&self) -> usize {
        self.labels.len()
    }

    fn loss(&self, model: &RnnAttentionModel, index: usize) -> f64 {
        let trace = model.forward_trace(&self.sequences[index]);
        let mut p = trace.logits.to_vec();
        softmax_in_place(&mut p);
        -clamped_ln(p[self.labels[index]])
    }

    fn loss_and_grad(&self, model: &RnnAttentionModel, index: usize, grad: &mut RnnAttentionModel) -> f64 {
        let seq = &self.sequences[index];
        let trace = model.forward_trace(seq);
        let mut p = trace.logits.to_vec();
        softmax_in_place(&mut p);
        let y = self.labels[index];
        let loss = -clamped_ln(p[y]);
        p[y] -= 1.0;
        model.backward(seq, &trace, [p[0], p[1]], grad);
        loss
    }
}
