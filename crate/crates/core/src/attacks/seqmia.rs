use serde::{Deserialize, Serialize};

use crate::attacks::{check_both_classes, member_probability, AttackExample, AttackScore, Normalizer};
use crate::error::{Error, Result};
use crate::nn::{sgd_train, Matrix, RnnAttentionModel, SequenceObjective, SgdConfig};
use crate::rng::derive_seed;
use crate::signals::{MetricSequenceMatrix, MetricSet};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeqMiaConfig {
    #[serde(default = "default_hidden")]
    pub hidden_dim: usize,
    #[serde(default = "default_hidden")]
    pub attention_dim: usize,
    #[serde(default = "default_true")]
    pub normalize: bool,
    pub sgd: SgdConfig,
}

fn default_hidden() -> usize {
    64
}

fn default_true() -> bool {
    true
}

impl SeqMiaConfig {
    pub fn new(sgd: SgdConfig) -> Self {
        Self {
            hidden_dim: default_hidden(),
            attention_dim: default_hidden(),
            normalize: true,
            sgd,
        }
    }

    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.hidden_dim == 0 {
            out.push("hidden_dim must be at least 1".into());
        }
        if self.attention_dim == 0 {
            out.push("attention_dim must be at least 1".into());
        }
        out.extend(self.sgd.violations());
        out
    }
}

/// Trained attention-RNN attack with the normalizer fitted on its
/// training sequences.
#[derive(Debug, Clone, PartialEq)]
pub struct SeqMiaModel {
    pub rnn: RnnAttentionModel,
    pub normalizer: Normalizer,
    pub metrics: MetricSet,
    pub steps: usize,
    pub epoch_losses: Vec<f64>,
}

fn check_shapes<'a>(seqs: impl IntoIterator<Item = &'a MetricSequenceMatrix>) -> Result<(MetricSet, usize)> {
    let mut it = seqs.into_iter();
    let first = it.next().ok_or_else(|| Error::Empty("no attack examples".into()))?;
    for s in it {
        if s.metrics() != first.metrics() || s.steps() != first.steps() {
            return Err(Error::Shape(format!(
                "sequence {} has shape {}x{}, expected {}x{}",
                s.sample_id(),
                s.k(),
                s.steps(),
                first.k(),
                first.steps()
            )));
        }
    }
    Ok((first.metrics().clone(), first.steps()))
}

pub fn train_seqmia(examples: &[AttackExample], cfg: &SeqMiaConfig) -> Result<SeqMiaModel> {
    let v = cfg.violations();
    if !v.is_empty() {
        return Err(Error::InvalidConfig(v));
    }
    let (metrics, steps) = check_shapes(examples.iter().map(|e| &e.sequence))?;
    check_both_classes(examples.iter().map(|e| e.member))?;
    let normalizer = if cfg.normalize {
        Normalizer::fit(examples.iter().map(|e| &e.sequence))?
    } else {
        Normalizer::identity(metrics.len())
    };
    let inputs: Vec<Matrix> = examples
        .iter()
        .map(|e| normalizer.transform(&e.sequence))
        .collect::<Result<_>>()?;
    let labels: Vec<usize> = examples.iter().map(|e| e.member as usize).collect();
    let rnn = RnnAttentionModel::new(
        metrics.len(),
        cfg.hidden_dim,
        cfg.attention_dim,
        derive_seed(cfg.sgd.seed, "attack-init"),
    )?;
    let sgd = SgdConfig {
        seed: derive_seed(cfg.sgd.seed, "attack-shuffle"),
        ..cfg.sgd.clone()
    };
    let objective = SequenceObjective {
        sequences: &inputs,
        labels: &labels,
    };
    let out = sgd_train(rnn, &objective, &sgd)?;
    Ok(SeqMiaModel {
        rnn: out.model,
        normalizer,
        metrics,
        steps,
        epoch_losses: out.epoch_losses,
    })
}

pub fn infer_seqmia(model: &SeqMiaModel, sequences: &[MetricSequenceMatrix]) -> Result<Vec<AttackScore>> {
    sequences
        .iter()
        .map(|s| {
            if s.metrics() != &model.metrics || s.steps() != model.steps {
                return Err(Error::Shape(format!(
                    "sequence {} is {}x{} ({}), attack expects {}x{} ({})",
                    s.sample_id(),
                    s.k(),
                    s.steps(),
                    s.metrics().label(),
                    model.metrics.len(),
                    model.steps,
                    model.metrics.label()
                )));
            }
            let out = model.rnn.forward(&model.normalizer.transform(s)?)?;
            Ok(AttackScore {
                sample_id: s.sample_id(),
                score: member_probability(&out.logits),
                attention: out.attention,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use crate::signals::Metric;
    use rand::Rng as _;

    fn synthetic(n: usize, k: usize, steps: usize, offset: f64, seed: u64) -> Vec<AttackExample> {
        let set = MetricSet::new(Metric::ALL[..k].iter().copied()).unwrap();
        let mut rng = rng_from_seed(seed);
        (0..n)
            .map(|i| {
                let member = i % 2 == 0;
                let data = (0..k * steps)
                    .map(|j| {
                        let base: f64 = rng.random_range(0.0..1.0);
                        if member && j < steps {
                            base + offset
                        } else {
                            base
                        }
                    })
                    .collect();
                let m = Matrix::new(k, steps, data).unwrap();
                AttackExample::new(MetricSequenceMatrix::new(m, set.clone(), i).unwrap(), member)
            })
            .collect()
    }

    fn cfg(epochs: usize) -> SeqMiaConfig {
        SeqMiaConfig {
            hidden_dim: 8,
            attention_dim: 6,
            normalize: true,
            sgd: SgdConfig::new(0.05, 8, epochs, 3),
        }
    }

    #[test]
    fn separable_offset_is_learned() {
        let ex = synthetic(120, 3, 6, 3.0, 1);
        let model = train_seqmia(&ex, &cfg(15)).unwrap();
        let seqs: Vec<_> = ex.iter().map(|e| e.sequence.clone()).collect();
        let scores = infer_seqmia(&model, &seqs).unwrap();
        let correct = scores
            .iter()
            .zip(&ex)
            .filter(|(s, e)| (s.score > 0.5) == e.member)
            .count();
        assert!(correct as f64 / ex.len() as f64 >= 0.99);
        for w in model.epoch_losses.windows(2) {
            assert!(w[1] <= w[0] + 0.05, "loss curve {:?}", model.epoch_losses);
        }
        for s in &scores {
            assert!((0.0..=1.0).contains(&s.score));
            assert!((s.attention.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn single_metric_sequences_are_accepted() {
        let ex = synthetic(40, 1, 5, 2.0, 2);
        let model = train_seqmia(&ex, &cfg(3)).unwrap();
        assert_eq!(model.rnn.input_dim(), 1);
    }

    #[test]
    fn single_class_is_rejected() {
        let ex: Vec<_> = synthetic(20, 2, 4, 1.0, 3).into_iter().filter(|e| e.member).collect();
        assert!(matches!(train_seqmia(&ex, &cfg(1)), Err(Error::SingleClass)));
    }

    #[test]
    fn inference_is_pure_and_checks_shape() {
        let ex = synthetic(30, 2, 4, 1.0, 4);
        let model = train_seqmia(&ex, &cfg(2)).unwrap();
        let s = ex[0].sequence.clone();
        let a = infer_seqmia(&model, &[s.clone(), s.clone()]).unwrap();
        assert_eq!(a[0], a[1]);
        let other = synthetic(2, 2, 5, 1.0, 5);
        assert!(infer_seqmia(&model, &[other[0].sequence.clone()]).is_err());
    }

    #[test]
    fn training_is_deterministic() {
        let ex = synthetic(30, 2, 4, 1.0, 6);
        let a = train_seqmia(&ex, &cfg(3)).unwrap();
        let b = train_seqmia(&ex, &cfg(3)).unwrap();
        assert_eq!(a, b);
    }
}
