//! The five posterior metrics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::loss::{clamped_ln, PROB_CLAMP};

/// A posterior over classes together with the sample's true label.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorVector {
    probs: Vec<f64>,
    true_label: usize,
}

impl PosteriorVector {
    pub fn new(probs: Vec<f64>, true_label: usize) -> Result<Self> {
        if true_label >= probs.len() {
            return Err(Error::LabelOutOfRange {
                label: true_label,
                classes: probs.len(),
            });
        }
        if probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::Shape("posterior entries must lie in [0, 1]".into()));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Shape(format!("posterior sums to {sum}, not 1")));
        }
        Ok(Self { probs, true_label })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn true_label(&self) -> usize {
        self.true_label
    }
}

/// Canonical metric order: Loss, Max, SD, Entropy, M-Entropy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Loss,
    Max,
    Sd,
    Entropy,
    Mentropy,
}

impl Metric {
    pub const ALL: [Metric; 5] = [Metric::Loss, Metric::Max, Metric::Sd, Metric::Entropy, Metric::Mentropy];

    pub fn as_str(self) -> &'static str {
        match self {
            Metric::Loss => "loss",
            Metric::Max => "max",
            Metric::Sd => "sd",
            Metric::Entropy => "entropy",
            Metric::Mentropy => "mentropy",
        }
    }

    pub fn tag(self) -> u8 {
        self as u8
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        Self::ALL.get(tag as usize).copied()
    }

    pub fn parse(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.as_str() == name)
    }

    /// Evaluates the metric on raw probabilities; `label` is only read by
    /// the label-aware metrics.
    pub fn evaluate(self, probs: &[f64], label: usize) -> f64 {
        match self {
            Metric::Loss => loss(probs, label),
            Metric::Max => max(probs),
            Metric::Sd => sd(probs),
            Metric::Entropy => entropy(probs),
            Metric::Mentropy => mentropy(probs, label),
        }
    }
}

impl std::fmt::Display for Metric {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Non-empty, de-duplicated metric subset kept in canonical order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<Metric>", into = "Vec<Metric>")]
pub struct MetricSet(Vec<Metric>);

impl MetricSet {
    pub fn new(metrics: impl IntoIterator<Item = Metric>) -> Result<Self> {
        let mut v: Vec<Metric> = metrics.into_iter().collect();
        v.sort_unstable();
        v.dedup();
        if v.is_empty() {
            return Err(Error::Empty("metric set".into()));
        }
        Ok(Self(v))
    }

    pub fn all() -> Self {
        Self(Metric::ALL.to_vec())
    }

    pub fn single(metric: Metric) -> Self {
        Self(vec![metric])
    }

    pub fn metrics(&self) -> &[Metric] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn position(&self, metric: Metric) -> Option<usize> {
        self.0.iter().position(|&m| m == metric)
    }

    /// Every unordered pair of distinct metrics, in canonical order.
    pub fn all_pairs() -> Vec<MetricSet> {
        let mut out = Vec::new();
        for (i, &a) in Metric::ALL.iter().enumerate() {
            for &b in &Metric::ALL[i + 1..] {
                out.push(MetricSet(vec![a, b]));
            }
        }
        out
    }

    pub fn label(&self) -> String {
        self.0.iter().map(|m| m.as_str()).collect::<Vec<_>>().join("+")
    }
}

impl TryFrom<Vec<Metric>> for MetricSet {
    type Error = Error;
    fn try_from(v: Vec<Metric>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<MetricSet> for Vec<Metric> {
    fn from(s: MetricSet) -> Self {
        s.0
    }
}

/// `-ln p_y`, clamped.
pub fn loss(probs: &[f64], label: usize) -> f64 {
    -clamped_ln(probs[label])
}

pub fn max(probs: &[f64]) -> f64 {
    probs.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

/// Population standard deviation around the mean `1/C`.
pub fn sd(probs: &[f64]) -> f64 {
    let c = probs.len() as f64;
    let mean = 1.0 / c;
    (probs.iter().map(|p| (p - mean) * (p - mean)).sum::<f64>() / c).sqrt()
}

pub fn entropy(probs: &[f64]) -> f64 {
    -probs.iter().map(|&p| p * clamped_ln(p)).sum::<f64>()
}

/// Modified entropy
/// `-(1 - p_y) ln p_y - sum_{i != y} p_i ln(1 - p_i)`,
/// capped at `-ln(PROB_CLAMP)`, the clamp's stand-in for infinity.
pub fn mentropy(probs: &[f64], label: usize) -> f64 {
    let py = probs[label];
    let mut v = -(1.0 - py) * clamped_ln(py);
    for (i, &p) in probs.iter().enumerate() {
        if i != label {
            v -= p * clamped_ln(1.0 - p);
        }
    }
    v.min(-PROB_CLAMP.ln())
}

pub fn metric_loss(p: &PosteriorVector) -> f64 {
    loss(&p.probs, p.true_label)
}

pub fn metric_max(p: &PosteriorVector) -> f64 {
    max(&p.probs)
}

pub fn metric_sd(p: &PosteriorVector) -> f64 {
    sd(&p.probs)
}

pub fn metric_entropy(p: &PosteriorVector) -> f64 {
    entropy(&p.probs)
}

pub fn metric_mentropy(p: &PosteriorVector) -> f64 {
    mentropy(&p.probs, p.true_label)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::loss::softmax_in_place;
    use proptest::prelude::*;

    fn pv(p: &[f64], y: usize) -> PosteriorVector {
        PosteriorVector::new(p.to_vec(), y).unwrap()
    }

    // Reference values below were evaluated with mpmath at 30 digits.
    const P: [f64; 3] = [0.7, 0.2, 0.1];

    #[test]
    fn loss_cases() {
        assert_eq!(metric_loss(&pv(&[0.0, 1.0, 0.0], 1)), 0.0);
        assert!((metric_loss(&pv(&[0.25; 4], 2)) - 4f64.ln()).abs() < 1e-12);
        assert!((metric_loss(&pv(&P, 0)) - 0.356674943938732).abs() < 1e-5);
    }

    #[test]
    fn max_cases() {
        assert_eq!(metric_max(&pv(&[0.1, 0.7, 0.2], 0)), 0.7);
        assert!((metric_max(&pv(&[0.2; 5], 0)) - 0.2).abs() < 1e-15);
        assert_eq!(metric_max(&pv(&[0.0, 1.0], 0)), 1.0);
    }

    #[test]
    fn sd_cases() {
        assert!(metric_sd(&pv(&[0.25; 4], 0)).abs() < 1e-15);
        assert!((metric_sd(&pv(&[1.0, 0.0], 0)) - 0.5).abs() < 1e-15);
        assert!((metric_sd(&pv(&P, 0)) - 0.262466929133727).abs() < 1e-5);
    }

    #[test]
    fn entropy_cases() {
        assert_eq!(metric_entropy(&pv(&[0.0, 1.0, 0.0], 1)), 0.0);
        assert!((metric_entropy(&pv(&[0.5, 0.5], 0)) - std::f64::consts::LN_2).abs() < 1e-12);
        assert!((metric_entropy(&pv(&P, 0)) - 0.801818552543337).abs() < 1e-5);
    }

    #[test]
    fn mentropy_cases() {
        assert_eq!(metric_mentropy(&pv(&[0.0, 1.0, 0.0], 1)), 0.0);
        let wrong = metric_mentropy(&pv(&[0.0, 1.0, 0.0], 0));
        assert!((wrong - 27.6310211159285).abs() < 1e-9);
        assert!((metric_mentropy(&pv(&P, 0)) - 0.162167245010244).abs() < 1e-5);
    }

    #[test]
    fn metric_set_is_canonical() {
        let s = MetricSet::new([Metric::Mentropy, Metric::Loss, Metric::Loss]).unwrap();
        assert_eq!(s.metrics(), &[Metric::Loss, Metric::Mentropy]);
        assert!(MetricSet::new([]).is_err());
        assert_eq!(MetricSet::all_pairs().len(), 10);
    }

    proptest! {
        #[test]
        fn metric_ranges(logits in prop::collection::vec(-60.0f64..60.0, 2..40), y in 0usize..40) {
            let mut p = logits;
            softmax_in_place(&mut p);
            let c = p.len();
            let y = y % c;
            let cf = c as f64;
            let l = loss(&p, y);
            let m = max(&p);
            let s = sd(&p);
            let e = entropy(&p);
            let me = mentropy(&p, y);
            for v in [l, m, s, e, me] {
                prop_assert!(v.is_finite());
            }
            prop_assert!(l >= 0.0);
            prop_assert!(m >= 1.0 / cf - 1e-12 && m <= 1.0);
            prop_assert!(s >= 0.0 && s <= ((cf - 1.0).sqrt()) / cf + 1e-12);
            prop_assert!(e >= -1e-12 && e <= cf.ln() + 1e-9);
            prop_assert!(me >= 0.0);
        }
    }
}
