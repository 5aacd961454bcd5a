use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::attacks::AttackScore;
use crate::error::{Error, Result};

/// Classes with fewer shadow samples than this use the global threshold.
pub const MBA_MIN_CLASS_SAMPLES: usize = 10;

/// One metric value computed on a final model's posterior.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricObservation {
    pub sample_id: usize,
    pub class_label: usize,
    pub value: f64,
    /// Ignored for target observations.
    pub member: bool,
}

/// Thresholds calibrated on shadow observations. A value below the
/// threshold is predicted to be a member.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MbaCalibration {
    pub global: f64,
    pub per_class: BTreeMap<usize, f64>,
    /// Logistic temperature: standard deviation of shadow values.
    pub scale: f64,
}

impl MbaCalibration {
    pub fn fit(shadow: &[MetricObservation]) -> Result<Self> {
        if shadow.is_empty() {
            return Err(Error::Empty("no shadow observations".into()));
        }
        if let Some(o) = shadow.iter().find(|o| !o.value.is_finite()) {
            return Err(Error::NonFinite(format!("metric value of sample {}", o.sample_id)));
        }
        let global = best_threshold(shadow.iter().map(|o| (o.value, o.member)));
        let mut by_class: BTreeMap<usize, Vec<(f64, bool)>> = BTreeMap::new();
        for o in shadow {
            by_class.entry(o.class_label).or_default().push((o.value, o.member));
        }
        let per_class = by_class
            .into_iter()
            .filter(|(_, v)| v.len() >= MBA_MIN_CLASS_SAMPLES && v.iter().any(|x| x.1) && v.iter().any(|x| !x.1))
            .map(|(c, v)| (c, best_threshold(v)))
            .collect();
        let n = shadow.len() as f64;
        let mean = shadow.iter().map(|o| o.value).sum::<f64>() / n;
        let var = shadow.iter().map(|o| (o.value - mean).powi(2)).sum::<f64>() / n;
        Ok(Self {
            global,
            per_class,
            scale: var.sqrt().max(1e-8),
        })
    }

    pub fn threshold(&self, class_label: usize) -> f64 {
        self.per_class.get(&class_label).copied().unwrap_or(self.global)
    }

    pub fn score(&self, o: &MetricObservation) -> f64 {
        let z = (self.threshold(o.class_label) - o.value) / self.scale;
        1.0 / (1.0 + (-z).exp())
    }
}

/// Threshold maximising balanced accuracy of `value < threshold => member`.
/// Candidates are midpoints between distinct values plus the two outer
/// cuts; ties keep the smallest candidate.
fn best_threshold(values: impl IntoIterator<Item = (f64, bool)>) -> f64 {
    let mut v: Vec<(f64, bool)> = values.into_iter().collect();
    v.sort_by(|a, b| a.0.total_cmp(&b.0));
    let pos = v.iter().filter(|x| x.1).count();
    let neg = v.len() - pos;
    let first = v[0].0;
    let last = v[v.len() - 1].0;
    // Everything predicted non-member.
    let mut best = (ba(0, 0, pos, neg), first - 1.0);
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < v.len() {
        let x = v[i].0;
        while i < v.len() && v[i].0 == x {
            if v[i].1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        let cut = if i < v.len() { x + (v[i].0 - x) / 2.0 } else { last + 1.0 };
        let score = ba(tp, fp, pos, neg);
        if score > best.0 {
            best = (score, cut);
        }
    }
    best.1
}

fn ba(tp: usize, fp: usize, pos: usize, neg: usize) -> f64 {
    let tpr = if pos == 0 { 0.5 } else { tp as f64 / pos as f64 };
    let tnr = if neg == 0 { 0.5 } else { 1.0 - fp as f64 / neg as f64 };
    (tpr + tnr) / 2.0
}

/// Metric-threshold attack (Entropy or M-Entropy values).
pub fn attack_mba(shadow: &[MetricObservation], target: &[MetricObservation]) -> Result<Vec<AttackScore>> {
    let cal = MbaCalibration::fit(shadow)?;
    Ok(target
        .iter()
        .map(|o| AttackScore {
            sample_id: o.sample_id,
            score: cal.score(o),
            attention: Vec::new(),
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn obs(values: &[(f64, bool, usize)]) -> Vec<MetricObservation> {
        values
            .iter()
            .enumerate()
            .map(|(i, &(value, member, class_label))| MetricObservation {
                sample_id: i,
                class_label,
                value,
                member,
            })
            .collect()
    }

    fn decision_accuracy(cal: &MbaCalibration, o: &[MetricObservation]) -> f64 {
        let ok = o
            .iter()
            .filter(|x| (x.value < cal.threshold(x.class_label)) == x.member)
            .count();
        ok as f64 / o.len() as f64
    }

    #[test]
    fn separable_values() {
        let data: Vec<_> = (0..40).map(|i| (if i % 2 == 0 { 0.0 } else { 1.0 }, i % 2 == 0, i % 3)).collect();
        let o = obs(&data);
        let cal = MbaCalibration::fit(&o).unwrap();
        assert!(cal.global > 0.0 && cal.global < 1.0);
        assert_eq!(decision_accuracy(&cal, &o), 1.0);
        let s = attack_mba(&o, &o).unwrap();
        assert!(s.iter().zip(&o).all(|(s, o)| (s.score > 0.5) == o.member));
    }

    #[test]
    fn identical_values_give_chance() {
        let data: Vec<_> = (0..30).map(|i| (0.4, i % 2 == 0, 0)).collect();
        let o = obs(&data);
        let cal = MbaCalibration::fit(&o).unwrap();
        let s = attack_mba(&o, &o).unwrap();
        assert!(s.windows(2).all(|w| w[0].score == w[1].score));
        let tp = o.iter().filter(|x| x.member && x.value < cal.threshold(0)).count() as f64 / 15.0;
        let tn = o.iter().filter(|x| !x.member && x.value >= cal.threshold(0)).count() as f64 / 15.0;
        assert_eq!((tp + tn) / 2.0, 0.5);
    }

    #[test]
    fn small_classes_fall_back_to_global() {
        let mut data: Vec<_> = (0..40).map(|i| (i as f64 / 40.0, i < 20, 0)).collect();
        data.extend((0..4).map(|i| (0.9 + i as f64, i < 2, 7)));
        let cal = MbaCalibration::fit(&obs(&data)).unwrap();
        assert!(cal.per_class.contains_key(&0));
        assert!(!cal.per_class.contains_key(&7));
        assert_eq!(cal.threshold(7), cal.global);
        assert_eq!(cal.threshold(99), cal.global);
    }

    #[test]
    fn per_class_thresholds_differ() {
        let mut data: Vec<_> = (0..20).map(|i| (if i < 10 { 0.1 } else { 0.3 }, i < 10, 0)).collect();
        data.extend((0..20).map(|i| (if i < 10 { 2.1 } else { 2.3 }, i < 10, 1)));
        let o = obs(&data);
        let cal = MbaCalibration::fit(&o).unwrap();
        assert!((cal.threshold(0) - 0.2).abs() < 1e-12);
        assert!((cal.threshold(1) - 2.2).abs() < 1e-12);
        assert_eq!(decision_accuracy(&cal, &o), 1.0);
    }
}
