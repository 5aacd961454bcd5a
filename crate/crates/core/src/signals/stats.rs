//! Fluctuation, decline-rate and cross-metric correlation statistics of
//! metric sequences.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::Matrix;
use crate::signals::{Metric, MetricSequenceMatrix, MetricSet};

/// Cumulative fluctuation amplitude: sum of absolute consecutive changes.
pub fn clfa(sequence: &[f64]) -> f64 {
    sequence.windows(2).map(|w| (w[1] - w[0]).abs()).sum()
}

/// `(v[0] - v[window]) / window`; positive when the metric falls.
pub fn decline_rate(sequence: &[f64], window: usize) -> Result<f64> {
    if window == 0 || window + 1 > sequence.len() {
        return Err(Error::Shape(format!(
            "decline window {window} needs at least {} values, sequence has {}",
            window + 1,
            sequence.len()
        )));
    }
    Ok((sequence[0] - sequence[window]) / window as f64)
}

/// Decline rate over the whole sequence.
pub fn full_decline_rate(sequence: &[f64]) -> Result<f64> {
    decline_rate(sequence, sequence.len().saturating_sub(1))
}

/// Pearson correlation; zero when either side has zero variance.
pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    if n < 2 {
        return 0.0;
    }
    let nf = n as f64;
    let ma = a[..n].iter().sum::<f64>() / nf;
    let mb = b[..n].iter().sum::<f64>() / nf;
    let (mut cov, mut va, mut vb) = (0.0, 0.0, 0.0);
    for (x, y) in a[..n].iter().zip(&b[..n]) {
        let (dx, dy) = (x - ma, y - mb);
        cov += dx * dy;
        va += dx * dx;
        vb += dy * dy;
    }
    if va == 0.0 || vb == 0.0 {
        return 0.0;
    }
    (cov / (va.sqrt() * vb.sqrt())).clamp(-1.0, 1.0)
}

/// `k x k` matrix of absolute Pearson correlations between metric rows,
/// with a unit diagonal.
pub fn abs_corr_matrix(seq: &MetricSequenceMatrix) -> Matrix {
    let k = seq.k();
    let v = seq.values();
    let mut out = Matrix::identity(k);
    for i in 0..k {
        for j in i + 1..k {
            let c = pearson(v.row(i), v.row(j)).abs();
            out.set(i, j, c);
            out.set(j, i, c);
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct SequenceStats {
    pub clfa: f64,
    pub decline_rate: f64,
    pub pairwise_abs_corr: Matrix,
}

/// Statistics of one sequence; CLFA and decline rate use the `focus` row.
pub fn sequence_stats(seq: &MetricSequenceMatrix, focus: Metric) -> Result<SequenceStats> {
    let row = seq
        .row(focus)
        .ok_or_else(|| Error::Shape(format!("metric {focus} not in sequence")))?;
    Ok(SequenceStats {
        clfa: clfa(row),
        decline_rate: if row.len() >= 2 { full_decline_rate(row)? } else { 0.0 },
        pairwise_abs_corr: abs_corr_matrix(seq),
    })
}

/// Per-group averages used to compare members with non-members. The
/// correlation matrix is computed per sample and then averaged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub count: usize,
    pub metrics: Vec<Metric>,
    /// Mean CLFA per metric row.
    pub mean_clfa: Vec<f64>,
    /// Mean full-sequence decline rate per metric row.
    pub mean_decline_rate: Vec<f64>,
    /// Row-major `k x k` mean absolute correlation.
    pub mean_abs_corr: Vec<f64>,
}

impl GroupSummary {
    pub fn corr(&self, a: Metric, b: Metric) -> Option<f64> {
        let k = self.metrics.len();
        let i = self.metrics.iter().position(|&m| m == a)?;
        let j = self.metrics.iter().position(|&m| m == b)?;
        Some(self.mean_abs_corr[i * k + j])
    }

    pub fn clfa_of(&self, m: Metric) -> Option<f64> {
        self.metrics.iter().position(|&x| x == m).map(|i| self.mean_clfa[i])
    }
}

pub fn summarize<'a>(seqs: impl IntoIterator<Item = &'a MetricSequenceMatrix>) -> Result<GroupSummary> {
    let mut count = 0usize;
    let mut metrics: Option<MetricSet> = None;
    let (mut clfa_sum, mut decline_sum, mut corr_sum) = (Vec::new(), Vec::new(), Vec::new());
    for seq in seqs {
        let k = seq.k();
        match &metrics {
            None => {
                metrics = Some(seq.metrics().clone());
                clfa_sum = vec![0.0; k];
                decline_sum = vec![0.0; k];
                corr_sum = vec![0.0; k * k];
            }
            Some(m) if m != seq.metrics() => {
                return Err(Error::Shape("sequences use different metric sets".into()));
            }
            _ => {}
        }
        for r in 0..k {
            let row = seq.values().row(r);
            clfa_sum[r] += clfa(row);
            if row.len() >= 2 {
                decline_sum[r] += full_decline_rate(row)?;
            }
        }
        for (acc, v) in corr_sum.iter_mut().zip(abs_corr_matrix(seq).as_slice()) {
            *acc += v;
        }
        count += 1;
    }
    let metrics = metrics.ok_or_else(|| Error::Empty("no sequences to summarise".into()))?;
    let n = count as f64;
    let mean = |v: Vec<f64>| v.into_iter().map(|x| x / n).collect::<Vec<_>>();
    Ok(GroupSummary {
        count,
        metrics: metrics.metrics().to_vec(),
        mean_clfa: mean(clfa_sum),
        mean_decline_rate: mean(decline_sum),
        mean_abs_corr: mean(corr_sum),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn clfa_cases() {
        assert_eq!(clfa(&[0.3; 6]), 0.0);
        // |0.5-1.0| + |0.7-0.5| + |0.6-0.7| = 0.5 + 0.2 + 0.1
        assert!((clfa(&[1.0, 0.5, 0.7, 0.6]) - 0.8).abs() < 1e-12);
        assert_eq!(clfa(&[2.0]), 0.0);
        assert_eq!(clfa(&[]), 0.0);
    }

    #[test]
    fn decline_rate_cases() {
        assert_eq!(decline_rate(&[1.0, 1.0, 1.0], 2).unwrap(), 0.0);
        assert!((decline_rate(&[2.0, 1.0, 0.0], 2).unwrap() - 1.0).abs() < 1e-15);
        assert!(decline_rate(&[0.0, 1.0, 3.0], 2).unwrap() < 0.0);
        assert!(decline_rate(&[0.0, 1.0], 2).is_err());
    }

    #[test]
    fn correlation_cases() {
        let a = [1.0, 2.0, 3.0];
        assert!((pearson(&a, &a) - 1.0).abs() < 1e-12);
        assert!((pearson(&a, &[-1.0, -2.0, -3.0]).abs() - 1.0).abs() < 1e-12);
        // mpmath: 0.98198050606196571569...
        assert!((pearson(&a, &[1.0, 2.0, 4.0]) - 0.981980506061966).abs() < 1e-4);
        assert_eq!(pearson(&a, &[5.0, 5.0, 5.0]), 0.0);
    }

    #[test]
    fn corr_matrix_shape() {
        let values = Matrix::from_rows(&[vec![1.0, 2.0, 3.0], vec![3.0, 2.0, 1.0], vec![0.0, 0.0, 0.0]]).unwrap();
        let set = MetricSet::new([Metric::Loss, Metric::Max, Metric::Sd]).unwrap();
        let seq = MetricSequenceMatrix::new(values, set, 0).unwrap();
        let c = abs_corr_matrix(&seq);
        assert_eq!(c.get(0, 1), c.get(1, 0));
        assert!((c.get(0, 1) - 1.0).abs() < 1e-12);
        assert_eq!(c.get(0, 2), 0.0);
        assert_eq!(c.get(2, 2), 1.0);
    }

    proptest! {
        #[test]
        fn monotone_clfa_telescopes(start in -5.0f64..5.0, steps in prop::collection::vec(0.0f64..1.0, 1..20)) {
            let mut v = vec![start];
            for s in steps {
                let last = *v.last().unwrap();
                v.push(last + s);
            }
            let expected = (v.last().unwrap() - v[0]).abs();
            prop_assert!((clfa(&v) - expected).abs() < 1e-9);
        }

        #[test]
        fn correlation_bounds(a in prop::collection::vec(-3.0f64..3.0, 2..15), b in prop::collection::vec(-3.0f64..3.0, 2..15)) {
            let c = pearson(&a, &b);
            prop_assert!((-1.0..=1.0).contains(&c));
        }
    }
}
