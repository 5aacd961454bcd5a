use crate::error::{Error, Result};
use crate::nn::loss::softmax_in_place;
use crate::nn::Matrix;
use crate::pipeline::SnapshotSeries;
use crate::signals::{Metric, MetricSet};

/// `k x (n+1)` matrix: one row per metric (canonical order), one column
/// per snapshot in training order.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricSequenceMatrix {
    values: Matrix,
    metrics: MetricSet,
    sample_id: usize,
}

impl MetricSequenceMatrix {
    pub fn new(values: Matrix, metrics: MetricSet, sample_id: usize) -> Result<Self> {
        if values.rows() != metrics.len() {
            return Err(Error::Shape(format!(
                "{} metric rows for a {}-metric set",
                values.rows(),
                metrics.len()
            )));
        }
        if values.cols() == 0 {
            return Err(Error::Empty("metric sequence with no timesteps".into()));
        }
        if !values.is_finite() {
            return Err(Error::NonFinite(format!("metric sequence of sample {sample_id}")));
        }
        Ok(Self {
            values,
            metrics,
            sample_id,
        })
    }

    pub fn values(&self) -> &Matrix {
        &self.values
    }

    pub fn metrics(&self) -> &MetricSet {
        &self.metrics
    }

    pub fn sample_id(&self) -> usize {
        self.sample_id
    }

    /// Number of metrics `k`.
    pub fn k(&self) -> usize {
        self.values.rows()
    }

    /// Number of timesteps `n + 1`.
    pub fn steps(&self) -> usize {
        self.values.cols()
    }

    pub fn row(&self, metric: Metric) -> Option<&[f64]> {
        self.metrics.position(metric).map(|r| self.values.row(r))
    }

    /// Restricts to a metric subset. Errors if a requested metric is absent.
    pub fn select(&self, subset: &MetricSet) -> Result<Self> {
        let mut data = Vec::with_capacity(subset.len() * self.steps());
        for &m in subset.metrics() {
            let row = self
                .row(m)
                .ok_or_else(|| Error::Shape(format!("metric {m} not present in sequence")))?;
            data.extend_from_slice(row);
        }
        Ok(Self {
            values: Matrix::new(subset.len(), self.steps(), data)?,
            metrics: subset.clone(),
            sample_id: self.sample_id,
        })
    }

    /// `(n+1) x k` layout consumed by the recurrent attack model.
    pub fn timestep_major(&self) -> Matrix {
        self.values.transpose()
    }
}

/// Sequence for one sample.
pub fn build_sequence(
    series: &SnapshotSeries,
    sample: &[f64],
    true_label: usize,
    metrics: &MetricSet,
) -> Result<MetricSequenceMatrix> {
    let features = Matrix::new(1, sample.len(), sample.to_vec())?;
    build_sequences(series, &features, &[true_label], &[0], metrics).map(|mut v| v.remove(0))
}

/// Sequences for a batch of samples, querying every snapshot once per batch.
pub fn build_sequences(
    series: &SnapshotSeries,
    features: &Matrix,
    labels: &[usize],
    sample_ids: &[usize],
    metrics: &MetricSet,
) -> Result<Vec<MetricSequenceMatrix>> {
    if features.rows() != labels.len() || labels.len() != sample_ids.len() {
        return Err(Error::Shape("features, labels and ids differ in length".into()));
    }
    let k = metrics.len();
    let steps = series.len();
    let n = features.rows();
    let mut values = vec![vec![0.0; k * steps]; n];
    for (t, model) in series.snapshots().iter().enumerate() {
        let mut logits = model.forward(features)?;
        if let Some(&bad) = labels.iter().find(|&&y| y >= model.num_classes()) {
            return Err(Error::LabelOutOfRange {
                label: bad,
                classes: model.num_classes(),
            });
        }
        for (i, &y) in labels.iter().enumerate() {
            let p = logits.row_mut(i);
            softmax_in_place(p);
            for (r, m) in metrics.metrics().iter().enumerate() {
                values[i][r * steps + t] = m.evaluate(p, y);
            }
        }
    }
    values
        .into_iter()
        .zip(sample_ids)
        .map(|(v, &id)| MetricSequenceMatrix::new(Matrix::new(k, steps, v)?, metrics.clone(), id))
        .collect()
}
