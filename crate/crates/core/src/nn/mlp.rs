use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::loss::softmax_in_place;
use crate::nn::matrix::{axpy, dot};
use crate::nn::params::{glorot_uniform, Parameters};
use crate::nn::Matrix;
use crate::rng::rng_from_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Tanh,
}

impl Activation {
    #[inline]
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Tanh => x.tanh(),
        }
    }

    /// Derivative expressed through the activation output.
    #[inline]
    fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - y * y,
        }
    }
}

/// Layer sizes plus hidden activation; the output layer is always linear.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    pub layer_dims: Vec<usize>,
    pub activation: Activation,
}

impl Architecture {
    pub fn new(layer_dims: Vec<usize>, activation: Activation) -> Self {
        Self {
            layer_dims,
            activation,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.layer_dims.len() < 2 {
            return Err(Error::ArchitectureMismatch(
                "an MLP needs at least an input and an output dimension".into(),
            ));
        }
        if self.layer_dims.contains(&0) {
            return Err(Error::ArchitectureMismatch(
                "layer dimensions must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Fully connected classifier. Weights are stored `(out, in)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    arch: Architecture,
    weights: Vec<Matrix>,
    biases: Vec<Vec<f64>>,
}

/// Per-layer activations recorded by a forward pass; `layers[0]` is the
/// input and the last entry holds the logits.
pub(crate) struct MlpTrace {
    pub layers: Vec<Vec<f64>>,
}

impl MlpModel {
    /// Glorot-initialised weights, zero biases.
    pub fn new(arch: Architecture, seed: u64) -> Result<Self> {
        arch.validate()?;
        let mut rng = rng_from_seed(seed);
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for pair in arch.layer_dims.windows(2) {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let mut w = Matrix::zeros(fan_out, fan_in);
            glorot_uniform(&mut rng, fan_in, fan_out, w.as_mut_slice());
            weights.push(w);
            biases.push(vec![0.0; fan_out]);
        }
        Ok(Self {
            arch,
            weights,
            biases,
        })
    }

    pub fn from_parts(arch: Architecture, weights: Vec<Matrix>, biases: Vec<Vec<f64>>) -> Result<Self> {
        arch.validate()?;
        let expected = arch.layer_dims.len() - 1;
        if weights.len() != expected || biases.len() != expected {
            return Err(Error::ArchitectureMismatch(format!(
                "expected {expected} layers, got {} weight matrices and {} bias vectors",
                weights.len(),
                biases.len()
            )));
        }
        for (layer, pair) in arch.layer_dims.windows(2).enumerate() {
            if weights[layer].shape() != (pair[1], pair[0]) || biases[layer].len() != pair[1] {
                return Err(Error::ArchitectureMismatch(format!(
                    "layer {layer} parameters do not match dims {}->{}",
                    pair[0], pair[1]
                )));
            }
        }
        Ok(Self {
            arch,
            weights,
            biases,
        })
    }

    pub fn architecture(&self) -> &Architecture {
        &self.arch
    }

    pub fn layer_dims(&self) -> &[usize] {
        &self.arch.layer_dims
    }

    pub fn activation(&self) -> Activation {
        self.arch.activation
    }

    pub fn input_dim(&self) -> usize {
        self.arch.layer_dims[0]
    }

    pub fn num_classes(&self) -> usize {
        *self.arch.layer_dims.last().expect("validated")
    }

    pub fn weights(&self) -> &[Matrix] {
        &self.weights
    }

    pub fn biases(&self) -> &[Vec<f64>] {
        &self.biases
    }

    /// Logits for every row of `batch`.
    pub fn forward(&self, batch: &Matrix) -> Result<Matrix> {
        if batch.cols() != self.input_dim() {
            return Err(Error::LayerDimension {
                layer: 0,
                expected: self.input_dim(),
                got: batch.cols(),
            });
        }
        let mut out = Matrix::zeros(batch.rows(), self.num_classes());
        let mut scratch = Vec::new();
        for r in 0..batch.rows() {
            self.forward_into(batch.row(r), &mut scratch, out.row_mut(r));
        }
        Ok(out)
    }

    /// Posteriors (softmax of logits) for every row.
    pub fn predict_proba(&self, batch: &Matrix) -> Result<Matrix> {
        let mut logits = self.forward(batch)?;
        for r in 0..logits.rows() {
            softmax_in_place(logits.row_mut(r));
        }
        Ok(logits)
    }

    pub fn predict(&self, batch: &Matrix) -> Result<Vec<usize>> {
        let logits = self.forward(batch)?;
        Ok(logits.row_iter().map(argmax).collect())
    }

    pub fn accuracy(&self, features: &Matrix, labels: &[usize]) -> Result<f64> {
        if features.rows() != labels.len() {
            return Err(Error::Shape("features/labels length mismatch".into()));
        }
        if labels.is_empty() {
            return Err(Error::Empty("accuracy over zero rows".into()));
        }
        let predicted = self.predict(features)?;
        let correct = predicted.iter().zip(labels).filter(|(p, y)| p == y).count();
        Ok(correct as f64 / labels.len() as f64)
    }

    /// Single-row forward without shape checks. `scratch` is reused across
    /// calls to avoid allocation.
    pub(crate) fn forward_into(&self, x: &[f64], scratch: &mut Vec<f64>, logits: &mut [f64]) {
        let last = self.weights.len() - 1;
        let mut current: Vec<f64> = x.to_vec();
        for (layer, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            scratch.clear();
            for (j, bias) in b.iter().enumerate() {
                let z = dot(w.row(j), &current) + bias;
                scratch.push(if layer == last {
                    z
                } else {
                    self.arch.activation.apply(z)
                });
            }
            std::mem::swap(&mut current, scratch);
        }
        logits.copy_from_slice(&current);
    }

    pub(crate) fn forward_trace(&self, x: &[f64]) -> MlpTrace {
        let last = self.weights.len() - 1;
        let mut layers = Vec::with_capacity(self.weights.len() + 1);
        layers.push(x.to_vec());
        for (layer, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let input = layers.last().expect("non-empty");
            let out: Vec<f64> = b
                .iter()
                .enumerate()
                .map(|(j, bias)| {
                    let z = dot(w.row(j), input) + bias;
                    if layer == last {
                        z
                    } else {
                        self.arch.activation.apply(z)
                    }
                })
                .collect();
            layers.push(out);
        }
        MlpTrace { layers }
    }

    /// Backpropagates `dlogits` through a recorded trace, accumulating into
    /// `grad` (a model-shaped gradient buffer).
    pub(crate) fn backward(&self, trace: &MlpTrace, dlogits: &[f64], grad: &mut MlpModel) {
        let mut delta = dlogits.to_vec();
        for layer in (0..self.weights.len()).rev() {
            let input = &trace.layers[layer];
            let w = &self.weights[layer];
            for (j, &d) in delta.iter().enumerate() {
                if d != 0.0 {
                    axpy(d, input, grad.weights[layer].row_mut(j));
                }
                grad.biases[layer][j] += d;
            }
            if layer == 0 {
                break;
            }
            let mut prev = vec![0.0; input.len()];
            for (j, &d) in delta.iter().enumerate() {
                if d != 0.0 {
                    axpy(d, w.row(j), &mut prev);
                }
            }
            for (p, &y) in prev.iter_mut().zip(input) {
                *p *= self.arch.activation.derivative_from_output(y);
            }
            delta = prev;
        }
    }
}

impl Parameters for MlpModel {
    fn param_slices(&self) -> Vec<&[f64]> {
        let mut out = Vec::with_capacity(self.weights.len() * 2);
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.push(w.as_slice());
            out.push(b.as_slice());
        }
        out
    }

    fn param_slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = Vec::with_capacity(self.weights.len() * 2);
        for (w, b) in self.weights.iter_mut().zip(self.biases.iter_mut()) {
            out.push(w.as_mut_slice());
            out.push(b.as_mut_slice());
        }
        out
    }
}

/// Free-function form of [`MlpModel::forward`].
pub fn mlp_forward(model: &MlpModel, batch: &Matrix) -> Result<Matrix> {
    model.forward(batch)
}

pub(crate) fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng as _;

    #[test]
    fn identity_layer_passes_input_through() {
        let arch = Architecture::new(vec![2, 2], Activation::Relu);
        let model = MlpModel::from_parts(arch, vec![Matrix::identity(2)], vec![vec![0.0, 0.0]]).unwrap();
        let out = model.forward(&Matrix::from_rows(&[vec![1.0, 2.0]]).unwrap()).unwrap();
        assert_eq!(out.as_slice(), &[1.0, 2.0]);
    }

    #[test]
    fn zero_weights_emit_bias() {
        let arch = Architecture::new(vec![3, 4, 2], Activation::Tanh);
        let model = MlpModel::from_parts(
            arch,
            vec![Matrix::zeros(4, 3), Matrix::zeros(2, 4)],
            vec![vec![0.0; 4], vec![0.25, -1.5]],
        )
        .unwrap();
        let batch = Matrix::from_rows(&[vec![1.0, -2.0, 3.0], vec![9.0, 9.0, 9.0]]).unwrap();
        let out = model.forward(&batch).unwrap();
        for row in out.row_iter() {
            assert_eq!(row, &[0.25, -1.5]);
        }
    }

    /// Straightforward re-implementation: explicit triple loop, no helpers.
    fn naive_forward(model: &MlpModel, x: &[f64]) -> Vec<f64> {
        let mut a = x.to_vec();
        let n = model.weights().len();
        for l in 0..n {
            let w = &model.weights()[l];
            let mut z = vec![0.0; w.rows()];
            for j in 0..w.rows() {
                let mut s = model.biases()[l][j];
                for i in 0..w.cols() {
                    s += w.get(j, i) * a[i];
                }
                z[j] = if l + 1 < n {
                    match model.activation() {
                        Activation::Relu => s.max(0.0),
                        Activation::Tanh => s.tanh(),
                    }
                } else {
                    s
                };
            }
            a = z;
        }
        a
    }

    #[test]
    fn forward_matches_naive_path() {
        for activation in [Activation::Relu, Activation::Tanh] {
            let model = MlpModel::new(Architecture::new(vec![7, 11, 5, 3], activation), 99).unwrap();
            let mut rng = crate::rng::rng_from_seed(5);
            let rows: Vec<Vec<f64>> = (0..20)
                .map(|_| (0..7).map(|_| rng.random_range(-2.0..2.0)).collect())
                .collect();
            let batch = Matrix::from_rows(&rows).unwrap();
            let out = model.forward(&batch).unwrap();
            for (r, x) in rows.iter().enumerate() {
                for (a, b) in out.row(r).iter().zip(naive_forward(&model, x)) {
                    assert!((a - b).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn dimension_mismatch_names_layer() {
        let model = MlpModel::new(Architecture::new(vec![4, 3], Activation::Relu), 1).unwrap();
        let err = model.forward(&Matrix::zeros(2, 5)).unwrap_err();
        assert!(matches!(err, Error::LayerDimension { layer: 0, expected: 4, got: 5 }));
    }

    #[test]
    fn posteriors_sum_to_one() {
        let model = MlpModel::new(Architecture::new(vec![5, 8, 4], Activation::Relu), 3).unwrap();
        let batch = Matrix::new(3, 5, (0..15).map(|i| i as f64 * 0.3).collect()).unwrap();
        let p = model.predict_proba(&batch).unwrap();
        for row in p.row_iter() {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }
}
