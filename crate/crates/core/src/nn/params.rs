use rand::Rng as _;

use crate::rng::Rng;

/// A trainable model whose parameters can be walked as flat slices.
///
/// The slice order is fixed per model type; gradients are stored in a
/// zeroed copy of the model so that model and gradient slices line up.
pub trait Parameters: Clone {
    fn param_slices(&self) -> Vec<&[f64]>;

    fn param_slices_mut(&mut self) -> Vec<&mut [f64]>;

    /// Copy of `self` with every parameter set to zero.
    fn zeros_like(&self) -> Self {
        let mut out = self.clone();
        for s in out.param_slices_mut() {
            s.fill(0.0);
        }
        out
    }

    fn num_params(&self) -> usize {
        self.param_slices().iter().map(|s| s.len()).sum()
    }

    fn flat_params(&self) -> Vec<f64> {
        self.param_slices().concat()
    }

    /// Reads parameter `index` in flat order.
    fn param_at(&self, mut index: usize) -> f64 {
        for s in self.param_slices() {
            if index < s.len() {
                return s[index];
            }
            index -= s.len();
        }
        panic!("parameter index out of range");
    }

    fn set_param_at(&mut self, mut index: usize, value: f64) {
        for s in self.param_slices_mut() {
            if index < s.len() {
                s[index] = value;
                return;
            }
            index -= s.len();
        }
        panic!("parameter index out of range");
    }

    /// Little-endian bytes of all parameters, in flat order.
    fn param_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.num_params() * 8);
        for s in self.param_slices() {
            for v in s {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }
}

/// Glorot-uniform fill: `U(-a, a)` with `a = sqrt(6 / (fan_in + fan_out))`.
pub(crate) fn glorot_uniform(rng: &mut Rng, fan_in: usize, fan_out: usize, out: &mut [f64]) {
    let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
    for v in out {
        *v = rng.random_range(-a..a);
    }
}
