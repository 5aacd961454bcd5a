//! Single-layer tanh RNN with additive attention pooling and a 2-logit head.
//!
//! ```text
//! h_t   = tanh(W_x x_t + W_h h_{t-1} + b_h),   h_0 = 0
//! u_t   = tanh(W_a h_t + b_a)
//! e_t   = v . u_t
//! alpha = softmax(e)
//! c     = sum_t alpha_t h_t
//! logits = W_o c + b_o
//! ```

use crate::error::{Error, Result};
use crate::nn::loss::softmax_in_place;
use crate::nn::matrix::{axpy, dot};
use crate::nn::params::{glorot_uniform, Parameters};
use crate::nn::Matrix;
use crate::rng::rng_from_seed;

#[derive(Debug, Clone, PartialEq)]
pub struct RnnAttentionModel {
    input_dim: usize,
    hidden_dim: usize,
    attention_dim: usize,
    w_input: Matrix,
    w_hidden: Matrix,
    b_hidden: Vec<f64>,
    w_attn: Matrix,
    b_attn: Vec<f64>,
    v_attn: Vec<f64>,
    w_out: Matrix,
    b_out: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RnnOutput {
    pub logits: [f64; 2],
    /// One weight per timestep; sums to one.
    pub attention: Vec<f64>,
}

pub(crate) struct RnnTrace {
    hidden: Vec<Vec<f64>>,
    attn_hidden: Vec<Vec<f64>>,
    attention: Vec<f64>,
    context: Vec<f64>,
    pub logits: [f64; 2],
}

impl RnnAttentionModel {
    pub fn new(input_dim: usize, hidden_dim: usize, attention_dim: usize, seed: u64) -> Result<Self> {
        if input_dim == 0 || hidden_dim == 0 || attention_dim == 0 {
            return Err(Error::ArchitectureMismatch(
                "RNN dimensions must be positive".into(),
            ));
        }
        let mut rng = rng_from_seed(seed);
        let mut w_input = Matrix::zeros(hidden_dim, input_dim);
        glorot_uniform(&mut rng, input_dim, hidden_dim, w_input.as_mut_slice());
        let mut w_hidden = Matrix::zeros(hidden_dim, hidden_dim);
        glorot_uniform(&mut rng, hidden_dim, hidden_dim, w_hidden.as_mut_slice());
        let mut w_attn = Matrix::zeros(attention_dim, hidden_dim);
        glorot_uniform(&mut rng, hidden_dim, attention_dim, w_attn.as_mut_slice());
        let mut v_attn = vec![0.0; attention_dim];
        glorot_uniform(&mut rng, attention_dim, 1, &mut v_attn);
        let mut w_out = Matrix::zeros(2, hidden_dim);
        glorot_uniform(&mut rng, hidden_dim, 2, w_out.as_mut_slice());
        Ok(Self {
            input_dim,
            hidden_dim,
            attention_dim,
            w_input,
            w_hidden,
            b_hidden: vec![0.0; hidden_dim],
            w_attn,
            b_attn: vec![0.0; attention_dim],
            v_attn,
            w_out,
            b_out: vec![0.0; 2],
        })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn hidden_dim(&self) -> usize {
        self.hidden_dim
    }

    pub fn attention_dim(&self) -> usize {
        self.attention_dim
    }

    /// Runs a `(steps, input_dim)` sequence.
    pub fn forward(&self, sequence: &Matrix) -> Result<RnnOutput> {
        self.check_sequence(sequence)?;
        let trace = self.forward_trace(sequence);
        Ok(RnnOutput {
            logits: trace.logits,
            attention: trace.attention,
        })
    }

    pub(crate) fn check_sequence(&self, sequence: &Matrix) -> Result<()> {
        if sequence.rows() == 0 {
            return Err(Error::Empty("sequence with no timesteps".into()));
        }
        if sequence.cols() != self.input_dim {
            return Err(Error::Shape(format!(
                "sequence has {} features per step, model expects {}",
                sequence.cols(),
                self.input_dim
            )));
        }
        Ok(())
    }

    pub(crate) fn forward_trace(&self, sequence: &Matrix) -> RnnTrace {
        let steps = sequence.rows();
        let h_dim = self.hidden_dim;
        let mut hidden: Vec<Vec<f64>> = Vec::with_capacity(steps);
        let mut attn_hidden = Vec::with_capacity(steps);
        let mut scores = Vec::with_capacity(steps);
        let zero = vec![0.0; h_dim];
        for t in 0..steps {
            let x = sequence.row(t);
            let prev = if t == 0 { &zero } else { &hidden[t - 1] };
            let h: Vec<f64> = (0..h_dim)
                .map(|j| {
                    (dot(self.w_input.row(j), x) + dot(self.w_hidden.row(j), prev) + self.b_hidden[j])
                        .tanh()
                })
                .collect();
            let u: Vec<f64> = (0..self.attention_dim)
                .map(|a| (dot(self.w_attn.row(a), &h) + self.b_attn[a]).tanh())
                .collect();
            scores.push(dot(&self.v_attn, &u));
            hidden.push(h);
            attn_hidden.push(u);
        }
        let mut attention = scores;
        softmax_in_place(&mut attention);
        let mut context = vec![0.0; h_dim];
        for (h, &a) in hidden.iter().zip(&attention) {
            axpy(a, h, &mut context);
        }
        let logits = [
            dot(self.w_out.row(0), &context) + self.b_out[0],
            dot(self.w_out.row(1), &context) + self.b_out[1],
        ];
        RnnTrace {
            hidden,
            attn_hidden,
            attention,
            context,
            logits,
        }
    }

    /// Backpropagation through attention, then through time.
    pub(crate) fn backward(&self, sequence: &Matrix, trace: &RnnTrace, dlogits: [f64; 2], grad: &mut Self) {
        let steps = sequence.rows();
        let h_dim = self.hidden_dim;

        // head
        let mut dcontext = vec![0.0; h_dim];
        for (k, &d) in dlogits.iter().enumerate() {
            axpy(d, &trace.context, grad.w_out.row_mut(k));
            grad.b_out[k] += d;
            axpy(d, self.w_out.row(k), &mut dcontext);
        }

        // attention pooling
        let dalpha: Vec<f64> = trace.hidden.iter().map(|h| dot(&dcontext, h)).collect();
        let weighted: f64 = trace.attention.iter().zip(&dalpha).map(|(a, d)| a * d).sum();
        let mut dhidden: Vec<Vec<f64>> = Vec::with_capacity(steps);
        for t in 0..steps {
            let alpha = trace.attention[t];
            let de = alpha * (dalpha[t] - weighted);
            let u = &trace.attn_hidden[t];
            let h = &trace.hidden[t];
            let mut dh: Vec<f64> = dcontext.iter().map(|d| alpha * d).collect();
            axpy(de, u, &mut grad.v_attn);
            for a in 0..self.attention_dim {
                let dpre = de * self.v_attn[a] * (1.0 - u[a] * u[a]);
                if dpre != 0.0 {
                    axpy(dpre, h, grad.w_attn.row_mut(a));
                    grad.b_attn[a] += dpre;
                    axpy(dpre, self.w_attn.row(a), &mut dh);
                }
            }
            dhidden.push(dh);
        }

        // recurrence
        let mut carry = vec![0.0; h_dim];
        for t in (0..steps).rev() {
            let h = &trace.hidden[t];
            let x = sequence.row(t);
            let dpre: Vec<f64> = (0..h_dim)
                .map(|j| (dhidden[t][j] + carry[j]) * (1.0 - h[j] * h[j]))
                .collect();
            carry.iter_mut().for_each(|c| *c = 0.0);
            for (j, &d) in dpre.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                axpy(d, x, grad.w_input.row_mut(j));
                grad.b_hidden[j] += d;
                if t > 0 {
                    axpy(d, &trace.hidden[t - 1], grad.w_hidden.row_mut(j));
                    axpy(d, self.w_hidden.row(j), &mut carry);
                }
            }
        }
    }
}

impl Parameters for RnnAttentionModel {
    fn param_slices(&self) -> Vec<&[f64]> {
        vec![
            self.w_input.as_slice(),
            self.w_hidden.as_slice(),
            &self.b_hidden,
            self.w_attn.as_slice(),
            &self.b_attn,
            &self.v_attn,
            self.w_out.as_slice(),
            &self.b_out,
        ]
    }

    fn param_slices_mut(&mut self) -> Vec<&mut [f64]> {
        vec![
            self.w_input.as_mut_slice(),
            self.w_hidden.as_mut_slice(),
            &mut self.b_hidden,
            self.w_attn.as_mut_slice(),
            &mut self.b_attn,
            &mut self.v_attn,
            self.w_out.as_mut_slice(),
            &mut self.b_out,
        ]
    }
}

/// Free-function form of [`RnnAttentionModel::forward`].
pub fn rnn_attention_forward(model: &RnnAttentionModel, sequence: &Matrix) -> Result<RnnOutput> {
    model.forward(sequence)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng as _;

    fn random_sequence(steps: usize, k: usize, seed: u64) -> Matrix {
        let mut rng = crate::rng::rng_from_seed(seed);
        Matrix::new(steps, k, (0..steps * k).map(|_| rng.random_range(-1.5..1.5)).collect()).unwrap()
    }

    #[test]
    fn single_step_gets_all_attention() {
        let model = RnnAttentionModel::new(3, 6, 4, 1).unwrap();
        let out = model.forward(&random_sequence(1, 3, 2)).unwrap();
        assert_eq!(out.attention, vec![1.0]);
    }

    #[test]
    fn empty_sequence_is_rejected() {
        let model = RnnAttentionModel::new(3, 6, 4, 1).unwrap();
        assert!(matches!(model.forward(&Matrix::zeros(0, 3)), Err(Error::Empty(_))));
    }

    #[test]
    fn repeated_hidden_state_gets_equal_attention() {
        // Zero recurrent weights make h_t depend on x_t alone, so two equal
        // rows produce equal hidden states and equal scores.
        let mut model = RnnAttentionModel::new(2, 5, 3, 4).unwrap();
        model.w_hidden = Matrix::zeros(5, 5);
        let seq = Matrix::from_rows(&[vec![0.3, -0.2], vec![0.3, -0.2], vec![1.0, 0.5]]).unwrap();
        let out = model.forward(&seq).unwrap();
        assert!((out.attention[0] - out.attention[1]).abs() < 1e-15);
        assert!((out.attention.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    /// Step-by-step evaluation with explicit index loops.
    fn naive(model: &RnnAttentionModel, seq: &Matrix) -> [f64; 2] {
        let h_dim = model.hidden_dim;
        let mut hs: Vec<Vec<f64>> = Vec::new();
        let mut prev = vec![0.0; h_dim];
        for t in 0..seq.rows() {
            let mut h = vec![0.0; h_dim];
            for j in 0..h_dim {
                let mut s = model.b_hidden[j];
                for i in 0..model.input_dim {
                    s += model.w_input.get(j, i) * seq.get(t, i);
                }
                for i in 0..h_dim {
                    s += model.w_hidden.get(j, i) * prev[i];
                }
                h[j] = s.tanh();
            }
            prev = h.clone();
            hs.push(h);
        }
        let mut e = Vec::new();
        for h in &hs {
            let mut score = 0.0;
            for a in 0..model.attention_dim {
                let mut s = model.b_attn[a];
                for j in 0..h_dim {
                    s += model.w_attn.get(a, j) * h[j];
                }
                score += model.v_attn[a] * s.tanh();
            }
            e.push(score);
        }
        let m = e.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let z: f64 = e.iter().map(|x| (x - m).exp()).sum();
        let mut c = vec![0.0; h_dim];
        for (h, s) in hs.iter().zip(&e) {
            let w = (s - m).exp() / z;
            for j in 0..h_dim {
                c[j] += w * h[j];
            }
        }
        let mut logits = [0.0; 2];
        for k in 0..2 {
            let mut s = model.b_out[k];
            for j in 0..h_dim {
                s += model.w_out.get(k, j) * c[j];
            }
            logits[k] = s;
        }
        logits
    }

    #[test]
    fn forward_matches_naive_evaluation() {
        for seed in 0..5 {
            let model = RnnAttentionModel::new(5, 9, 7, seed).unwrap();
            let seq = random_sequence(12, 5, seed + 100);
            let out = model.forward(&seq).unwrap();
            let expected = naive(&model, &seq);
            for k in 0..2 {
                assert!((out.logits[k] - expected[k]).abs() < 1e-12);
            }
        }
    }
}
