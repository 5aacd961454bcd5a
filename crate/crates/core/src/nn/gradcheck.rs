//! Central finite-difference verification of analytic gradients.

use crate::nn::params::Parameters;
use crate::nn::sgd::Objective;

pub const FINITE_DIFFERENCE_STEP: f64 = 1e-5;

/// Maximum relative error between analytic and numeric gradients of example
/// `index`, over every parameter. The relative error of a pair `(a, b)` is
/// `|a - b| / max(|a|, |b|, 1e-8)`.
pub fn gradient_check<O: Objective>(model: &O::Model, objective: &O, index: usize) -> f64 {
    let all: Vec<usize> = (0..model.num_params()).collect();
    gradient_check_subset(model, objective, index, &all)
}

/// Like [`gradient_check`] but only over the listed flat parameter indices.
pub fn gradient_check_subset<O: Objective>(
    model: &O::Model,
    objective: &O,
    index: usize,
    params: &[usize],
) -> f64 {
    let mut analytic = model.zeros_like();
    objective.loss_and_grad(model, index, &mut analytic);
    let mut probe = model.clone();
    let mut worst = 0.0f64;
    for &p in params {
        let original = probe.param_at(p);
        probe.set_param_at(p, original + FINITE_DIFFERENCE_STEP);
        let plus = objective.loss(&probe, index);
        probe.set_param_at(p, original - FINITE_DIFFERENCE_STEP);
        let minus = objective.loss(&probe, index);
        probe.set_param_at(p, original);
        let numeric = (plus - minus) / (2.0 * FINITE_DIFFERENCE_STEP);
        let a = analytic.param_at(p);
        let denom = a.abs().max(numeric.abs()).max(1e-8);
        worst = worst.max((a - numeric).abs() / denom);
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::sgd::{ClassificationObjective, DistillationObjective, SequenceObjective};
    use crate::nn::{Activation, Architecture, Matrix, MlpModel, RnnAttentionModel};
    use rand::Rng as _;

    fn random_matrix(rows: usize, cols: usize, seed: u64) -> Matrix {
        let mut rng = crate::rng::rng_from_seed(seed);
        Matrix::new(rows, cols, (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
    }

    #[test]
    fn mlp_cross_entropy_gradients() {
        for (seed, activation) in [(1, Activation::Tanh), (2, Activation::Relu), (3, Activation::Tanh)] {
            let model = MlpModel::new(Architecture::new(vec![6, 10, 7, 4], activation), seed).unwrap();
            let x = random_matrix(5, 6, seed + 10);
            let y = vec![0, 1, 2, 3, 1];
            let obj = ClassificationObjective::new(&x, &y).unwrap();
            for i in 0..5 {
                let err = gradient_check(&model, &obj, i);
                assert!(err < 1e-4, "seed {seed} sample {i}: {err}");
            }
        }
    }

    #[test]
    fn mlp_distillation_gradients() {
        let teacher = MlpModel::new(Architecture::new(vec![5, 8, 3], Activation::Tanh), 7).unwrap();
        let student = MlpModel::new(Architecture::new(vec![5, 8, 3], Activation::Tanh), 8).unwrap();
        let x = random_matrix(4, 5, 9);
        let obj = DistillationObjective { features: &x, teacher: &teacher };
        for i in 0..4 {
            assert!(gradient_check(&student, &obj, i) < 1e-4);
        }
    }

    #[test]
    fn rnn_attention_gradients() {
        let model = RnnAttentionModel::new(5, 12, 10, 21).unwrap();
        assert!(model.num_params() <= 5_000);
        let seqs: Vec<Matrix> = (0..4).map(|s| random_matrix(9, 5, 30 + s)).collect();
        let labels = vec![0, 1, 1, 0];
        let obj = SequenceObjective { sequences: &seqs, labels: &labels };
        for i in 0..4 {
            let err = gradient_check(&model, &obj, i);
            assert!(err < 1e-4, "sample {i}: {err}");
        }
    }

    #[test]
    fn flat_directions_give_zero_error() {
        // Dead ReLU units: the loss is exactly constant in every first-layer
        // parameter, so analytic and numeric gradients are both zero.
        let arch = Architecture::new(vec![3, 4, 2], Activation::Relu);
        let model = MlpModel::from_parts(
            arch,
            vec![Matrix::zeros(4, 3), random_matrix(2, 4, 3)],
            vec![vec![-1.0; 4], vec![0.0; 2]],
        )
        .unwrap();
        let x = random_matrix(1, 3, 4);
        let y = vec![1];
        let obj = ClassificationObjective::new(&x, &y).unwrap();
        let first_layer: Vec<usize> = (0..16).collect();
        assert_eq!(gradient_check_subset(&model, &obj, 0, &first_layer), 0.0);
        assert!(gradient_check(&model, &obj, 0) < 1e-6);
    }
}
