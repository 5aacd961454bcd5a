use rand::Rng as _;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::nn::Matrix;
use crate::rng::{derive_seed, rng_from_seed, Rng};

const PROTOTYPE_CANDIDATES: usize = 64;

/// Binary class prototypes. Each prototype is the best of a fixed number of
/// random candidates by minimum Hamming distance to those already chosen.
pub fn random_prototypes(num_classes: usize, dim: usize, seed: u64) -> Vec<Vec<bool>> {
    let mut rng = rng_from_seed(seed);
    let target = dim / 2;
    let mut chosen: Vec<Vec<bool>> = Vec::with_capacity(num_classes);
    for _ in 0..num_classes {
        let mut best: Option<(usize, Vec<bool>)> = None;
        for _ in 0..PROTOTYPE_CANDIDATES {
            let candidate: Vec<bool> = (0..dim).map(|_| rng.random_bool(0.5)).collect();
            let min_dist = chosen
                .iter()
                .map(|p| p.iter().zip(&candidate).filter(|(a, b)| a != b).count())
                .min()
                .unwrap_or(dim);
            if best.as_ref().is_none_or(|(d, _)| min_dist > *d) {
                best = Some((min_dist, candidate));
            }
            if min_dist >= target {
                break;
            }
        }
        chosen.push(best.expect("at least one candidate").1);
    }
    chosen
}

/// Samples `n_per_class` noisy copies of every prototype, flipping each bit
/// independently with probability `flip_prob`. Rows are class-major.
pub fn generate_from_prototypes(
    prototypes: &[Vec<bool>],
    n_per_class: usize,
    flip_prob: f64,
    seed: u64,
    name: &str,
) -> Result<Dataset> {
    if !(0.0..0.5).contains(&flip_prob) {
        return Err(Error::InvalidConfig(vec![format!(
            "flip_prob must lie in [0, 0.5), got {flip_prob} (classes would be indistinguishable)"
        )]));
    }
    let num_classes = prototypes.len();
    let dim = prototypes.first().map_or(0, Vec::len);
    if num_classes == 0 || dim == 0 || n_per_class == 0 {
        return Err(Error::Empty("synthetic dataset with zero classes, features or samples".into()));
    }
    let mut rng: Rng = rng_from_seed(seed);
    let rows = num_classes * n_per_class;
    let mut data = Vec::with_capacity(rows * dim);
    let mut labels = Vec::with_capacity(rows);
    for (class, proto) in prototypes.iter().enumerate() {
        for _ in 0..n_per_class {
            for &bit in proto {
                let flipped = flip_prob > 0.0 && rng.random_bool(flip_prob);
                data.push(if bit != flipped { 1.0 } else { 0.0 });
            }
            labels.push(class);
        }
    }
    Dataset::new(Matrix::new(rows, dim, data)?, labels, num_classes, name)
}

/// Location-like synthetic data: random binary prototypes per class with
/// independent bit flips.
pub fn generate_synthetic(
    num_classes: usize,
    dim: usize,
    n_per_class: usize,
    flip_prob: f64,
    seed: u64,
) -> Result<Dataset> {
    if dim < num_classes {
        return Err(Error::InvalidConfig(vec![format!(
            "dim ({dim}) must be at least num_classes ({num_classes})"
        )]));
    }
    if !(0.0..0.5).contains(&flip_prob) {
        return Err(Error::InvalidConfig(vec![format!(
            "flip_prob must lie in [0, 0.5), got {flip_prob} (classes would be indistinguishable)"
        )]));
    }
    let prototypes = random_prototypes(num_classes, dim, derive_seed(seed, "prototypes"));
    generate_from_prototypes(&prototypes, n_per_class, flip_prob, derive_seed(seed, "samples"), "synthetic")
}
