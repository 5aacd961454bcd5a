use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitSpec {
    pub target_train: usize,
    pub target_test: usize,
    pub shadow_train: usize,
    pub shadow_test: usize,
    pub distill: usize,
    #[serde(default)]
    pub seed: u64,
}

impl SplitSpec {
    /// The Location row of the usual data-split table.
    pub fn location(seed: u64) -> Self {
        Self {
            target_train: 800,
            target_test: 800,
            shadow_train: 800,
            shadow_test: 800,
            distill: 1400,
            seed,
        }
    }

    pub fn total(&self) -> usize {
        self.target_train + self.target_test + self.shadow_train + self.shadow_test + self.distill
    }

    pub fn violations(&self) -> Vec<String> {
        [
            ("target_train", self.target_train),
            ("target_test", self.target_test),
            ("shadow_train", self.shadow_train),
            ("shadow_test", self.shadow_test),
            ("distill", self.distill),
        ]
        .iter()
        .filter(|(_, n)| *n == 0)
        .map(|(name, _)| format!("split.{name} must be at least 1"))
        .collect()
    }
}

/// Index sets into the parent dataset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DataSplits {
    pub target_train: Vec<usize>,
    pub target_test: Vec<usize>,
    pub shadow_train: Vec<usize>,
    pub shadow_test: Vec<usize>,
    pub distill: Vec<usize>,
}

impl DataSplits {
    pub fn all(&self) -> impl Iterator<Item = &usize> {
        self.target_train
            .iter()
            .chain(&self.target_test)
            .chain(&self.shadow_train)
            .chain(&self.shadow_test)
            .chain(&self.distill)
    }
}

/// Seeded permutation of `0..rows`, cut in order target_train, target_test,
/// shadow_train, shadow_test, distill.
pub fn split(rows: usize, spec: &SplitSpec) -> Result<DataSplits> {
    let v = spec.violations();
    if !v.is_empty() {
        return Err(Error::InvalidConfig(v));
    }
    if spec.total() > rows {
        return Err(Error::InsufficientSamples {
            needed: spec.total(),
            available: rows,
        });
    }
    let mut perm: Vec<usize> = (0..rows).collect();
    perm.shuffle(&mut rng_from_seed(spec.seed));
    let mut rest = perm.as_slice();
    let mut take = |n: usize| {
        let (head, tail) = rest.split_at(n);
        rest = tail;
        head.to_vec()
    };
    Ok(DataSplits {
        target_train: take(spec.target_train),
        target_test: take(spec.target_test),
        shadow_train: take(spec.shadow_train),
        shadow_test: take(spec.shadow_test),
        distill: take(spec.distill),
    })
}
