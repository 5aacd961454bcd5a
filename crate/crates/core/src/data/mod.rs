//! Tabular datasets: synthetic generation, CSV ingestion, and the five-way
//! split used by the attack.

mod csv_io;
mod manifest;
mod split;
mod synthetic;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::nn::Matrix;

pub(crate) use csv_io::csv_string;
pub use csv_io::{load_csv, write_csv};
pub use manifest::DatasetManifest;
pub use split::{split, DataSplits, SplitSpec};
pub use synthetic::{generate_from_prototypes, generate_synthetic, random_prototypes};

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub features: Matrix,
    pub labels: Vec<usize>,
    pub num_classes: usize,
    pub name: String,
}

impl Dataset {
    pub fn new(features: Matrix, labels: Vec<usize>, num_classes: usize, name: impl Into<String>) -> Result<Self> {
        if features.rows() != labels.len() {
            return Err(Error::Shape(format!(
                "{} feature rows but {} labels",
                features.rows(),
                labels.len()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&y| y >= num_classes) {
            return Err(Error::LabelOutOfRange {
                label: bad,
                classes: num_classes,
            });
        }
        Ok(Self {
            features,
            labels,
            num_classes,
            name: name.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            features: self.features.select_rows(indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            num_classes: self.num_classes,
            name: self.name.clone(),
        }
    }

    /// SHA-256 over shape, class count, labels and feature bytes.
    pub fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.features.rows() as u64).to_le_bytes());
        h.update((self.features.cols() as u64).to_le_bytes());
        h.update((self.num_classes as u64).to_le_bytes());
        for &y in &self.labels {
            h.update((y as u64).to_le_bytes());
        }
        for v in self.features.as_slice() {
            h.update(v.to_le_bytes());
        }
        hex::encode(h.finalize())
    }
}
