use serde::{Deserialize, Serialize};

use crate::data::{Dataset, SplitSpec};

/// Provenance record written next to every dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub name: String,
    pub seed: u64,
    pub rows: usize,
    pub dim: usize,
    pub num_classes: usize,
    pub split: SplitSpec,
    pub content_hash: String,
    /// Ingestion never rescales features; recorded so downstream readers know.
    pub normalization: String,
}

impl DatasetManifest {
    pub fn new(dataset: &Dataset, seed: u64, split: SplitSpec) -> Self {
        Self {
            name: dataset.name.clone(),
            seed,
            rows: dataset.len(),
            dim: dataset.dim(),
            num_classes: dataset.num_classes,
            split,
            content_hash: dataset.content_hash(),
            normalization: "none".into(),
        }
    }
}
