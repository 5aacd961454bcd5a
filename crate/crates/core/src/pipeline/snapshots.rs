//! On-disk layout of a snapshot series: `NNN.sqm` model files numbered from
//! one, where the highest number is the original model.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{decode_mlp, encode_mlp};
use crate::pipeline::{DistillConfig, Origin, SnapshotSeries};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotManifest {
    pub run_id: String,
    pub dataset_hash: String,
    pub target_seed: u64,
    pub shadow_seed: u64,
    pub distill: DistillConfig,
    pub files_per_series: usize,
}

pub fn snapshot_file_name(index: usize) -> String {
    format!("{index:03}.sqm")
}

/// `(file name, bytes)` for every model in the series, in order.
pub fn series_files(series: &SnapshotSeries) -> Vec<(String, Vec<u8>)> {
    series
        .snapshots()
        .iter()
        .enumerate()
        .map(|(i, m)| (snapshot_file_name(i + 1), encode_mlp(m)))
        .collect()
}

pub fn read_series(dir: &Path, count: usize, origin: Origin) -> Result<SnapshotSeries> {
    let mut models = Vec::with_capacity(count);
    for i in 1..=count {
        let path = dir.join(snapshot_file_name(i));
        let bytes = std::fs::read(&path).map_err(|e| Error::io(&path, e))?;
        models.push(decode_mlp(&bytes)?);
    }
    SnapshotSeries::new(models, origin)
}
