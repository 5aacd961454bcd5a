use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_FPR_LEVELS: [f64; 3] = [0.001, 0.01, 0.1];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocReport {
    /// `(fpr, tpr)` from `(0, 0)` to `(1, 1)`.
    pub roc_points: Vec<(f64, f64)>,
    pub auc: f64,
    /// Maximum over all thresholds ("oracle-threshold").
    pub balanced_accuracy: f64,
    /// `(level, tpr)` pairs in the configured order.
    pub tpr_at_fpr: Vec<(f64, f64)>,
    pub n_members: usize,
    pub n_nonmembers: usize,
}

impl RocReport {
    pub fn tpr_at(&self, level: f64) -> f64 {
        tpr_at_level(&self.roc_points, level)
    }
}

fn check(scores: &[f64], truth: &[bool]) -> Result<(usize, usize)> {
    if scores.len() != truth.len() {
        return Err(Error::Shape(format!("{} scores but {} labels", scores.len(), truth.len())));
    }
    if let Some(i) = scores.iter().position(|s| !s.is_finite()) {
        return Err(Error::NonFinite(format!("score at position {i}")));
    }
    let p = truth.iter().filter(|&&t| t).count();
    let n = truth.len() - p;
    if p == 0 || n == 0 {
        return Err(Error::SingleClass);
    }
    Ok((p, n))
}

/// ROC curve over all distinct thresholds; equal scores cross together.
pub fn roc(scores: &[f64], truth: &[bool], fpr_levels: &[f64]) -> Result<RocReport> {
    let (p, n) = check(scores, truth)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut points = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        while i < order.len() && scores[order[i]] == s {
            if truth[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push((fp as f64 / n as f64, tp as f64 / p as f64));
    }
    let auc = points
        .windows(2)
        .map(|w| (w[1].0 - w[0].0) * (w[0].1 + w[1].1) / 2.0)
        .sum();
    let balanced_accuracy = points
        .iter()
        .map(|&(f, t)| (t + 1.0 - f) / 2.0)
        .fold(f64::NEG_INFINITY, f64::max);
    let tpr_at_fpr = fpr_levels.iter().map(|&l| (l, tpr_at_level(&points, l))).collect();
    Ok(RocReport {
        roc_points: points,
        auc,
        balanced_accuracy,
        tpr_at_fpr,
        n_members: p,
        n_nonmembers: n,
    })
}

fn tpr_at_level(points: &[(f64, f64)], level: f64) -> f64 {
    points
        .iter()
        .filter(|(f, _)| *f <= level)
        .map(|(_, t)| *t)
        .fold(0.0, f64::max)
}

/// Probability that a random member outscores a random non-member, ties
/// counted as one half. Quadratic; used as a cross-check.
pub fn auc_oracle(scores: &[f64], truth: &[bool]) -> Result<f64> {
    let (p, n) = check(scores, truth)?;
    let mut wins = 0.0;
    for (i, &si) in scores.iter().enumerate() {
        if !truth[i] {
            continue;
        }
        for (j, &sj) in scores.iter().enumerate() {
            if truth[j] {
                continue;
            }
            if si > sj {
                wins += 1.0;
            } else if si == sj {
                wins += 0.5;
            }
        }
    }
    Ok(wins / (p as f64 * n as f64))
}

/// `(tpr + tnr) / 2` with `score >= threshold` predicted member.
pub fn balanced_accuracy_at(scores: &[f64], truth: &[bool], threshold: f64) -> Result<f64> {
    let (p, n) = check(scores, truth)?;
    let tp = scores.iter().zip(truth).filter(|(s, &t)| t && **s >= threshold).count();
    let tn = scores.iter().zip(truth).filter(|(s, &t)| !t && **s < threshold).count();
    Ok((tp as f64 / p as f64 + tn as f64 / n as f64) / 2.0)
}

/// Threshold maximising balanced accuracy under `score >= threshold`.
/// Ties keep the highest threshold.
pub fn best_threshold(scores: &[f64], truth: &[bool]) -> Result<f64> {
    let (p, n) = check(scores, truth)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    // Start above every score: nothing predicted member.
    let mut best = (0.5, f64::INFINITY);
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        while i < order.len() && scores[order[i]] == s {
            if truth[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        let ba = (tp as f64 / p as f64 + 1.0 - fp as f64 / n as f64) / 2.0;
        if ba > best.0 {
            best = (ba, s);
        }
    }
    Ok(best.1)
}

pub fn roc_csv(report: &RocReport) -> String {
    let mut out = String::from("fpr,tpr\n");
    for (f, t) in &report.roc_points {
        out.push_str(&format!("{f},{t}\n"));
    }
    out
}

/// Writes every ROC point, including the smallest non-zero FPR, for
/// log-scale plotting.
pub fn export_log_roc(report: &RocReport, path: &Path) -> Result<()> {
    std::fs::write(path, roc_csv(report)).map_err(|e| Error::io(path, e))
}

pub fn parse_roc_csv(text: &str) -> Result<Vec<(f64, f64)>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let line = i as u64 + 2;
        let rec = rec.map_err(|e| Error::Parse {
            line,
            message: e.to_string(),
        })?;
        let get = |j: usize| -> Result<f64> {
            rec.get(j)
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| Error::Parse {
                    line,
                    message: format!("column {j} is not a number"),
                })
        };
        out.push((get(0)?, get(1)?));
    }
    Ok(out)
}

pub fn read_roc_csv(path: &Path) -> Result<Vec<(f64, f64)>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_roc_csv(&text)
}
