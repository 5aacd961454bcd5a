//! Membership inference attacks: the sequence attack and its baselines.

mod flat;
mod mba;
mod seqmia;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::Matrix;
use crate::signals::MetricSequenceMatrix;

pub use flat::{attack_loss_set, attack_st, sorted_descending, FlatMlpAttack, LossSetVariant, MlpAttackConfig};
pub use mba::{attack_mba, MbaCalibration, MetricObservation, MBA_MIN_CLASS_SAMPLES};
pub use seqmia::{infer_seqmia, train_seqmia, SeqMiaConfig, SeqMiaModel};

#[derive(Debug, Clone, PartialEq)]
pub struct AttackExample {
    pub sequence: MetricSequenceMatrix,
    pub member: bool,
}

impl AttackExample {
    pub fn new(sequence: MetricSequenceMatrix, member: bool) -> Self {
        Self { sequence, member }
    }
}

/// Membership score for one sample. `attention` is empty for attacks that
/// do not produce one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackScore {
    pub sample_id: usize,
    pub score: f64,
    pub attention: Vec<f64>,
}

/// Per-metric-row standardisation fitted on attack training sequences.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

pub const STD_FLOOR: f64 = 1e-8;

impl Normalizer {
    pub fn identity(k: usize) -> Self {
        Self {
            mean: vec![0.0; k],
            std: vec![1.0; k],
        }
    }

    pub fn fit<'a>(sequences: impl IntoIterator<Item = &'a MetricSequenceMatrix>) -> Result<Self> {
        let mut sum: Vec<f64> = Vec::new();
        let mut sq: Vec<f64> = Vec::new();
        let mut n = 0usize;
        let mut shape = None;
        for s in sequences {
            let (k, steps) = s.values().shape();
            match shape {
                None => {
                    shape = Some((k, steps));
                    sum = vec![0.0; k];
                    sq = vec![0.0; k];
                }
                Some(sh) if sh != (k, steps) => {
                    return Err(Error::Shape(format!("sequence shape {:?} differs from {sh:?}", (k, steps))));
                }
                _ => {}
            }
            for r in 0..k {
                for v in s.values().row(r) {
                    sum[r] += v;
                    sq[r] += v * v;
                }
            }
            n += steps;
        }
        if shape.is_none() {
            return Err(Error::Empty("no sequences to fit a normalizer".into()));
        }
        let nf = n as f64;
        let mean: Vec<f64> = sum.iter().map(|s| s / nf).collect();
        let std = sq
            .iter()
            .zip(&mean)
            .map(|(q, m)| (q / nf - m * m).max(0.0).sqrt().max(STD_FLOOR))
            .collect();
        Ok(Self { mean, std })
    }

    pub fn k(&self) -> usize {
        self.mean.len()
    }

    /// Standardised timestep-major `(n+1) x k` matrix.
    pub fn transform(&self, seq: &MetricSequenceMatrix) -> Result<Matrix> {
        if seq.k() != self.k() {
            return Err(Error::Shape(format!(
                "sequence has {} metric rows, normalizer expects {}",
                seq.k(),
                self.k()
            )));
        }
        let mut out = seq.timestep_major();
        for t in 0..out.rows() {
            for (r, v) in out.row_mut(t).iter_mut().enumerate() {
                *v = (*v - self.mean[r]) / self.std[r];
            }
        }
        Ok(out)
    }
}

pub(crate) fn check_both_classes(members: impl IntoIterator<Item = bool>) -> Result<()> {
    let (mut pos, mut neg) = (false, false);
    for m in members {
        if m {
            pos = true;
        } else {
            neg = true;
        }
    }
    if pos && neg {
        Ok(())
    } else {
        Err(Error::SingleClass)
    }
}

/// Membership probability from two logits.
pub(crate) fn member_probability(logits: &[f64]) -> f64 {
    // softmax(l)[1] = 1 / (1 + exp(l0 - l1))
    1.0 / (1.0 + (logits[0] - logits[1]).exp())
}

/// Scores CSV: `sample_id,true_membership,score,attack_name`.
pub fn scores_csv(attack_name: &str, scores: &[AttackScore], truth: &[bool]) -> Result<String> {
    if scores.len() != truth.len() {
        return Err(Error::Shape(format!("{} scores but {} labels", scores.len(), truth.len())));
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["sample_id", "true_membership", "score", "attack_name"])
        .map_err(csv_err)?;
    for (s, &m) in scores.iter().zip(truth) {
        w.write_record([
            s.sample_id.to_string(),
            (m as u8).to_string(),
            s.score.to_string(),
            attack_name.to_string(),
        ])
        .map_err(csv_err)?;
    }
    finish(w)
}

/// Parsed row of a scores CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreRow {
    pub sample_id: usize,
    pub member: bool,
    pub score: f64,
    pub attack_name: String,
}

pub fn parse_scores_csv(text: &str) -> Result<Vec<ScoreRow>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let line = i as u64 + 2;
        let rec = rec.map_err(|e| Error::Parse {
            line,
            message: e.to_string(),
        })?;
        let field = |j: usize| rec.get(j).ok_or_else(|| Error::Parse { line, message: format!("missing column {j}") });
        let bad = |what: &str| Error::Parse {
            line,
            message: format!("invalid {what}"),
        };
        out.push(ScoreRow {
            sample_id: field(0)?.parse().map_err(|_| bad("sample_id"))?,
            member: match field(1)? {
                "0" => false,
                "1" => true,
                _ => return Err(bad("true_membership")),
            },
            score: field(2)?.parse().map_err(|_| bad("score"))?,
            attack_name: field(3)?.to_string(),
        });
    }
    Ok(out)
}

/// Mean attention per timestep, split into members and non-members.
pub fn mean_attention(scores: &[AttackScore], truth: &[bool]) -> Result<(Vec<f64>, Vec<f64>)> {
    let steps = scores
        .iter()
        .find(|s| !s.attention.is_empty())
        .map(|s| s.attention.len())
        .ok_or_else(|| Error::Empty("no attention vectors".into()))?;
    let mut acc = [vec![0.0; steps], vec![0.0; steps]];
    let mut counts = [0usize; 2];
    for (s, &m) in scores.iter().zip(truth) {
        if s.attention.len() != steps {
            return Err(Error::Shape("attention vectors differ in length".into()));
        }
        let g = m as usize;
        counts[g] += 1;
        for (a, v) in acc[g].iter_mut().zip(&s.attention) {
            *a += v;
        }
    }
    let [non, mem] = acc;
    let avg = |v: Vec<f64>, c: usize| v.into_iter().map(|x| if c == 0 { 0.0 } else { x / c as f64 }).collect();
    Ok((avg(mem, counts[1]), avg(non, counts[0])))
}

/// Attention CSV: `timestep,member_mean,nonmember_mean`.
pub fn attention_csv(scores: &[AttackScore], truth: &[bool]) -> Result<String> {
    let (mem, non) = mean_attention(scores, truth)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["timestep", "member_mean", "nonmember_mean"]).map_err(csv_err)?;
    for (t, (m, n)) in mem.iter().zip(&non).enumerate() {
        w.write_record([t.to_string(), m.to_string(), n.to_string()]).map_err(csv_err)?;
    }
    finish(w)
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn csv_err(e: csv::Error) -> Error {
    Error::Format(e.to_string())
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| Error::Format(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Format(e.to_string()))
}
