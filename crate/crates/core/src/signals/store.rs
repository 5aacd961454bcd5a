//! `SQS1` sequence store.
//!
//! Layout (little endian): magic `SQS1`, `u32 k`, `u32 steps`, `u64 count`,
//! `k` metric tag bytes, then per sample `u64 id`, `u8 member`, followed by
//! all sample matrices as `f64` in row-major order.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::nn::Matrix;
use crate::signals::{Metric, MetricSequenceMatrix, MetricSet};

const MAGIC: &[u8; 4] = b"SQS1";

/// Sequences bundled with their membership labels.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceSet {
    pub sequences: Vec<MetricSequenceMatrix>,
    pub members: Vec<bool>,
}

impl SequenceSet {
    pub fn new(sequences: Vec<MetricSequenceMatrix>, members: Vec<bool>) -> Result<Self> {
        if sequences.len() != members.len() {
            return Err(Error::Shape(format!(
                "{} sequences but {} membership labels",
                sequences.len(),
                members.len()
            )));
        }
        if let Some(first) = sequences.first() {
            let shape = first.values().shape();
            if sequences
                .iter()
                .any(|s| s.values().shape() != shape || s.metrics() != first.metrics())
            {
                return Err(Error::Shape("sequences differ in shape or metric set".into()));
            }
        }
        Ok(Self { sequences, members })
    }

    pub fn len(&self) -> usize {
        self.sequences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sequences.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&MetricSequenceMatrix, bool)> {
        self.sequences.iter().zip(self.members.iter().copied())
    }

    pub fn shape(&self) -> Option<(usize, usize)> {
        self.sequences.first().map(|s| s.values().shape())
    }

    pub fn select(&self, subset: &MetricSet) -> Result<Self> {
        Ok(Self {
            sequences: self.sequences.iter().map(|s| s.select(subset)).collect::<Result<_>>()?,
            members: self.members.clone(),
        })
    }

    pub fn encode(&self) -> Result<Vec<u8>> {
        let first = self
            .sequences
            .first()
            .ok_or_else(|| Error::Empty("cannot encode an empty sequence set".into()))?;
        let (k, steps) = first.values().shape();
        let mut out = Vec::with_capacity(24 + k + self.len() * (9 + 8 * k * steps));
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(k as u32).to_le_bytes());
        out.extend_from_slice(&(steps as u32).to_le_bytes());
        out.extend_from_slice(&(self.len() as u64).to_le_bytes());
        out.extend(first.metrics().metrics().iter().map(|m| m.tag()));
        for (s, member) in self.iter() {
            out.extend_from_slice(&(s.sample_id() as u64).to_le_bytes());
            out.push(member as u8);
        }
        for s in &self.sequences {
            for v in s.values().as_slice() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(Error::Format("not an SQS1 sequence file".into()));
        }
        let k = r.u32()? as usize;
        let steps = r.u32()? as usize;
        let count = r.u64()? as usize;
        let metrics = r
            .take(k)?
            .iter()
            .map(|&t| Metric::from_tag(t).ok_or_else(|| Error::Format(format!("unknown metric tag {t}"))))
            .collect::<Result<Vec<_>>>()?;
        let set = MetricSet::new(metrics.iter().copied())?;
        if set.metrics() != metrics.as_slice() {
            return Err(Error::Format("metric tags not in canonical order".into()));
        }
        let mut header = Vec::with_capacity(count.min(1 << 20));
        for _ in 0..count {
            let id = r.u64()? as usize;
            let member = match r.take(1)?[0] {
                0 => false,
                1 => true,
                b => return Err(Error::Format(format!("invalid membership byte {b}"))),
            };
            header.push((id, member));
        }
        let mut sequences = Vec::with_capacity(header.len());
        let mut members = Vec::with_capacity(header.len());
        for (id, member) in header {
            let mut data = Vec::with_capacity(k * steps);
            for _ in 0..k * steps {
                data.push(f64::from_le_bytes(r.take(8)?.try_into().expect("8 bytes")));
            }
            sequences.push(MetricSequenceMatrix::new(Matrix::new(k, steps, data)?, set.clone(), id)?);
            members.push(member);
        }
        if r.pos != bytes.len() {
            return Err(Error::Format(format!("{} trailing bytes", bytes.len() - r.pos)));
        }
        Self::new(sequences, members)
    }

    /// CSV with one row per sample per metric.
    pub fn csv_string(&self) -> Result<String> {
        let steps = self.shape().map_or(0, |s| s.1);
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["sample_id".to_string(), "member".into(), "metric".into()];
        header.extend((0..steps).map(|t| format!("t{t}")));
        w.write_record(&header).map_err(csv_err)?;
        for (s, member) in self.iter() {
            for (r, m) in s.metrics().metrics().iter().enumerate() {
                let mut rec = vec![s.sample_id().to_string(), (member as u8).to_string(), m.as_str().to_string()];
                rec.extend(s.values().row(r).iter().map(|v| v.to_string()));
                w.write_record(&rec).map_err(csv_err)?;
            }
        }
        let bytes = w.into_inner().map_err(|e| Error::Format(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let text = self.csv_string()?;
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Format(e.to_string())
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Format("truncated sequence file".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}
