use std::path::Path;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::nn::Matrix;

/// Reads `label,f0,f1,...` CSV. The class count is one past the largest label.
pub fn load_csv(path: &Path) -> Result<Dataset> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).flexible(true).from_reader(file);

    let header = reader.headers().map_err(|e| parse_error(&e, 1))?.clone();
    if header.is_empty() || header.get(0).map(str::trim) != Some("label") {
        return Err(Error::Parse {
            line: 1,
            message: "header must start with `label`".into(),
        });
    }
    let dim = header.len() - 1;
    let mut data = Vec::new();
    let mut labels = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| parse_error(&e, 0))?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != header.len() {
            return Err(Error::Parse {
                line,
                message: format!("expected {} columns, found {}", header.len(), record.len()),
            });
        }
        let label = record[0].trim().parse::<usize>().map_err(|_| Error::Parse {
            line,
            message: format!("label `{}` is not a non-negative integer", &record[0]),
        })?;
        labels.push(label);
        for (c, cell) in record.iter().enumerate().skip(1) {
            let v = cell.trim().parse::<f64>().map_err(|_| Error::Parse {
                line,
                message: format!("column {c}: `{cell}` is not numeric"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    line,
                    message: format!("column {c}: non-finite value"),
                });
            }
            data.push(v);
        }
    }
    if labels.is_empty() {
        return Err(Error::Parse {
            line: 1,
            message: "file contains no data rows".into(),
        });
    }
    let num_classes = labels.iter().max().map_or(0, |m| m + 1);
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    Dataset::new(Matrix::new(labels.len(), dim, data)?, labels, num_classes, name)
}

fn parse_error(e: &csv::Error, fallback_line: u64) -> Error {
    Error::Parse {
        line: e.position().map_or(fallback_line, |p| p.line()),
        message: e.to_string(),
    }
}

/// Writes the format [`load_csv`] reads. Values use the shortest
/// representation that round-trips.
pub fn write_csv(dataset: &Dataset, path: &Path) -> Result<()> {
    std::fs::write(path, csv_string(dataset)).map_err(|e| Error::io(path, e))
}

pub(crate) fn csv_string(dataset: &Dataset) -> String {
    use std::fmt::Write as _;
    let mut out = String::from("label");
    for c in 0..dataset.dim() {
        write!(out, ",f{c}").expect("string write");
    }
    out.push('\n');
    for (row, y) in dataset.features.row_iter().zip(&dataset.labels) {
        write!(out, "{y}").expect("string write");
        for v in row {
            write!(out, ",{v}").expect("string write");
        }
        out.push('\n');
    }
    out
}
