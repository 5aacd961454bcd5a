//! Softmax and the two probability losses used for training.

use crate::error::{Error, Result};
use crate::nn::Matrix;

/// Lower bound applied to every probability before taking a logarithm.
pub const PROB_CLAMP: f64 = 1e-12;

/// `ln(max(p, PROB_CLAMP))`, except that NaN stays NaN so divergence is
/// still visible downstream.
#[inline]
pub fn clamped_ln(p: f64) -> f64 {
    if p < PROB_CLAMP {
        PROB_CLAMP.ln()
    } else {
        p.ln()
    }
}

/// Max-subtracted softmax. Errors on non-finite logits.
pub fn softmax(logits: &[f64]) -> Result<Vec<f64>> {
    if logits.is_empty() {
        return Err(Error::Empty("softmax of an empty vector".into()));
    }
    if logits.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("softmax logits".into()));
    }
    let mut out = logits.to_vec();
    softmax_in_place(&mut out);
    Ok(out)
}

/// Unchecked softmax used on hot paths where logits are already validated.
#[inline]
pub fn softmax_in_place(v: &mut [f64]) {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for x in v.iter_mut() {
        *x = (*x - max).exp();
        sum += *x;
    }
    for x in v.iter_mut() {
        *x /= sum;
    }
}

/// Row-wise softmax of a logit matrix.
pub fn softmax_rows(logits: &Matrix) -> Result<Matrix> {
    if !logits.is_finite() {
        return Err(Error::NonFinite("softmax logits".into()));
    }
    let mut out = logits.clone();
    for r in 0..out.rows() {
        softmax_in_place(out.row_mut(r));
    }
    Ok(out)
}

/// Mean of `-ln(p_y)` over the rows.
pub fn cross_entropy_loss(posteriors: &Matrix, labels: &[usize]) -> Result<f64> {
    if posteriors.rows() != labels.len() {
        return Err(Error::Shape(format!(
            "{} posterior rows but {} labels",
            posteriors.rows(),
            labels.len()
        )));
    }
    if labels.is_empty() {
        return Err(Error::Empty("cross-entropy over zero rows".into()));
    }
    let classes = posteriors.cols();
    let mut total = 0.0;
    for (row, &y) in posteriors.row_iter().zip(labels) {
        if y >= classes {
            return Err(Error::LabelOutOfRange { label: y, classes });
        }
        total += -clamped_ln(row[y]);
    }
    Ok(total / labels.len() as f64)
}

/// KL divergence of one teacher row from one student row.
#[inline]
pub fn kl_row(student: &[f64], teacher: &[f64]) -> f64 {
    student
        .iter()
        .zip(teacher)
        .filter(|(_, &t)| t > 0.0)
        .map(|(&s, &t)| t * (clamped_ln(t) - clamped_ln(s)))
        .sum()
}

/// Mean over rows of `sum_i t_i ln(t_i / s_i)`.
pub fn kl_divergence_loss(student: &Matrix, teacher: &Matrix) -> Result<f64> {
    if student.shape() != teacher.shape() {
        return Err(Error::Shape(format!(
            "student {:?} vs teacher {:?}",
            student.shape(),
            teacher.shape()
        )));
    }
    if student.rows() == 0 {
        return Err(Error::Empty("KL divergence over zero rows".into()));
    }
    let total: f64 = student
        .row_iter()
        .zip(teacher.row_iter())
        .map(|(s, t)| kl_row(s, t))
        .sum();
    Ok(total / student.rows() as f64)
}
