//! Differentiable primitives with their analytic gradients.
//!
//! Each forward function has a matching `*_backward` (or `*_with_grad`) that
//! returns the vector-Jacobian product for an upstream gradient.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::array::NumericArray;
use crate::error::{Error, Result};
use crate::math;
use crate::VISEME_COUNT;

/// Norms below this are treated as degenerate by [`cosine_similarity`].
pub const DEGENERATE_NORM: f64 = 1e-12;

fn check_same_len(a: &[f64], b: &[f64], what: &str) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::Shape(format!(
            "{what}: lengths {} and {} differ",
            a.len(),
            b.len()
        )));
    }
    Ok(())
}

fn checked_norms(a: &[f64], b: &[f64]) -> Result<(f64, f64)> {
    check_same_len(a, b, "cosine similarity")?;
    let na = math::norm(a);
    let nb = math::norm(b);
    if !(na >= DEGENERATE_NORM) {
        return Err(Error::DegenerateVector(format!("first argument has norm {na:e}")));
    }
    if !(nb >= DEGENERATE_NORM) {
        return Err(Error::DegenerateVector(format!("second argument has norm {nb:e}")));
    }
    Ok((na, nb))
}

/// `a·b / (‖a‖‖b‖)`, clamped into `[-1, 1]`.
pub fn cosine_similarity(a: &[f64], b: &[f64]) -> Result<f64> {
    let (na, nb) = checked_norms(a, b)?;
    Ok((math::dot(a, b) / (na * nb)).clamp(-1.0, 1.0))
}

/// Gradients of `upstream * cos(a, b)` with respect to `a` and `b`.
pub fn cosine_similarity_backward(
    a: &[f64],
    b: &[f64],
    upstream: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let (na, nb) = checked_norms(a, b)?;
    let mut ga = vec![0.0; a.len()];
    let mut gb = vec![0.0; b.len()];
    accumulate_cosine_grad(a, b, na, nb, upstream, &mut ga, &mut gb);
    Ok((ga, gb))
}

/// Adds `upstream * ∂cos/∂a` to `ga` and `upstream * ∂cos/∂b` to `gb`, given
/// precomputed norms.
pub(crate) fn accumulate_cosine_grad(
    a: &[f64],
    b: &[f64],
    na: f64,
    nb: f64,
    upstream: f64,
    ga: &mut [f64],
    gb: &mut [f64],
) {
    let inv = 1.0 / (na * nb);
    let c = math::dot(a, b) * inv;
    let ca = c / (na * na);
    let cb = c / (nb * nb);
    for k in 0..a.len() {
        ga[k] += upstream * (b[k] * inv - ca * a[k]);
        gb[k] += upstream * (a[k] * inv - cb * b[k]);
    }
}

/// Numerically stable `ln Σ exp(x)`.
pub fn log_sum_exp(scores: &[f64]) -> f64 {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + math::ln(scores.iter().map(|&s| math::exp(s - max)).sum::<f64>())
}

/// Softmax with max-subtraction. Empty input gives an empty output.
pub fn softmax(scores: &[f64]) -> Vec<f64> {
    let mut out = scores.to_vec();
    softmax_in_place(&mut out);
    out
}

pub(crate) fn softmax_in_place(values: &mut [f64]) {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for v in values.iter_mut() {
        *v = math::exp(*v - max);
        total += *v;
    }
    let inv = 1.0 / total;
    for v in values.iter_mut() {
        *v *= inv;
    }
}

/// VJP of softmax given its output `probs`.
pub fn softmax_backward(probs: &[f64], upstream: &[f64]) -> Vec<f64> {
    let inner = math::dot(probs, upstream);
    probs
        .iter()
        .zip(upstream)
        .map(|(p, g)| p * (g - inner))
        .collect()
}

/// Average of the rows of a `T×D` array.
pub fn mean_over_time(x: &NumericArray) -> Result<Vec<f64>> {
    let (t, d) = x.expect_matrix("sequence")?;
    if t == 0 {
        return Err(Error::EmptySequence);
    }
    let mut z = vec![0.0; d];
    for row in x.row_iter() {
        for (zk, xk) in z.iter_mut().zip(row) {
            *zk += xk;
        }
    }
    let inv = 1.0 / t as f64;
    z.iter_mut().for_each(|v| *v *= inv);
    Ok(z)
}

/// VJP of [`mean_over_time`]: every row receives `upstream / T`.
pub fn mean_over_time_backward(frames: usize, upstream: &[f64]) -> NumericArray {
    let mut g = NumericArray::zeros(&[frames, upstream.len()]);
    let inv = 1.0 / frames as f64;
    for j in 0..frames {
        for (gk, uk) in g.row_mut(j).iter_mut().zip(upstream) {
            *gk = uk * inv;
        }
    }
    g
}

/// Word-level target: a class index or a full distribution over classes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ClassTarget<'a> {
    Index(usize),
    Distribution(&'a [f64]),
}

fn validate_smoothing(classes: usize, smoothing: f64) -> Result<()> {
    if classes < 2 {
        return Err(Error::Shape(format!(
            "cross entropy needs at least 2 classes, got {classes}"
        )));
    }
    if !(0.0..1.0).contains(&smoothing) {
        return Err(Error::Config(format!(
            "label smoothing must lie in [0, 1), got {smoothing}"
        )));
    }
    Ok(())
}

/// Cross entropy of `softmax(logits)` against the target with label
/// smoothing `(1-ε)·target + ε/C`.
pub fn cross_entropy_smoothed(logits: &[f64], target: ClassTarget<'_>, smoothing: f64) -> Result<f64> {
    let classes = logits.len();
    validate_smoothing(classes, smoothing)?;
    let lse = log_sum_exp(logits);
    let uniform = smoothing / classes as f64;
    match target {
        ClassTarget::Index(t) => {
            if t >= classes {
                return Err(Error::Index { index: t, classes });
            }
            let total: f64 = logits.iter().sum();
            Ok(lse - ((1.0 - smoothing) * logits[t] + uniform * total))
        }
        ClassTarget::Distribution(q) => {
            check_same_len(logits, q, "soft target")?;
            let mut expected = 0.0;
            let mut mass = 0.0;
            for (x, qi) in logits.iter().zip(q) {
                let w = (1.0 - smoothing) * qi + uniform;
                expected += w * x;
                mass += w;
            }
            Ok(mass * lse - expected)
        }
    }
}

/// Loss and gradient with respect to the logits.
pub fn cross_entropy_smoothed_with_grad(
    logits: &[f64],
    target: ClassTarget<'_>,
    smoothing: f64,
) -> Result<(f64, Vec<f64>)> {
    let loss = cross_entropy_smoothed(logits, target, smoothing)?;
    let classes = logits.len();
    let uniform = smoothing / classes as f64;
    let mut grad = softmax(logits);
    match target {
        ClassTarget::Index(t) => {
            for (i, g) in grad.iter_mut().enumerate() {
                let q = if i == t { 1.0 - smoothing + uniform } else { uniform };
                *g -= q;
            }
        }
        ClassTarget::Distribution(q) => {
            let weights: Vec<f64> = q.iter().map(|qi| (1.0 - smoothing) * qi + uniform).collect();
            let mass: f64 = weights.iter().sum();
            for (g, w) in grad.iter_mut().zip(&weights) {
                *g = *g * mass - w;
            }
        }
    }
    Ok((loss, grad))
}

/// Logistic function, evaluated without overflow.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + math::exp(-x))
    } else {
        let e = math::exp(x);
        e / (1.0 + e)
    }
}

fn check_multilabel(logits: &[f64], target: &[f64]) -> Result<()> {
    if logits.len() != VISEME_COUNT || target.len() != VISEME_COUNT {
        return Err(Error::Shape(format!(
            "multi-label loss expects {VISEME_COUNT} logits and targets, got {} and {}",
            logits.len(),
            target.len()
        )));
    }
    if let Some(bad) = target.iter().find(|y| !(0.0..=1.0).contains(*y)) {
        return Err(Error::Shape(format!("multi-label target {bad} outside [0, 1]")));
    }
    Ok(())
}

/// Mean sigmoid binary cross entropy over the 18 viseme labels.
/// Targets may be soft (any value in `[0, 1]`).
pub fn multilabel_bce(logits: &[f64], target: &[f64]) -> Result<f64> {
    check_multilabel(logits, target)?;
    let total: f64 = logits
        .iter()
        .zip(target)
        .map(|(&x, &y)| x.max(0.0) - x * y + math::ln_1p(math::exp(-x.abs())))
        .sum();
    Ok(total / VISEME_COUNT as f64)
}

pub fn multilabel_bce_with_grad(logits: &[f64], target: &[f64]) -> Result<(f64, Vec<f64>)> {
    let loss = multilabel_bce(logits, target)?;
    let scale = 1.0 / VISEME_COUNT as f64;
    let grad = logits
        .iter()
        .zip(target)
        .map(|(&x, &y)| (sigmoid(x) - y) * scale)
        .collect();
    Ok((loss, grad))
}
