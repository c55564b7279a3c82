//! Temporal attention fusion over class prototypes.
//!
//! For a sequence `X` (`T×D`) and prototype matrix `W` (`C×D`, one row per
//! class), each class attends over time with weights
//! `α_i = softmax_j(γ · cos(X_j, W_i))`, giving an attentive embedding
//! `z̃_i = Σ_j α_ij X_j`. It is fused with the plain temporal mean `z` as
//! `f_i = z + λ z̃_i`, and the class logit is `W_i · f_i`.
//!
//! With [`GammaMode::Infinite`] the softmax is replaced by an exact argmax
//! (global max pooling of the cosine scores), ties going to the earliest
//! frame.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::array::NumericArray;
use crate::error::{Error, Result};
use crate::math;
use crate::ops::{self, DEGENERATE_NORM};

pub const DEFAULT_LAMBDA: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum GammaMode {
    Finite { gamma: f64 },
    Infinite,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TafmConfig {
    pub gamma: GammaMode,
    pub lambda: f64,
}

impl Default for TafmConfig {
    fn default() -> Self {
        Self {
            gamma: GammaMode::Infinite,
            lambda: DEFAULT_LAMBDA,
        }
    }
}

impl TafmConfig {
    pub fn finite(gamma: f64, lambda: f64) -> Self {
        Self {
            gamma: GammaMode::Finite { gamma },
            lambda,
        }
    }

    pub fn infinite(lambda: f64) -> Self {
        Self {
            gamma: GammaMode::Infinite,
            lambda,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let GammaMode::Finite { gamma } = self.gamma {
            if !(gamma.is_finite() && gamma > 0.0) {
                return Err(Error::Config(format!("gamma must be positive and finite, got {gamma}")));
            }
        }
        check_lambda(self.lambda)
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(Error::Config(format!("lambda must be finite and >= 0, got {lambda}")));
    }
    Ok(())
}

/// Everything computed by [`tafm_forward`]; retained for the backward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct TafmOutput {
    /// `C×T`, each row a probability vector over frames.
    pub alpha: NumericArray,
    /// `C×T` cosine similarities between frames and prototypes.
    pub cosines: NumericArray,
    pub z: Vec<f64>,
    /// `C×D`
    pub z_tilde: NumericArray,
    /// `C×D`
    pub fused: NumericArray,
    pub logits: Vec<f64>,
}

fn row_norms(a: &NumericArray, what: &str) -> Result<Vec<f64>> {
    a.row_iter()
        .enumerate()
        .map(|(i, row)| {
            let n = math::norm(row);
            if n >= DEGENERATE_NORM {
                Ok(n)
            } else {
                Err(Error::DegenerateVector(format!("row {i} of {what} has norm {n:e}")))
            }
        })
        .collect()
}

fn check_pair(x: &NumericArray, w: &NumericArray) -> Result<(usize, usize, usize)> {
    let (t, d) = x.expect_matrix("X")?;
    let (c, dw) = w.expect_matrix("W")?;
    if t == 0 {
        return Err(Error::EmptySequence);
    }
    if d != dw {
        return Err(Error::Shape(format!("X has {d} features but W rows have {dw}")));
    }
    Ok((t, d, c))
}

fn cosine_matrix(x: &NumericArray, w: &NumericArray) -> Result<NumericArray> {
    let (t, _, c) = check_pair(x, w)?;
    let x_norms = row_norms(x, "X")?;
    let w_norms = row_norms(w, "W")?;
    let mut cos = NumericArray::zeros(&[c, t]);
    for i in 0..c {
        let wi = w.row(i);
        let out = cos.row_mut(i);
        for j in 0..t {
            out[j] = (math::dot(x.row(j), wi) / (x_norms[j] * w_norms[i])).clamp(-1.0, 1.0);
        }
    }
    Ok(cos)
}

fn alpha_from_cosines(cosines: &NumericArray, mode: GammaMode) -> NumericArray {
    let mut alpha = cosines.clone();
    for i in 0..alpha.rows() {
        let row = alpha.row_mut(i);
        match mode {
            GammaMode::Finite { gamma } => {
                row.iter_mut().for_each(|v| *v *= gamma);
                ops::softmax_in_place(row);
            }
            GammaMode::Infinite => {
                let mut best = 0;
                for j in 1..row.len() {
                    if row[j] > row[best] {
                        best = j;
                    }
                }
                row.fill(0.0);
                row[best] = 1.0;
            }
        }
    }
    alpha
}

/// Attention of every class over every frame, `C×T`.
pub fn attention_scores(x: &NumericArray, w: &NumericArray, config: &TafmConfig) -> Result<NumericArray> {
    config.validate()?;
    let cos = cosine_matrix(x, w)?;
    Ok(alpha_from_cosines(&cos, config.gamma))
}

/// `z̃_i = Σ_j α_ij X_j`, `C×D`.
pub fn attentive_embeddings(x: &NumericArray, alpha: &NumericArray) -> Result<NumericArray> {
    let (t, d) = x.expect_matrix("X")?;
    let (c, ta) = alpha.expect_matrix("alpha")?;
    if t != ta {
        return Err(Error::Shape(format!("alpha covers {ta} frames but X has {t}")));
    }
    let mut z_tilde = NumericArray::zeros(&[c, d]);
    for i in 0..c {
        let weights = alpha.row(i);
        let out = z_tilde.row_mut(i);
        for (j, &a) in weights.iter().enumerate() {
            math::axpy(out, a, x.row(j));
        }
    }
    Ok(z_tilde)
}

/// `f_i = z + λ z̃_i` for every class.
pub fn fuse_features(z: &[f64], z_tilde: &NumericArray, lambda: f64) -> Result<NumericArray> {
    check_lambda(lambda)?;
    let (c, d) = z_tilde.expect_matrix("z_tilde")?;
    if z.len() != d {
        return Err(Error::Shape(format!("z has {} features, z_tilde rows have {d}", z.len())));
    }
    let mut fused = NumericArray::zeros(&[c, d]);
    for i in 0..c {
        for ((f, zk), zt) in fused.row_mut(i).iter_mut().zip(z).zip(z_tilde.row(i)) {
            *f = zk + lambda * zt;
        }
    }
    Ok(fused)
}

/// `logit_i = W_i · f_i`.
pub fn class_logits(fused: &NumericArray, w: &NumericArray) -> Result<Vec<f64>> {
    if fused.shape() != w.shape() {
        return Err(Error::Shape(format!(
            "fused features {:?} and prototypes {:?} differ",
            fused.shape(),
            w.shape()
        )));
    }
    w.expect_matrix("W")?;
    Ok(fused
        .row_iter()
        .zip(w.row_iter())
        .map(|(f, wi)| math::dot(wi, f))
        .collect())
}

pub fn tafm_forward(x: &NumericArray, w: &NumericArray, config: &TafmConfig) -> Result<TafmOutput> {
    config.validate()?;
    let cosines = cosine_matrix(x, w)?;
    let alpha = alpha_from_cosines(&cosines, config.gamma);
    let z = ops::mean_over_time(x)?;
    let z_tilde = attentive_embeddings(x, &alpha)?;
    let fused = fuse_features(&z, &z_tilde, config.lambda)?;
    let logits = class_logits(&fused, w)?;
    Ok(TafmOutput {
        alpha,
        cosines,
        z,
        z_tilde,
        fused,
        logits,
    })
}

/// Backward of [`class_logits`]: returns `(d_fused, dW)` for upstream `g`,
/// with `d_fused_i = g_i W_i` and `dW_i = g_i f_i`.
pub fn class_logits_backward(
    fused: &NumericArray,
    w: &NumericArray,
    upstream: &[f64],
) -> Result<(NumericArray, NumericArray)> {
    let (c, d) = w.expect_matrix("W")?;
    if fused.shape() != w.shape() || upstream.len() != c {
        return Err(Error::Shape(format!(
            "fused {:?}, prototypes {:?}, {} upstream values",
            fused.shape(),
            w.shape(),
            upstream.len()
        )));
    }
    let mut d_fused = NumericArray::zeros(&[c, d]);
    let mut dw = NumericArray::zeros(&[c, d]);
    for (i, &g) in upstream.iter().enumerate() {
        math::axpy(d_fused.row_mut(i), g, w.row(i));
        math::axpy(dw.row_mut(i), g, fused.row(i));
    }
    Ok((d_fused, dw))
}

/// Backward of [`fuse_features`]: returns `(dz, dz̃)`.
pub fn fuse_features_backward(d_fused: &NumericArray, lambda: f64) -> Result<(Vec<f64>, NumericArray)> {
    check_lambda(lambda)?;
    let (_, d) = d_fused.expect_matrix("d_fused")?;
    let mut dz = vec![0.0; d];
    for row in d_fused.row_iter() {
        math::axpy(&mut dz, 1.0, row);
    }
    let mut d_zt = d_fused.clone();
    d_zt.scale(lambda);
    Ok((dz, d_zt))
}

/// Backward of [`attentive_embeddings`]: returns `(dX, dα)`.
pub fn attentive_embeddings_backward(
    x: &NumericArray,
    alpha: &NumericArray,
    d_z_tilde: &NumericArray,
) -> Result<(NumericArray, NumericArray)> {
    let (t, d) = x.expect_matrix("X")?;
    let (c, ta) = alpha.expect_matrix("alpha")?;
    if ta != t || d_z_tilde.shape() != [c, d] {
        return Err(Error::Shape(format!(
            "X {:?}, alpha {:?}, upstream {:?}",
            x.shape(),
            alpha.shape(),
            d_z_tilde.shape()
        )));
    }
    let mut dx = NumericArray::zeros(&[t, d]);
    let mut d_alpha = NumericArray::zeros(&[c, t]);
    for i in 0..c {
        let g = d_z_tilde.row(i);
        let a = alpha.row(i);
        for j in 0..t {
            if a[j] != 0.0 {
                math::axpy(dx.row_mut(j), a[j], g);
            }
            d_alpha.row_mut(i)[j] = math::dot(g, x.row(j));
        }
    }
    Ok((dx, d_alpha))
}

/// Backward of [`attention_scores`]: returns `(dX, dW)` given the forward
/// `alpha` and its upstream gradient.
///
/// In infinite mode the frame selection is piecewise constant, so the
/// contribution is zero.
pub fn attention_scores_backward(
    x: &NumericArray,
    w: &NumericArray,
    config: &TafmConfig,
    alpha: &NumericArray,
    d_alpha: &NumericArray,
) -> Result<(NumericArray, NumericArray)> {
    let (t, d, c) = check_pair(x, w)?;
    if alpha.shape() != [c, t] || d_alpha.shape() != [c, t] {
        return Err(Error::Shape(format!(
            "alpha {:?} / upstream {:?} for {c} classes over {t} frames",
            alpha.shape(),
            d_alpha.shape()
        )));
    }
    let mut dx = NumericArray::zeros(&[t, d]);
    let mut dw = NumericArray::zeros(&[c, d]);
    let GammaMode::Finite { gamma } = config.gamma else {
        return Ok((dx, dw));
    };
    let x_norms = row_norms(x, "X")?;
    let w_norms = row_norms(w, "W")?;
    for i in 0..c {
        let d_scores = ops::softmax_backward(alpha.row(i), d_alpha.row(i));
        let wi = w.row(i);
        for j in 0..t {
            let d_cos = gamma * d_scores[j];
            ops::accumulate_cosine_grad(x.row(j), wi, x_norms[j], w_norms[i], d_cos, dx.row_mut(j), dw.row_mut(i));
        }
    }
    Ok((dx, dw))
}

/// Gradients of `Σ_i upstream_i · logit_i` with respect to `X` and `W`,
/// chaining the component backward passes.
pub fn tafm_backward(
    x: &NumericArray,
    w: &NumericArray,
    config: &TafmConfig,
    output: &TafmOutput,
    upstream: &[f64],
) -> Result<(NumericArray, NumericArray)> {
    let (t, _, _) = check_pair(x, w)?;
    let (d_fused, mut dw) = class_logits_backward(&output.fused, w, upstream)?;
    let (dz, d_zt) = fuse_features_backward(&d_fused, config.lambda)?;
    let (mut dx, d_alpha) = attentive_embeddings_backward(x, &output.alpha, &d_zt)?;
    let (dx_att, dw_att) = attention_scores_backward(x, w, config, &output.alpha, &d_alpha)?;
    math::axpy(dx.data_mut(), 1.0, dx_att.data());
    math::axpy(dw.data_mut(), 1.0, dw_att.data());
    let inv_t = 1.0 / t as f64;
    for j in 0..t {
        math::axpy(dx.row_mut(j), inv_t, &dz);
    }
    Ok((dx, dw))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn random_matrix(rng: &mut crate::rng::Rng, rows: usize, cols: usize) -> NumericArray {
        let data = (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect();
        NumericArray::from_vec(vec![rows, cols], data).unwrap()
    }

    /// Straight-loop reference for all five outputs, written without any
    /// of the module's helpers.
    struct Oracle {
        alpha: Vec<Vec<f64>>,
        z: Vec<f64>,
        z_tilde: Vec<Vec<f64>>,
        fused: Vec<Vec<f64>>,
        logits: Vec<f64>,
    }

    fn oracle(x: &[Vec<f64>], w: &[Vec<f64>], gamma: f64, lambda: f64) -> Oracle {
        let t = x.len();
        let d = x[0].len();
        let cos = |a: &[f64], b: &[f64]| {
            let mut ab = 0.0;
            let mut aa = 0.0;
            let mut bb = 0.0;
            for k in 0..a.len() {
                ab += a[k] * b[k];
                aa += a[k] * a[k];
                bb += b[k] * b[k];
            }
            ab / (aa.sqrt() * bb.sqrt())
        };
        let mut alpha = Vec::new();
        for wi in w {
            let e: Vec<f64> = x.iter().map(|xj| (gamma * cos(xj, wi)).exp()).collect();
            let s: f64 = e.iter().sum();
            alpha.push(e.iter().map(|v| v / s).collect::<Vec<_>>());
        }
        let mut z = vec![0.0; d];
        for xj in x {
            for k in 0..d {
                z[k] += xj[k] / t as f64;
            }
        }
        let mut z_tilde = Vec::new();
        let mut fused = Vec::new();
        let mut logits = Vec::new();
        for (i, wi) in w.iter().enumerate() {
            let mut zt = vec![0.0; d];
            for j in 0..t {
                for k in 0..d {
                    zt[k] += alpha[i][j] * x[j][k];
                }
            }
            let f: Vec<f64> = (0..d).map(|k| z[k] + lambda * zt[k]).collect();
            logits.push((0..d).map(|k| wi[k] * f[k]).sum());
            z_tilde.push(zt);
            fused.push(f);
        }
        Oracle {
            alpha,
            z,
            z_tilde,
            fused,
            logits,
        }
    }

    fn rows(a: &NumericArray) -> Vec<Vec<f64>> {
        a.row_iter().map(<[f64]>::to_vec).collect()
    }

    fn assert_close(a: &[f64], b: &[f64], tol: f64) {
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() <= tol, "{x} vs {y}");
        }
    }

    #[test]
    fn single_frame_gets_all_attention() {
        let mut rng = crate::rng::stream(1, &[]);
        let x = random_matrix(&mut rng, 1, 4);
        let w = random_matrix(&mut rng, 3, 4);
        for cfg in [TafmConfig::finite(0.5, 0.1), TafmConfig::finite(50.0, 0.1), TafmConfig::infinite(0.1)] {
            let alpha = attention_scores(&x, &w, &cfg).unwrap();
            assert_eq!(alpha.data(), &[1.0, 1.0, 1.0]);
        }
    }

    #[test]
    fn tiny_gamma_is_nearly_uniform() {
        let mut rng = crate::rng::stream(2, &[]);
        let x = random_matrix(&mut rng, 7, 3);
        let w = random_matrix(&mut rng, 4, 3);
        let alpha = attention_scores(&x, &w, &TafmConfig::finite(1e-8, 0.1)).unwrap();
        assert!(alpha.data().iter().all(|a| (a - 1.0 / 7.0).abs() < 1e-6));
    }

    #[test]
    fn attention_matches_scalar_oracle() {
        let mut rng = crate::rng::stream(3, &[]);
        let x = random_matrix(&mut rng, 3, 2);
        let w = random_matrix(&mut rng, 2, 2);
        let alpha = attention_scores(&x, &w, &TafmConfig::finite(4.0, 0.1)).unwrap();
        let want = oracle(&rows(&x), &rows(&w), 4.0, 0.1);
        for i in 0..2 {
            assert_close(alpha.row(i), &want.alpha[i], 1e-12);
        }
    }

    #[test]
    fn degenerate_rows_are_identified() {
        let x = NumericArray::from_rows(&[vec![1.0, 0.0], vec![0.0, 0.0]]).unwrap();
        let w = NumericArray::from_rows(&[vec![1.0, 1.0]]).unwrap();
        match attention_scores(&x, &w, &TafmConfig::default()) {
            Err(Error::DegenerateVector(msg)) => assert!(msg.contains("row 1 of X"), "{msg}"),
            other => panic!("{other:?}"),
        }
        let w0 = NumericArray::from_rows(&[vec![1.0, 1.0], vec![0.0, 0.0]]).unwrap();
        match attention_scores(&x.clone(), &w0, &TafmConfig::default()) {
            Err(Error::DegenerateVector(msg)) => assert!(msg.contains("of X") || msg.contains("of W")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn attentive_embedding_examples() {
        let mut rng = crate::rng::stream(4, &[]);
        let x = random_matrix(&mut rng, 4, 3);
        let uniform = NumericArray::from_vec(vec![2, 4], vec![0.25; 8]).unwrap();
        let zt = attentive_embeddings(&x, &uniform).unwrap();
        let z = ops::mean_over_time(&x).unwrap();
        assert_close(zt.row(0), &z, 1e-15);
        assert_close(zt.row(1), &z, 1e-15);

        let mut onehot = NumericArray::zeros(&[1, 4]);
        onehot.data_mut()[2] = 1.0;
        let zt = attentive_embeddings(&x, &onehot).unwrap();
        assert_eq!(zt.row(0), x.row(2));

        let bad = NumericArray::zeros(&[1, 3]);
        assert!(matches!(attentive_embeddings(&x, &bad), Err(Error::Shape(_))));
    }

    #[test]
    fn attentive_embedding_matches_elementwise_oracle() {
        let mut rng = crate::rng::stream(5, &[]);
        let x = random_matrix(&mut rng, 4, 3);
        let mut alpha = random_matrix(&mut rng, 2, 4);
        alpha.data_mut().iter_mut().for_each(|a| *a = a.abs());
        let zt = attentive_embeddings(&x, &alpha).unwrap();
        for i in 0..2 {
            for k in 0..3 {
                let want: f64 = (0..4).map(|j| alpha.row(i)[j] * x.row(j)[k]).sum();
                assert!((zt.row(i)[k] - want).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn fusion_examples() {
        let z = vec![1.0, -2.0];
        let zt = NumericArray::from_rows(&[vec![3.0, 4.0], vec![-1.0, 0.5]]).unwrap();
        let f = fuse_features(&z, &zt, 0.0).unwrap();
        assert_eq!(f.row(0), z.as_slice());
        assert_eq!(f.row(1), z.as_slice());
        let f = fuse_features(&z, &zt, 0.1).unwrap();
        assert_close(f.row(0), &[1.0 + 0.1 * 3.0, -2.0 + 0.1 * 4.0], 1e-15);
        assert_close(f.row(1), &[1.0 - 0.1, -2.0 + 0.05], 1e-15);
        assert!(matches!(fuse_features(&z, &zt, -0.1), Err(Error::Config(_))));
    }

    #[test]
    fn single_frame_fusion_scales_the_frame() {
        let x = NumericArray::from_rows(&[vec![0.5, -1.5, 2.0]]).unwrap();
        let w = NumericArray::from_rows(&[vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 1.0]]).unwrap();
        let out = tafm_forward(&x, &w, &TafmConfig::finite(3.0, 0.1)).unwrap();
        for i in 0..2 {
            assert_close(out.fused.row(i), &[0.55, -1.65, 2.2], 1e-15);
        }
    }

    #[test]
    fn logits_examples() {
        let f = NumericArray::from_rows(&[vec![1.0, 0.0], vec![2.0, 3.0]]).unwrap();
        let w = NumericArray::from_rows(&[vec![0.0, 5.0], vec![-1.0, 0.5]]).unwrap();
        let logits = class_logits(&f, &w).unwrap();
        assert_eq!(logits, vec![0.0, -2.0 + 1.5]);
        let wrong = NumericArray::zeros(&[3, 2]);
        assert!(matches!(class_logits(&f, &wrong), Err(Error::Shape(_))));
    }

    #[test]
    fn zero_lambda_reduces_to_mean_pooling_head() {
        let mut rng = crate::rng::stream(6, &[]);
        for _ in 0..20 {
            let x = random_matrix(&mut rng, 6, 5);
            let w = random_matrix(&mut rng, 4, 5);
            let out = tafm_forward(&x, &w, &TafmConfig::finite(8.0, 0.0)).unwrap();
            let z = ops::mean_over_time(&x).unwrap();
            let linear: Vec<f64> = w.row_iter().map(|wi| math::dot(wi, &z)).collect();
            assert_eq!(out.logits, linear);
        }
    }

    #[test]
    fn full_forward_matches_straight_loop_oracle() {
        let mut rng = crate::rng::stream(7, &[]);
        let x = random_matrix(&mut rng, 5, 4);
        let w = random_matrix(&mut rng, 3, 4);
        let out = tafm_forward(&x, &w, &TafmConfig::finite(8.0, 0.1)).unwrap();
        let want = oracle(&rows(&x), &rows(&w), 8.0, 0.1);
        assert_close(&out.z, &want.z, 1e-12);
        assert_close(&out.logits, &want.logits, 1e-12);
        for i in 0..3 {
            assert_close(out.alpha.row(i), &want.alpha[i], 1e-12);
            assert_close(out.z_tilde.row(i), &want.z_tilde[i], 1e-12);
            assert_close(out.fused.row(i), &want.fused[i], 1e-12);
        }
    }

    #[test]
    fn infinite_mode_selects_argmax_frame() {
        let x = NumericArray::from_rows(&[vec![1.0, 0.1], vec![0.1, 1.0], vec![1.0, 1.0]]).unwrap();
        let w = NumericArray::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.9]]).unwrap();
        let out = tafm_forward(&x, &w, &TafmConfig::infinite(0.1)).unwrap();
        assert_eq!(out.alpha.row(0), &[1.0, 0.0, 0.0]);
        assert_eq!(out.alpha.row(1), &[0.0, 1.0, 0.0]);
        assert_eq!(out.alpha.row(2), &[0.0, 0.0, 1.0]);
        for (i, j) in [(0, 0), (1, 1), (2, 2)] {
            assert_eq!(out.z_tilde.row(i), x.row(j));
        }
    }

    #[test]
    fn infinite_mode_breaks_ties_by_earliest_frame() {
        let x = NumericArray::from_rows(&[vec![0.0, 1.0], vec![2.0, 0.0], vec![3.0, 0.0]]).unwrap();
        let w = NumericArray::from_rows(&[vec![1.0, 0.0]]).unwrap();
        let alpha = attention_scores(&x, &w, &TafmConfig::infinite(0.1)).unwrap();
        assert_eq!(alpha.data(), &[0.0, 1.0, 0.0]);
    }

    #[test]
    fn config_validation() {
        assert!(TafmConfig::finite(0.0, 0.1).validate().is_err());
        assert!(TafmConfig::finite(f64::INFINITY, 0.1).validate().is_err());
        assert!(TafmConfig::finite(1.0, f64::NAN).validate().is_err());
        assert!(TafmConfig::default().validate().is_ok());
    }
}
