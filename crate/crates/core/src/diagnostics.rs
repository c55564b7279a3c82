//! The gradient-check suite: every differentiable operation, the fusion
//! module in both modes, the encoder layer, and the end-to-end loss on a
//! tiny model, each against central finite differences.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::array::NumericArray;
use crate::error::{Error, Result};
use crate::gradcheck::{self, GradCheckReport};
use crate::model::{self, ModelConfig, ModelState, WordTarget};
use crate::ops::{self, ClassTarget};
use crate::rng::{self, Rng};
use crate::tafm::{self, TafmConfig};
use crate::train::random_features;
use crate::VISEME_COUNT;

/// Tolerance on the max relative error.
pub const DEFAULT_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub report: GradCheckReport,
}

impl CheckResult {
    pub fn passed(&self) -> bool {
        self.report.passed()
    }
}

#[derive(Debug, Clone, Default)]
pub struct SuiteOptions {
    /// Defaults to [`DEFAULT_TOLERANCE`].
    pub tolerance: Option<f64>,
    /// Name of a check whose analytic gradient is deliberately corrupted,
    /// to confirm that the suite can fail.
    pub inject_fault: Option<String>,
    pub seed: u64,
}

type CheckFn = fn(&mut Rng, f64, bool) -> Result<GradCheckReport>;

const CHECKS: &[(&str, CheckFn)] = &[
    ("cosine_similarity", check_cosine),
    ("softmax", check_softmax),
    ("log_sum_exp", check_log_sum_exp),
    ("mean_over_time", check_mean),
    ("cross_entropy_hard", check_ce_hard),
    ("cross_entropy_soft", check_ce_soft),
    ("multilabel_bce", check_bce),
    ("attention_scores", check_attention_scores),
    ("attentive_embeddings", check_attentive_embeddings),
    ("fuse_features", check_fuse),
    ("class_logits", check_class_logits),
    ("tafm_finite", check_tafm_finite),
    ("tafm_infinite", check_tafm_infinite),
    ("temporal_conv", check_conv),
    ("total_loss", check_total_loss),
];

pub fn check_names() -> impl Iterator<Item = &'static str> {
    CHECKS.iter().map(|(n, _)| *n)
}

pub fn run_suite(options: &SuiteOptions) -> Result<Vec<CheckResult>> {
    if let Some(target) = &options.inject_fault {
        if !CHECKS.iter().any(|(n, _)| n == target) {
            return Err(Error::Config(format!("unknown check `{target}`")));
        }
    }
    let tolerance = options.tolerance.unwrap_or(DEFAULT_TOLERANCE);
    CHECKS
        .iter()
        .enumerate()
        .map(|(i, (name, check))| {
            let mut rng = rng::stream(options.seed, &[i as u64]);
            let fault = options.inject_fault.as_deref() == Some(*name);
            Ok(CheckResult {
                name,
                report: check(&mut rng, tolerance, fault)?,
            })
        })
        .collect()
}

fn corrupt(grads: &mut [NumericArray], fault: bool) {
    if fault {
        if let Some(g) = grads.first_mut().and_then(|g| g.data_mut().first_mut()) {
            *g += 0.05;
        }
    }
}

fn vector(rng: &mut Rng, n: usize) -> NumericArray {
    NumericArray::vector(random_features(rng, 1, n).into_data())
}

fn upstream(rng: &mut Rng, n: usize) -> Vec<f64> {
    vector(rng, n).into_data()
}

fn check_cosine(rng: &mut Rng, tol: f64, fault: bool) -> Result<GradCheckReport> {
    let point = [("a", vector(rng, 6)), ("b", vector(rng, 6))];
    gradcheck::grad_check(
        |x| {
            let v = ops::cosine_similarity(x[0].data(), x[1].data())?;
            let (ga, gb) = ops::cosine_similarity_backward(x[0].data(), x[1].data(), 1.0)?;
            let mut g = vec![NumericArray::vector(ga), NumericArray::vector(gb)];
            corrupt(&mut g, fault);
            Ok((v, g))
        },
        &point,
        tol,
    )
}

fn check_softmax(rng: &mut Rng, tol: f64, fault: bool) -> Result<GradCheckReport> {
    let u = upstream(rng, 7);
    let point = [("scores", vector(rng, 7))];
    gradcheck::grad_check(
        |x| {
            let p = ops::softmax(x[0].data());
            let mut g = vec![NumericArray::vector(ops::softmax_backward(&p, &u))];
            corrupt(&mut g, fault);
            Ok((crate::math::dot(&p, &u), g))
        },
        &point,
        tol,
    )
}

fn check_log_sum_exp(rng: &mut Rng, tol: f64, fault: bool) -> Result<GradCheckReport> {
    let point = [("scores", vector(rng, 5))];
    gradcheck::grad_check(
        |x| {
            let mut g = vec![NumericArray::vector(ops::softmax(x[0].data()))];
            corrupt(&mut g, fault);
            Ok((ops::log_sum_exp(x[0].data()), g))
        },
        &point,
        tol,
    )
}

fn check_mean(rng: &mut Rng, tol: f64, fault: bool) -> Result<GradCheckReport> {
    let u = upstream(rng, 4);
    let point = [("frames", random_features(rng, 6, 4))];
    gradcheck::grad_check(
        |x| {
            let z = ops::mean_over_time(&x[0])?;
            let mut g = vec![ops::mean_over_time_backward(x[0].rows(), &u)];
            corrupt(&mut g, fault);
            Ok((crate::math::dot(&z, &u), g))
        },
        &point,
        tol,
    )
}

fn check_ce_hard(rng: &mut Rng, tol: f64, fault: bool) -> Result<GradCheckReport> {
    let point = [("logits", vector(rng, 6))];
    gradcheck::grad_check(
        |x| {
            let (v, g) = ops::cross_entropy_smoothed_with_grad(x[0].data(), ClassTarget::Index(2), 0.1)?;
            let mut g = vec![NumericArray::vector(g)];
            corrupt(&mut g, fault);
            Ok((v, g))
        },
        &point,
        tol,
    )
}

fn check_ce_soft(rng: &mut Rng, tol: f64, fault: bool) -> Result<GradCheckReport> {
    let target = ops::softmax(&upstream(rng, 6));
    let point = [("logits", vector(rng, 6))];
    gradcheck::grad_check(
        |x| {
            let (v, g) =
                ops::cross_entropy_smoothed_with_grad(x[0].data(), ClassTarget::Distribution(&target), 0.1)?;
            let mut g = vec![NumericArray::vector(g)];
            corrupt(&mut g, fault);
            Ok((v, g))
        },
        &point,
        tol,
    )
}

fn check_bce(rng: &mut Rng, tol: f64, fault: bool) -> Result<GradCheckReport> {
    let target: Vec<f64> = upstream(rng, VISEME_COUNT).iter().map(|v| (v + 1.0) / 2.0).collect();
    let mut logits = vector(rng, VISEME_COUNT);
    logits.scale(4.0);
    let point = [("logits", logits)];
    gradcheck::grad_check(
        |x| {
            let (v, g) = ops::multilabel_bce_with_grad(x[0].data(), &target)?;
            let mut g = vec![NumericArray::vector(g)];
            corrupt(&mut g, fault);
            Ok((v, g))
        },
        &point,
        tol,
    )
}

const FINITE: TafmConfig = TafmConfig {
    gamma: tafm::GammaMode::Finite { gamma: 3.0 },
    lambda: 0.1,
};

fn check_attention_scores(rng: &mut Rng, tol: f64, fault: bool) -> Result<GradCheckReport> {
    let u = random_features(rng, 4, 5);
    let point = [("X", random_features(rng, 5, 3)), ("W", random_features(rng, 4, 3))];
    gradcheck::grad_check(
        |x| {
            let alpha = tafm::attention_scores(&x[0], &x[1], &FINITE)?;
            let value = crate::math::dot(alpha.data(), u.data());
            let (dx, dw) = tafm::attention_scores_backward(&x[0], &x[1], &FINITE, &alpha, &u)?;
            let mut g = vec![dx, dw];
            corrupt(&mut g, fault);
            Ok((value, g))
        },
        &point,
        tol,
    )
}

fn check_attentive_embeddings(rng: &mut Rng, tol: f64, fault: bool) -> Result<GradCheckReport> {
    let u = random_features(rng, 3, 4);
    let point = [("X", random_features(rng, 5, 4)), ("alpha", random_features(rng, 3, 5))];
    gradcheck::grad_check(
        |x| {
            let zt = tafm::attentive_embeddings(&x[0], &x[1])?;
            let (dx, da) = tafm::attentive_embeddings_backward(&x[0], &x[1], &u)?;
            let mut g = vec![dx, da];
            corrupt(&mut g, fault);
            Ok((crate::math::dot(zt.data(), u.data()), g))
        },
        &point,
        tol,
    )
}

fn check_fuse(rng: &mut Rng, tol: f64, fault: bool) -> Result<GradCheckReport> {
    let u = random_features(rng, 3, 4);
    let point = [("z", vector(rng, 4)), ("z_tilde", random_features(rng, 3, 4))];
    gradcheck::grad_check(
        |x| {
            let f = tafm::fuse_features(x[0].data(), &x[1], 0.1)?;
            let (dz, dzt) = tafm::fuse_features_backward(&u, 0.1)?;
            let mut g = vec![NumericArray::vector(dz), dzt];
            corrupt(&mut g, fault);
            Ok((crate::math::dot(f.data(), u.data()), g))
        },
        &point,
        tol,
    )
}

fn check_class_logits(rng: &mut Rng, tol: f64, fault: bool) -> Result<GradCheckReport> {
    let u = upstream(rng, 3);
    let point = [("fused", random_features(rng, 3, 4)), ("W", random_features(rng, 3, 4))];
    gradcheck::grad_check(
        |x| {
            let logits = tafm::class_logits(&x[0], &x[1])?;
            let (df, dw) = tafm::class_logits_backward(&x[0], &x[1], &u)?;
            let mut g = vec![df, dw];
            corrupt(&mut g, fault);
            Ok((crate::math::dot(&logits, &u), g))
        },
        &point,
        tol,
    )
}

fn tafm_check(config: TafmConfig, x0: NumericArray, w0: NumericArray, u: Vec<f64>, tol: f64, fault: bool) -> Result<GradCheckReport> {
    gradcheck::grad_check(
        |x| {
            let out = tafm::tafm_forward(&x[0], &x[1], &config)?;
            let (dx, dw) = tafm::tafm_backward(&x[0], &x[1], &config, &out, &u)?;
            let mut g = vec![dx, dw];
            corrupt(&mut g, fault);
            Ok((crate::math::dot(&out.logits, &u), g))
        },
        &[("X", x0), ("W", w0)],
        tol,
    )
}

fn check_tafm_finite(rng: &mut Rng, tol: f64, fault: bool) -> Result<GradCheckReport> {
    let u = upstream(rng, 4);
    tafm_check(FINITE, random_features(rng, 6, 5), random_features(rng, 4, 5), u, tol, fault)
}

/// Smallest gap between the best and second-best cosine of any class.
fn selection_margin(x: &NumericArray, w: &NumericArray) -> Result<f64> {
    let out = tafm::tafm_forward(x, w, &TafmConfig::infinite(0.1))?;
    let mut margin = f64::INFINITY;
    for row in out.cosines.row_iter() {
        let mut sorted = row.to_vec();
        sorted.sort_by(|a, b| b.total_cmp(a));
        if sorted.len() > 1 {
            margin = margin.min(sorted[0] - sorted[1]);
        }
    }
    Ok(margin)
}

fn check_tafm_infinite(rng: &mut Rng, tol: f64, fault: bool) -> Result<GradCheckReport> {
    // Redraw until every argmax is separated well beyond the difference step.
    loop {
        let x = random_features(rng, 6, 5);
        let w = random_features(rng, 4, 5);
        if selection_margin(&x, &w)? > 1e-2 {
            let u = upstream(rng, 4);
            return tafm_check(TafmConfig::infinite(0.1), x, w, u, tol, fault);
        }
    }
}

fn check_conv(rng: &mut Rng, tol: f64, fault: bool) -> Result<GradCheckReport> {
    let u = random_features(rng, 6, 4);
    let point = [
        ("x", random_features(rng, 6, 3)),
        ("weight", NumericArray::from_vec(vec![4, 5, 3], random_features(rng, 4, 15).into_data())?),
        ("bias", vector(rng, 4)),
    ];
    gradcheck::grad_check(
        |x| {
            let y = model::conv1d(&x[0], &x[1], &x[2])?;
            let mut dw = NumericArray::zeros(x[1].shape());
            let mut db = NumericArray::zeros(x[2].shape());
            let dx = model::conv1d_backward(&x[0], &x[1], &u, &mut dw, &mut db);
            let mut g = vec![dx, dw, db];
            corrupt(&mut g, fault);
            Ok((crate::math::dot(y.data(), u.data()), g))
        },
        &point,
        tol,
    )
}

/// The tiny end-to-end configuration: B=2, T=4, D_in=D=5, C_w=3, one hard
/// and one mixed word target, soft viseme targets.
pub fn tiny_model_config() -> ModelConfig {
    ModelConfig {
        input_dim: 5,
        hidden_dim: 5,
        word_classes: 3,
        tafm: FINITE,
        beta: 1.0,
        label_smoothing: 0.1,
        ..ModelConfig::default()
    }
}

fn check_total_loss(rng: &mut Rng, tol: f64, fault: bool) -> Result<GradCheckReport> {
    let config = tiny_model_config();
    let init = ModelState::init(&config, rng::derive_seed(7, &[]))?;
    let batch = [
        (
            random_features(rng, 4, 5),
            WordTarget::Class(1),
            (0..VISEME_COUNT).map(|k| (k % 3 == 0) as u8 as f64).collect::<Vec<_>>(),
        ),
        (
            random_features(rng, 4, 5),
            WordTarget::Mixed(vec![0.3, 0.0, 0.7]),
            (0..VISEME_COUNT).map(|k| if k % 2 == 0 { 0.3 } else { 0.0 }).collect(),
        ),
    ];
    let names: Vec<String> = init.parameters.iter().map(|p| p.name.clone()).collect();
    let point: Vec<(&str, NumericArray)> = init
        .parameters
        .iter()
        .map(|p| (p.name.as_str(), p.value.clone()))
        .collect();
    let scale = 1.0 / batch.len() as f64;
    gradcheck::grad_check(
        |x| {
            let named = names.iter().cloned().zip(x.iter().cloned()).collect();
            let mut state = ModelState::from_parameters(&config, named)?;
            let mut total = 0.0;
            for (features, word, visemes) in &batch {
                total += model::accumulate_example(&mut state, &config, features, word, visemes, scale)?.total;
            }
            let mut g: Vec<NumericArray> = state.parameters.into_iter().map(|p| p.gradient).collect();
            corrupt(&mut g, fault);
            Ok((total * scale, g))
        },
        &point,
        tol,
    )
}
