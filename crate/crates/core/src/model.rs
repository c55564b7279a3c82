//! The two-headed sequence classifier.
//!
//! A stack of same-length temporal convolutions maps `T×D_in` features to
//! `T×D` embeddings (rectifier between layers, linear output). The word head
//! is a bias-free linear map of the temporal mean; the viseme head is a
//! prototype classifier over the embeddings through [`crate::tafm`].
//!
//! Gradients are written out by hand for this fixed graph and verified by
//! the finite-difference suite in [`crate::diagnostics`].

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::array::{NumericArray, Parameter};
use crate::error::{Error, Result};
use crate::math;
use crate::ops::{self, ClassTarget};
use crate::rng;
use crate::tafm::{self, TafmConfig, TafmOutput};
use crate::VISEME_COUNT;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub input_dim: usize,
    /// Fixed gain on input frames; `None` means `√input_dim`, which gives
    /// unit-norm frames unit RMS per coordinate.
    pub input_scale: Option<f64>,
    pub hidden_dim: usize,
    pub encoder_layers: usize,
    /// Odd temporal kernel width.
    pub kernel_width: usize,
    pub word_classes: usize,
    pub tafm: TafmConfig,
    /// Weight of the viseme loss.
    pub beta: f64,
    pub label_smoothing: f64,
    /// Beta(a, a) concentration for mixup; 0 disables it.
    pub mixup_alpha: f64,
    /// When false the viseme head is skipped entirely (plain word classifier).
    pub viseme_branch: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            input_dim: 16,
            input_scale: None,
            hidden_dim: 32,
            encoder_layers: 2,
            kernel_width: 5,
            word_classes: 50,
            tafm: TafmConfig::default(),
            beta: 1.0,
            label_smoothing: 0.1,
            mixup_alpha: 0.2,
            viseme_branch: true,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let err = |m: alloc::string::String| Err(Error::Config(m));
        if self.input_dim == 0 || self.hidden_dim == 0 || self.encoder_layers == 0 {
            return err("input_dim, hidden_dim and encoder_layers must be at least 1".into());
        }
        if let Some(g) = self.input_scale {
            if !(g.is_finite() && g > 0.0) {
                return err(format!("input_scale must be finite and > 0, got {g}"));
            }
        }
        if self.kernel_width % 2 == 0 {
            return err(format!("kernel_width must be odd, got {}", self.kernel_width));
        }
        if self.word_classes < 2 {
            return err(format!("word_classes must be at least 2, got {}", self.word_classes));
        }
        if !(self.beta.is_finite() && self.beta >= 0.0) {
            return err(format!("beta must be finite and >= 0, got {}", self.beta));
        }
        if !(0.0..1.0).contains(&self.label_smoothing) {
            return err(format!("label_smoothing must lie in [0, 1), got {}", self.label_smoothing));
        }
        if !(self.mixup_alpha.is_finite() && self.mixup_alpha >= 0.0) {
            return err(format!("mixup_alpha must be finite and >= 0, got {}", self.mixup_alpha));
        }
        self.tafm.validate()
    }

    pub fn effective_input_scale(&self) -> f64 {
        self.input_scale.unwrap_or_else(|| math::sqrt(self.input_dim as f64))
    }

    fn layer_dims(&self, layer: usize) -> (usize, usize) {
        let input = if layer == 0 { self.input_dim } else { self.hidden_dim };
        (input, self.hidden_dim)
    }
}

/// Trainable state, as an ordered parameter list:
/// `encoder.{l}.weight` (`out × kernel × in`), `encoder.{l}.bias`,
/// `word_head.weight` (`C_w × D`), `viseme_head.weight` (`18 × D`).
#[derive(Debug, Clone, PartialEq)]
pub struct ModelState {
    pub parameters: Vec<Parameter>,
    layers: usize,
}

impl ModelState {
    /// Uniform `±1/√fan_in` initialization from `seed`.
    pub fn init(config: &ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = rng::stream(seed, &[0x1417]);
        let mut uniform = |shape: &[usize], fan_in: usize| {
            let bound = 1.0 / math::sqrt(fan_in as f64);
            let len: usize = shape.iter().product();
            let data = (0..len).map(|_| rng.random_range(-bound..bound)).collect();
            NumericArray::from_vec(shape.to_vec(), data)
        };
        let mut parameters = Vec::new();
        for l in 0..config.encoder_layers {
            let (input, output) = config.layer_dims(l);
            let fan_in = input * config.kernel_width;
            parameters.push(Parameter::new(
                format!("encoder.{l}.weight"),
                uniform(&[output, config.kernel_width, input], fan_in)?,
            ));
            parameters.push(Parameter::new(format!("encoder.{l}.bias"), uniform(&[output], fan_in)?));
        }
        let d = config.hidden_dim;
        parameters.push(Parameter::new(
            "word_head.weight",
            uniform(&[config.word_classes, d], d)?,
        ));
        let mut viseme = uniform(&[VISEME_COUNT, d], d)?;
        for i in 0..VISEME_COUNT {
            while math::norm(viseme.row(i)) < 1e-6 {
                let fresh = uniform(&[1, d], d)?;
                viseme.row_mut(i).copy_from_slice(fresh.data());
            }
        }
        parameters.push(Parameter::new("viseme_head.weight", viseme));
        Ok(Self {
            parameters,
            layers: config.encoder_layers,
        })
    }

    /// Rebuilds a state from named arrays, checking them against `config`.
    pub fn from_parameters(config: &ModelConfig, named: Vec<(alloc::string::String, NumericArray)>) -> Result<Self> {
        let template = Self::init(config, 0)?;
        if named.len() != template.parameters.len() {
            return Err(Error::Shape(format!(
                "expected {} parameters, found {}",
                template.parameters.len(),
                named.len()
            )));
        }
        let mut parameters = Vec::with_capacity(named.len());
        for ((name, value), expected) in named.into_iter().zip(&template.parameters) {
            if name != expected.name || value.shape() != expected.value.shape() {
                return Err(Error::Shape(format!(
                    "parameter `{name}` {:?} does not match `{}` {:?}",
                    value.shape(),
                    expected.name,
                    expected.value.shape()
                )));
            }
            if !value.all_finite() {
                return Err(Error::Shape(format!("parameter `{name}` has non-finite values")));
            }
            parameters.push(Parameter::new(name, value));
        }
        Ok(Self {
            parameters,
            layers: config.encoder_layers,
        })
    }

    pub fn encoder_weight(&self, layer: usize) -> &NumericArray {
        &self.parameters[2 * layer].value
    }

    pub fn encoder_bias(&self, layer: usize) -> &NumericArray {
        &self.parameters[2 * layer + 1].value
    }

    pub fn word_head(&self) -> &NumericArray {
        &self.parameters[2 * self.layers].value
    }

    pub fn viseme_head(&self) -> &NumericArray {
        &self.parameters[2 * self.layers + 1].value
    }

    pub fn zero_grad(&mut self) {
        self.parameters.iter_mut().for_each(Parameter::zero_grad);
    }

    pub fn all_finite(&self) -> bool {
        self.parameters.iter().all(|p| p.value.all_finite())
    }
}

/// Same-length temporal convolution: `y[t] = b + Σ_k W[·,k,·] x[t + k − pad]`.
pub fn conv1d(x: &NumericArray, weight: &NumericArray, bias: &NumericArray) -> Result<NumericArray> {
    let (t, d_in) = x.expect_matrix("conv input")?;
    let (d_out, kernel, w_in) = match weight.shape() {
        &[o, k, i] => (o, k, i),
        s => return Err(Error::Shape(format!("conv weight must be 3-D, got {s:?}"))),
    };
    if w_in != d_in || bias.len() != d_out {
        return Err(Error::Shape(format!(
            "conv weight {:?} / bias {:?} incompatible with input width {d_in}",
            weight.shape(),
            bias.shape()
        )));
    }
    let mut y = NumericArray::zeros(&[t, d_out]);
    let mut window = vec![0.0; kernel * d_in];
    for step in 0..t {
        fill_window(x, step, kernel, &mut window);
        let out = y.row_mut(step);
        for (o, acc) in out.iter_mut().enumerate() {
            let row = &weight.data()[o * kernel * d_in..(o + 1) * kernel * d_in];
            *acc = bias.data()[o] + math::dot(row, &window);
        }
    }
    Ok(y)
}

/// The `kernel` frames centred on `step`, concatenated, zeros past the ends.
fn fill_window(x: &NumericArray, step: usize, kernel: usize, window: &mut [f64]) {
    let (t, d_in) = (x.rows(), x.cols());
    let pad = kernel / 2;
    for k in 0..kernel {
        let slot = &mut window[k * d_in..(k + 1) * d_in];
        match (step + k).checked_sub(pad).filter(|&s| s < t) {
            Some(src) => slot.copy_from_slice(x.row(src)),
            None => slot.fill(0.0),
        }
    }
}

/// Accumulates gradients of `Σ upstream ⊙ conv1d(x)` into `dw`, `db` and
/// returns the input gradient.
pub fn conv1d_backward(
    x: &NumericArray,
    weight: &NumericArray,
    upstream: &NumericArray,
    dw: &mut NumericArray,
    db: &mut NumericArray,
) -> NumericArray {
    let (t, d_in) = (x.rows(), x.cols());
    let kernel = weight.shape()[1];
    let span = kernel * d_in;
    let pad = kernel / 2;
    let mut dx = NumericArray::zeros(&[t, d_in]);
    let mut window = vec![0.0; span];
    let mut d_window = vec![0.0; span];
    for step in 0..t {
        let g = upstream.row(step);
        math::axpy(db.data_mut(), 1.0, g);
        fill_window(x, step, kernel, &mut window);
        d_window.fill(0.0);
        for (o, &go) in g.iter().enumerate() {
            if go == 0.0 {
                continue;
            }
            math::axpy(&mut dw.data_mut()[o * span..(o + 1) * span], go, &window);
            math::axpy(&mut d_window, go, &weight.data()[o * span..(o + 1) * span]);
        }
        for k in 0..kernel {
            if let Some(src) = (step + k).checked_sub(pad).filter(|&s| s < t) {
                math::axpy(dx.row_mut(src), 1.0, &d_window[k * d_in..(k + 1) * d_in]);
            }
        }
    }
    dx
}

/// Intermediates of one forward pass.
#[derive(Debug, Clone)]
pub struct ForwardPass {
    /// Input of every encoder layer (layer 0 sees the raw features).
    layer_inputs: Vec<NumericArray>,
    /// Pre-activation output of every encoder layer.
    pre_activations: Vec<NumericArray>,
    pub embeddings: NumericArray,
    pub pooled: Vec<f64>,
    pub word_logits: Vec<f64>,
    pub viseme: Option<TafmOutput>,
}

impl ForwardPass {
    /// Encoder outputs before each rectifier (the last layer has none).
    pub fn pre_activations(&self) -> &[NumericArray] {
        &self.pre_activations
    }

    pub fn viseme_logits(&self) -> Option<&[f64]> {
        self.viseme.as_ref().map(|v| v.logits.as_slice())
    }
}

pub fn model_forward(state: &ModelState, config: &ModelConfig, features: &NumericArray) -> Result<ForwardPass> {
    let (t, d_in) = features.expect_matrix("features")?;
    if t == 0 {
        return Err(Error::EmptySequence);
    }
    if d_in != config.input_dim {
        return Err(Error::Shape(format!(
            "features have {d_in} dims, model expects {}",
            config.input_dim
        )));
    }
    let mut layer_inputs = Vec::with_capacity(config.encoder_layers);
    let mut pre_activations = Vec::with_capacity(config.encoder_layers);
    let mut h = features.clone();
    let gain = config.effective_input_scale();
    if gain != 1.0 {
        h.data_mut().iter_mut().for_each(|v| *v *= gain);
    }
    for l in 0..config.encoder_layers {
        let pre = conv1d(&h, state.encoder_weight(l), state.encoder_bias(l))?;
        let last = l + 1 == config.encoder_layers;
        let next = if last {
            pre.clone()
        } else {
            let mut a = pre.clone();
            a.data_mut().iter_mut().for_each(|v| *v = v.max(0.0));
            a
        };
        layer_inputs.push(core::mem::replace(&mut h, next));
        pre_activations.push(pre);
    }
    let embeddings = h;
    let pooled = ops::mean_over_time(&embeddings)?;
    let word_logits = state.word_head().row_iter().map(|w| math::dot(w, &pooled)).collect();
    let viseme = if config.viseme_branch {
        Some(tafm::tafm_forward(&embeddings, state.viseme_head(), &config.tafm)?)
    } else {
        None
    };
    Ok(ForwardPass {
        layer_inputs,
        pre_activations,
        embeddings,
        pooled,
        word_logits,
        viseme,
    })
}

/// Word-level training target.
#[derive(Debug, Clone, PartialEq)]
pub enum WordTarget {
    Class(usize),
    /// Probability distribution over classes (mixup).
    Mixed(Vec<f64>),
}

impl WordTarget {
    pub fn as_class_target(&self) -> ClassTarget<'_> {
        match self {
            WordTarget::Class(c) => ClassTarget::Index(*c),
            WordTarget::Mixed(q) => ClassTarget::Distribution(q),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LossParts {
    pub total: f64,
    pub word: f64,
    pub viseme: f64,
}

/// `CE_smoothed(word) + β·BCE(viseme)`, with gradients for both logit vectors.
/// Without a viseme branch (`viseme_logits == None`) the loss is the word term.
pub fn total_loss_with_grad(
    word_logits: &[f64],
    viseme_logits: Option<&[f64]>,
    word_target: &WordTarget,
    viseme_target: &[f64],
    config: &ModelConfig,
) -> Result<(LossParts, Vec<f64>, Option<Vec<f64>>)> {
    let (word, d_word) =
        ops::cross_entropy_smoothed_with_grad(word_logits, word_target.as_class_target(), config.label_smoothing)?;
    match viseme_logits {
        Some(v) => {
            let (viseme, mut d_vis) = ops::multilabel_bce_with_grad(v, viseme_target)?;
            d_vis.iter_mut().for_each(|g| *g *= config.beta);
            let parts = LossParts {
                total: word + config.beta * viseme,
                word,
                viseme,
            };
            Ok((parts, d_word, Some(d_vis)))
        }
        None => Ok((
            LossParts {
                total: word,
                word,
                viseme: 0.0,
            },
            d_word,
            None,
        )),
    }
}

pub fn total_loss(
    word_logits: &[f64],
    viseme_logits: Option<&[f64]>,
    word_target: &WordTarget,
    viseme_target: &[f64],
    config: &ModelConfig,
) -> Result<LossParts> {
    total_loss_with_grad(word_logits, viseme_logits, word_target, viseme_target, config).map(|r| r.0)
}

/// Backpropagates logit gradients through the model, adding `scale` times
/// the parameter gradients into `state`.
pub fn model_backward(
    state: &mut ModelState,
    config: &ModelConfig,
    pass: &ForwardPass,
    d_word: &[f64],
    d_viseme: Option<&[f64]>,
    scale: f64,
) -> Result<()> {
    let layers = config.encoder_layers;
    let t = pass.embeddings.rows();

    // word head
    let d_pooled = {
        let word = &mut state.parameters[2 * layers];
        let mut d_pooled = vec![0.0; pass.pooled.len()];
        for (c, &g) in d_word.iter().enumerate() {
            math::axpy(word.gradient.row_mut(c), scale * g, &pass.pooled);
            math::axpy(&mut d_pooled, g, word.value.row(c));
        }
        d_pooled
    };
    let mut d_emb = ops::mean_over_time_backward(t, &d_pooled);

    if let (Some(out), Some(dv)) = (&pass.viseme, d_viseme) {
        let head = &mut state.parameters[2 * layers + 1];
        let (dx, dw) = tafm::tafm_backward(&pass.embeddings, &head.value, &config.tafm, out, dv)?;
        math::axpy(head.gradient.data_mut(), scale, dw.data());
        math::axpy(d_emb.data_mut(), 1.0, dx.data());
    }

    let mut upstream = d_emb;
    for l in (0..layers).rev() {
        if l + 1 != layers {
            for (g, pre) in upstream.data_mut().iter_mut().zip(pass.pre_activations[l].data()) {
                if *pre <= 0.0 {
                    *g = 0.0;
                }
            }
        }
        let (head, tail) = state.parameters.split_at_mut(2 * l + 1);
        let weight = &mut head[2 * l];
        let bias = &mut tail[0];
        let mut dw = NumericArray::zeros(weight.value.shape());
        let mut db = NumericArray::zeros(bias.value.shape());
        let dx = conv1d_backward(&pass.layer_inputs[l], &weight.value, &upstream, &mut dw, &mut db);
        math::axpy(weight.gradient.data_mut(), scale, dw.data());
        math::axpy(bias.gradient.data_mut(), scale, db.data());
        upstream = dx;
    }
    Ok(())
}

/// One example's loss with its gradients added (times `scale`) into `state`.
pub fn accumulate_example(
    state: &mut ModelState,
    config: &ModelConfig,
    features: &NumericArray,
    word_target: &WordTarget,
    viseme_target: &[f64],
    scale: f64,
) -> Result<LossParts> {
    let pass = model_forward(state, config, features)?;
    let (parts, d_word, d_vis) =
        total_loss_with_grad(&pass.word_logits, pass.viseme_logits(), word_target, viseme_target, config)?;
    model_backward(state, config, &pass, &d_word, d_vis.as_deref(), scale)?;
    Ok(parts)
}
