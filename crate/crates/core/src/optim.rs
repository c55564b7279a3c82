//! Adam with bias correction, and the cosine-annealed learning-rate schedule.

use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::array::{NumericArray, Parameter};
use crate::error::{Error, Result};
use crate::math;

pub const DEFAULT_LEARNING_RATE: f64 = 3e-4;

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    step: u64,
    first_moment: Vec<NumericArray>,
    second_moment: Vec<NumericArray>,
}

impl AdamState {
    /// Zeroed moments matching `parameters`, with β₁=0.9, β₂=0.999, ε=1e-8.
    pub fn new(parameters: &[Parameter]) -> Self {
        let zeros = || {
            parameters
                .iter()
                .map(|p| NumericArray::zeros(p.value.shape()))
                .collect()
        };
        Self {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            step: 0,
            first_moment: zeros(),
            second_moment: zeros(),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn first_moment(&self) -> &[NumericArray] {
        &self.first_moment
    }

    pub fn second_moment(&self) -> &[NumericArray] {
        &self.second_moment
    }
}

/// One bias-corrected Adam update using the gradients stored in `parameters`.
///
/// Gradients are validated before anything is mutated, so a non-finite
/// gradient leaves both the parameters and the state untouched.
pub fn adam_step(state: &mut AdamState, parameters: &mut [Parameter], learning_rate: f64) -> Result<()> {
    if parameters.len() != state.first_moment.len() {
        return Err(Error::Optimizer(format!(
            "state tracks {} parameters, got {}",
            state.first_moment.len(),
            parameters.len()
        )));
    }
    for (p, m) in parameters.iter().zip(&state.first_moment) {
        if p.gradient.shape() != m.shape() || p.value.shape() != m.shape() {
            return Err(Error::Optimizer(format!("shape mismatch for `{}`", p.name)));
        }
        if !p.gradient.all_finite() {
            return Err(Error::Optimizer(format!("non-finite gradient for `{}`", p.name)));
        }
    }

    state.step += 1;
    let t = state.step as f64;
    let (b1, b2, eps) = (state.beta1, state.beta2, state.epsilon);
    let correction1 = 1.0 - libm::pow(b1, t);
    let correction2 = 1.0 - libm::pow(b2, t);

    for ((p, m), v) in parameters
        .iter_mut()
        .zip(&mut state.first_moment)
        .zip(&mut state.second_moment)
    {
        let values = p.value.data_mut();
        let grads = p.gradient.data();
        for (((w, &g), mk), vk) in values
            .iter_mut()
            .zip(grads)
            .zip(m.data_mut())
            .zip(v.data_mut())
        {
            *mk = b1 * *mk + (1.0 - b1) * g;
            *vk = b2 * *vk + (1.0 - b2) * g * g;
            let m_hat = *mk / correction1;
            let v_hat = *vk / correction2;
            *w -= learning_rate * m_hat / (math::sqrt(v_hat) + eps);
        }
    }
    Ok(())
}

/// Cosine annealing from `initial_rate` to `minimum_rate` over `total_steps`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LrSchedule {
    pub initial_rate: f64,
    pub minimum_rate: f64,
    pub total_steps: usize,
}

impl LrSchedule {
    pub fn new(initial_rate: f64, minimum_rate: f64, total_steps: usize) -> Result<Self> {
        if !(initial_rate.is_finite() && minimum_rate.is_finite())
            || minimum_rate < 0.0
            || minimum_rate > initial_rate
        {
            return Err(Error::Config(format!(
                "learning rates must satisfy 0 <= minimum ({minimum_rate}) <= initial ({initial_rate})"
            )));
        }
        Ok(Self {
            initial_rate,
            minimum_rate,
            total_steps,
        })
    }

    pub fn with_defaults(total_steps: usize) -> Self {
        Self {
            initial_rate: DEFAULT_LEARNING_RATE,
            minimum_rate: 0.0,
            total_steps,
        }
    }
}

/// `η_min + ½(η_init − η_min)(1 + cos(π t / total))`.
///
/// A zero-length schedule sits at its end point and yields `η_min`.
pub fn cosine_annealed_lr(schedule: &LrSchedule, step: usize) -> Result<f64> {
    if step > schedule.total_steps {
        return Err(Error::Schedule {
            step,
            total: schedule.total_steps,
        });
    }
    if step == schedule.total_steps {
        return Ok(schedule.minimum_rate);
    }
    let progress = step as f64 / schedule.total_steps as f64;
    let span = schedule.initial_rate - schedule.minimum_rate;
    let rate = schedule.minimum_rate + 0.5 * span * (1.0 + math::cos(core::f64::consts::PI * progress));
    Ok(rate.clamp(schedule.minimum_rate, schedule.initial_rate))
}
