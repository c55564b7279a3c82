//! Central finite-difference verification of analytic gradients.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::array::NumericArray;
use crate::error::{Error, Result};

/// Central-difference step.
pub const STEP: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq)]
pub struct ParameterError {
    pub name: String,
    /// `‖g_analytic − g_numeric‖∞ / max(1, ‖g_numeric‖∞)`
    pub max_relative_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub tolerance: f64,
    pub parameters: Vec<ParameterError>,
}

impl GradCheckReport {
    pub fn max_relative_error(&self) -> f64 {
        self.parameters
            .iter()
            .fold(0.0, |m, p| m.max(p.max_relative_error))
    }

    pub fn passed(&self) -> bool {
        self.parameters
            .iter()
            .all(|p| p.max_relative_error < self.tolerance)
    }
}

/// Compares the analytic gradient returned by `function` at `point` with
/// central differences of its value.
///
/// `function` returns the scalar value and one gradient array per input
/// array; only the value is used at perturbed points.
pub fn grad_check<F>(
    mut function: F,
    point: &[(&str, NumericArray)],
    tolerance: f64,
) -> Result<GradCheckReport>
where
    F: FnMut(&[NumericArray]) -> Result<(f64, Vec<NumericArray>)>,
{
    let mut inputs: Vec<NumericArray> = point.iter().map(|(_, a)| a.clone()).collect();
    let (value, analytic) = function(&inputs)?;
    if !value.is_finite() {
        return Err(Error::GradCheck(format!("non-finite value {value} at the base point")));
    }
    if analytic.len() != inputs.len() {
        return Err(Error::GradCheck(format!(
            "function returned {} gradients for {} inputs",
            analytic.len(),
            inputs.len()
        )));
    }

    let mut parameters = Vec::with_capacity(inputs.len());
    for (p, (name, _)) in point.iter().enumerate() {
        if analytic[p].shape() != inputs[p].shape() {
            return Err(Error::GradCheck(format!(
                "gradient for `{name}` has shape {:?}, input has {:?}",
                analytic[p].shape(),
                inputs[p].shape()
            )));
        }
        if !analytic[p].all_finite() {
            return Err(Error::GradCheck(format!("non-finite analytic gradient for `{name}`")));
        }
        let mut worst_diff: f64 = 0.0;
        let mut numeric_max: f64 = 0.0;
        for k in 0..inputs[p].len() {
            let original = inputs[p].data()[k];
            inputs[p].data_mut()[k] = original + STEP;
            let plus = function(&inputs)?.0;
            inputs[p].data_mut()[k] = original - STEP;
            let minus = function(&inputs)?.0;
            inputs[p].data_mut()[k] = original;
            let numeric = (plus - minus) / (2.0 * STEP);
            if !numeric.is_finite() {
                return Err(Error::GradCheck(format!(
                    "non-finite difference quotient for `{name}`[{k}]"
                )));
            }
            worst_diff = worst_diff.max((analytic[p].data()[k] - numeric).abs());
            numeric_max = numeric_max.max(numeric.abs());
        }
        parameters.push(ParameterError {
            name: String::from(*name),
            max_relative_error: worst_diff / numeric_max.max(1.0),
        });
    }
    Ok(GradCheckReport {
        tolerance,
        parameters,
    })
}
