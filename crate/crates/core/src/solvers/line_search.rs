use crate::calculus::loss_and_gradient;
use crate::error::{Error, Result};
use crate::model::{loss, Dataset, ModelParams, ParamVector};

use super::{axpy, dot};

/// Number of step reductions tried before giving up.
pub const MAX_REDUCTIONS: usize = 60;

/// Backtracking Armijo search: the largest `t = t0 · rho^k`, `k ≤ 60`, with
/// `Φ(Θ + t d) ≤ Φ(Θ) + c1 · t · ⟨∇Φ, d⟩`.
///
/// Trial points that overflow the exponent guard count as rejections.
pub fn armijo_search(
    params: &ModelParams,
    direction: &ParamVector,
    data: &Dataset,
    c1: f64,
    rho: f64,
    t0: f64,
) -> Result<f64> {
    if direction.layout != params.layout() {
        return Err(Error::LayoutMismatch(
            "search direction does not match the model layout".into(),
        ));
    }
    let (value, grad) = loss_and_gradient(params, data)?;
    armijo_from(params, value, &grad.values, &direction.values, data, c1, rho, t0)
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn armijo_from(
    params: &ModelParams,
    value: f64,
    grad: &[f64],
    direction: &[f64],
    data: &Dataset,
    c1: f64,
    rho: f64,
    t0: f64,
) -> Result<f64> {
    let slope = dot(grad, direction);
    if slope.is_nan() || slope >= 0.0 {
        return Err(Error::NotDescentDirection { slope });
    }
    let mut t = t0;
    for _ in 0..=MAX_REDUCTIONS {
        let accepted = match axpy(params, t, direction).and_then(|trial| loss(&trial, data)) {
            Ok(trial) => trial.is_finite() && trial <= value + c1 * t * slope,
            Err(Error::ExponentOverflow { .. }) | Err(Error::NonFiniteInput(_)) => false,
            Err(e) => return Err(e),
        };
        if accepted {
            return Ok(t);
        }
        t *= rho;
    }
    Err(Error::LineSearchFailed {
        halvings: MAX_REDUCTIONS,
    })
}
