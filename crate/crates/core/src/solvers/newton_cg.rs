use std::time::Instant;

use nalgebra::{DMatrix, DVector};

use crate::calculus::{hessian, loss_and_gradient};
use crate::error::{Error, Result};
use crate::model::{Dataset, ModelParams};

use super::line_search::armijo_from;
use super::{axpy, Method, Recorder, SolveReport, SolverConfig, Termination};

#[derive(Debug, Clone, PartialEq)]
pub struct CgOutcome {
    pub step: Vec<f64>,
    pub iterations: usize,
    pub negative_curvature: bool,
}

/// Truncated CG on `H p = -g`, stopping when `‖r‖ < tol`, after `max_iters`
/// steps, or on the first direction of non-positive curvature (returning the
/// iterate so far, or `-g` if that happens immediately).
pub fn truncated_cg(h: &DMatrix<f64>, g: &[f64], tol: f64, max_iters: usize) -> CgOutcome {
    let n = g.len();
    let mut z = DVector::zeros(n);
    let mut r = DVector::from_column_slice(g);
    let mut d = -&r;
    let mut rr = r.dot(&r);
    if rr.sqrt() < tol {
        return CgOutcome {
            step: z.as_slice().to_vec(),
            iterations: 0,
            negative_curvature: false,
        };
    }
    for j in 0..max_iters {
        let hd = h * &d;
        let curvature = d.dot(&hd);
        if curvature <= 0.0 {
            let step = if j == 0 { -DVector::from_column_slice(g) } else { z };
            return CgOutcome {
                step: step.as_slice().to_vec(),
                iterations: j,
                negative_curvature: true,
            };
        }
        let alpha = rr / curvature;
        z.axpy(alpha, &d, 1.0);
        r.axpy(alpha, &hd, 1.0);
        let rr_next = r.dot(&r);
        if rr_next.sqrt() < tol {
            return CgOutcome {
                step: z.as_slice().to_vec(),
                iterations: j + 1,
                negative_curvature: false,
            };
        }
        let beta = rr_next / rr;
        rr = rr_next;
        d = -&r + beta * d;
    }
    CgOutcome {
        step: z.as_slice().to_vec(),
        iterations: max_iters,
        negative_curvature: false,
    }
}

/// Line-search Newton-CG with the analytic Hessian. Stops once the loss
/// drops below `ncg_loss_tol` or after `ncg_max_iters` steps.
pub fn newton_cg(initial: &ModelParams, data: &Dataset, cfg: &SolverConfig) -> Result<SolveReport> {
    cfg.expect_method(Method::NewtonCg)?;
    let started = Instant::now();
    let k = initial.layout().len();
    let mut recorder = Recorder::new();
    let mut theta = initial.clone();
    let (mut value, mut grad) = loss_and_gradient(&theta, data)?;
    recorder.push(&theta, value, grad.inf_norm());

    let mut steps = 0;
    let mut cg_iterations = 0;
    let mut termination = Termination::MaxIters;
    loop {
        if value < cfg.ncg_loss_tol {
            termination = Termination::Converged;
            break;
        }
        if steps == cfg.ncg_max_iters {
            break;
        }
        let h = hessian(&theta, data)?;
        let tol = cfg.ncg_cg_residual_tol.resolve(grad.norm());
        let cg = truncated_cg(&h.values, &grad.values, tol, 2 * k);
        cg_iterations += cg.iterations;

        let search = |direction: &[f64]| {
            armijo_from(
                &theta, value, &grad.values, direction, data, cfg.sd_c1, cfg.sd_rho, 1.0,
            )
        };
        let mut direction = cg.step;
        let t = match search(&direction) {
            Ok(t) => Ok(t),
            Err(Error::NotDescentDirection { .. }) | Err(Error::LineSearchFailed { .. }) => {
                direction = grad.values.iter().map(|g| -g).collect();
                search(&direction)
            }
            Err(e) => Err(e),
        };
        let Ok(t) = t else {
            termination = Termination::Stalled;
            break;
        };
        theta = axpy(&theta, t, &direction)?;
        (value, grad) = loss_and_gradient(&theta, data)?;
        recorder.push(&theta, value, grad.inf_norm());
        steps += 1;
    }
    recorder.finish(
        Method::NewtonCg,
        steps,
        cg_iterations,
        termination,
        &theta,
        started,
        data,
    )
}
