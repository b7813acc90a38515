use std::time::Instant;

use crate::calculus::loss_and_gradient;
use crate::error::Result;
use crate::model::{Dataset, ModelParams};

use super::line_search::armijo_from;
use super::{axpy, Method, Recorder, SolveReport, SolverConfig, Termination};

/// Gradient below this (∞-norm) ends the run early.
const ZERO_GRADIENT: f64 = 1e-15;

/// Steepest descent with Armijo backtracking for a fixed iteration budget.
///
/// Completing the budget is the method's stopping rule and is reported as
/// `Converged`; a failed line search is `Stalled`.
pub fn steepest_descent(
    initial: &ModelParams,
    data: &Dataset,
    cfg: &SolverConfig,
) -> Result<SolveReport> {
    cfg.expect_method(Method::SteepestDescent)?;
    let started = Instant::now();
    let mut recorder = Recorder::new();
    let mut theta = initial.clone();
    let (mut value, mut grad) = loss_and_gradient(&theta, data)?;
    recorder.push(&theta, value, grad.inf_norm());

    let mut steps = 0;
    let mut termination = Termination::Converged;
    while steps < cfg.sd_max_iters {
        if grad.inf_norm() < ZERO_GRADIENT {
            break;
        }
        let direction: Vec<f64> = grad.values.iter().map(|g| -g).collect();
        let t = match armijo_from(
            &theta,
            value,
            &grad.values,
            &direction,
            data,
            cfg.sd_c1,
            cfg.sd_rho,
            cfg.sd_step0,
        ) {
            Ok(t) => t,
            Err(_) => {
                termination = Termination::Stalled;
                break;
            }
        };
        theta = axpy(&theta, t, &direction)?;
        (value, grad) = loss_and_gradient(&theta, data)?;
        recorder.push(&theta, value, grad.inf_norm());
        steps += 1;
    }
    recorder.finish(
        Method::SteepestDescent,
        steps,
        0,
        termination,
        &theta,
        started,
        data,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calculus::gradient;
    use crate::harness::{demo_dataset, demo_init, exact_demo_params};
    use crate::model::loss;

    fn sd_config(iters: usize) -> SolverConfig {
        SolverConfig {
            sd_max_iters: iters,
            ..SolverConfig::for_method(Method::SteepestDescent)
        }
    }

    #[test]
    fn amplitude_subproblem_is_monotone() {
        // With alpha = omega = phi = 0 the model is A^2 on one point.
        let m = ModelParams::tied_single(1, &[[0.3, 0.0, 0.0, 0.0]]).unwrap();
        let data = Dataset::from_rows(&[vec![0.5]], vec![2.0]).unwrap();
        let report = steepest_descent(&m, &data, &sd_config(50)).unwrap();
        assert!(report.loss_trace.windows(2).all(|w| w[1] <= w[0]));
        assert!(report.final_loss < report.loss_trace[0]);
    }

    #[test]
    fn every_step_satisfies_armijo() {
        let cfg = sd_config(30);
        let data = demo_dataset();
        let report = steepest_descent(&demo_init(), &data, &cfg).unwrap();
        for w in report.trajectory.windows(2) {
            let before = ModelParams::unflatten(&w[0]).unwrap();
            let after = ModelParams::unflatten(&w[1]).unwrap();
            let g = gradient(&before, &data).unwrap();
            // the step is -t g; recover t from any nonzero coordinate
            let k = (0..g.len()).max_by(|&a, &b| g.values[a].abs().total_cmp(&g.values[b].abs())).unwrap();
            let t = (w[0].values[k] - w[1].values[k]) / g.values[k];
            let lhs = loss(&after, &data).unwrap();
            let rhs = loss(&before, &data).unwrap() - cfg.sd_c1 * t * g.norm().powi(2);
            assert!(lhs <= rhs * (1.0 + 1e-12), "{lhs} > {rhs}");
        }
    }

    #[test]
    fn zero_gradient_exits_early() {
        let report = steepest_descent(&exact_demo_params(), &demo_dataset(), &sd_config(10)).unwrap();
        assert!(report.outer_iterations <= 10);
        assert_eq!(report.termination, Termination::Converged);
    }

    #[test]
    fn demo_budget_is_exhausted() {
        let report = steepest_descent(&demo_init(), &demo_dataset(), &sd_config(1000)).unwrap();
        assert_eq!(report.outer_iterations, 1000);
        assert_eq!(report.loss_trace.len(), 1001);
        assert!(report.final_loss <= 1e-3, "{}", report.final_loss);
    }
}
