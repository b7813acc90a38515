//! Randomised property checks over the model and calculus.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::calculus::{
    build_ledger, eval_f_direct, eval_f_ledger, gradient, hessian, model_gradient, model_hessian,
    GradientVector,
};
use crate::error::Result;
use crate::model::{
    eval_atom, eval_model, AtomParams, Dataset, Layout, ModelParams, ParamVector,
};

use super::demo::demo_dataset;
use super::oracles::{fd_gradient, fd_hessian, fd_model_hessian, random_layout, random_model};

/// Deliberate corruption used as a negative control.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Fixture {
    #[default]
    None,
    /// Flip the sign of the first analytic gradient entry.
    FlipGradientSign,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PropertyCheck {
    pub name: &'static str,
    pub instances: usize,
    pub max_error: f64,
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyReport {
    pub seed: u64,
    pub checks: Vec<PropertyCheck>,
}

impl VerifyReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

pub fn verify_suite(seed: u64, trials: usize) -> Result<VerifyReport> {
    verify_suite_with(seed, trials, Fixture::None)
}

pub fn verify_suite_with(seed: u64, trials: usize, fixture: Fixture) -> Result<VerifyReport> {
    let trials = trials.max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let demo = demo_dataset();
    let demo_layout = Layout::new(2, 2, 1, true)?;

    let analytic_gradient = |m: &ModelParams, data: &Dataset| -> Result<GradientVector> {
        let mut g = gradient(m, data)?;
        if fixture == Fixture::FlipGradientSign {
            g.values[0] = -g.values[0];
        }
        Ok(g)
    };

    let mut checks = Vec::new();
    let mut run = |name: &'static str,
                   tolerance: f64,
                   rng: &mut ChaCha8Rng,
                   case: &mut dyn FnMut(&mut ChaCha8Rng) -> Result<f64>|
     -> Result<()> {
        let mut max_error = 0.0_f64;
        for _ in 0..trials {
            let e = case(rng)?;
            max_error = if e.is_nan() { f64::NAN } else { max_error.max(e) };
        }
        checks.push(PropertyCheck {
            name,
            instances: trials,
            max_error,
            tolerance,
            passed: max_error <= tolerance,
        });
        Ok(())
    };

    run("gradient_vs_finite_differences", 1e-6, &mut rng, &mut |rng| {
        let layout = random_layout(rng);
        let m = random_model(rng, layout);
        let data = random_dataset(rng, layout.dim, 6);
        let g = analytic_gradient(&m, &data)?;
        let fd = fd_gradient(&m, &data, 1e-6)?;
        Ok(max_abs_diff(&g.values, &fd) / (1.0 + g.inf_norm()))
    })?;

    run("hessian_vs_finite_differences", 1e-5, &mut rng, &mut |rng| {
        let layout = random_layout(rng);
        let m = random_model(rng, layout);
        let data = random_dataset(rng, layout.dim, 5);
        let h = hessian(&m, &data)?;
        let fd = fd_hessian(&m, &data, 1e-5)?;
        Ok((&h.values - fd).amax() / (1.0 + h.max_abs()))
    })?;

    run("hessian_symmetry", 0.0, &mut rng, &mut |rng| {
        let layout = random_layout(rng);
        let m = random_model(rng, layout);
        let data = random_dataset(rng, layout.dim, 5);
        let h = hessian(&m, &data)?;
        Ok((&h.values - h.values.transpose()).amax())
    })?;

    run("resummation_equivalence", 1e-10, &mut rng, &mut |rng| {
        let m = random_model(rng, demo_layout);
        let delta = random_shift(rng, demo_layout, 0.5);
        let ledger = build_ledger(&m, &demo)?;
        let resummed = eval_f_ledger(&ledger, &delta)?;
        let direct = eval_f_direct(&m, &delta, &demo)?;
        Ok(max_abs_diff(&resummed.values, &direct.values) / (1.0 + direct.inf_norm()))
    })?;

    run("ledger_reconstruction", 1e-13, &mut rng, &mut |rng| {
        let layout = random_layout(rng);
        let m = random_model(rng, layout);
        let data = random_dataset(rng, layout.dim, 8);
        let ledger = build_ledger(&m, &data)?;
        let mut worst = 0.0_f64;
        for n in 0..data.len() {
            let f = eval_model(&m, data.point(n))?;
            let scale = (0..layout.rank)
                .map(|j| eval_model(&m.rank_submodel(j), data.point(n)).map(f64::abs))
                .sum::<Result<f64>>()?;
            for i in 0..layout.dim {
                worst = worst.max((ledger.reconstruct(n, i) - f).abs() / scale.max(f64::MIN_POSITIVE));
            }
        }
        Ok(worst)
    })?;

    run("differentiation_closure", 1e-6, &mut rng, &mut |rng| {
        let (a, g, w, p) = (
            rng.gen_range(-2.0..2.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-5.0..5.0),
            rng.gen_range(-3.2..3.2),
        );
        let x: f64 = rng.gen_range(-1.0..1.0);
        let atom = AtomParams::single(a, g, w, p)?;
        let h = 1e-5;
        let fd = (eval_atom(&atom, x + h)? - eval_atom(&atom, x - h)?) / (2.0 * h);
        let closed = AtomParams::single(a * g.hypot(w), g, w, p + w.atan2(g))?;
        let exact = eval_atom(&closed, x)?;
        Ok((fd - exact).abs() / (1.0 + exact.abs()))
    })?;

    run("phase_periodicity", 1e-12, &mut rng, &mut |rng| {
        let (a, g, w, p) = (
            rng.gen_range(-2.0..2.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-5.0..5.0),
            rng.gen_range(-3.2..3.2),
        );
        let x: f64 = rng.gen_range(-1.0..1.0);
        let base = eval_atom(&AtomParams::single(a, g, w, p)?, x)?;
        let shifted = eval_atom(&AtomParams::single(a, g, w, p + 2.0 * std::f64::consts::PI)?, x)?;
        let envelope = a.abs() * (g * x).exp();
        Ok((base - shifted).abs() / envelope.max(f64::MIN_POSITIVE))
    })?;

    run("rank_additivity", 1e-14, &mut rng, &mut |rng| {
        let layout = random_layout(rng);
        let m = random_model(rng, layout);
        let x: Vec<f64> = (0..layout.dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let whole = eval_model(&m, &x)?;
        let parts = (0..layout.rank)
            .map(|j| eval_model(&m.rank_submodel(j), &x))
            .collect::<Result<Vec<_>>>()?;
        let sum: f64 = parts.iter().sum();
        let scale: f64 = parts.iter().map(|v| v.abs()).sum();
        Ok((whole - sum).abs() / scale.max(f64::MIN_POSITIVE))
    })?;

    run("rank_decoupling", 1e-5, &mut rng, &mut |rng| {
        let mut layout = random_layout(rng);
        layout.rank = rng.gen_range(2..=3);
        let m = random_model(rng, layout);
        let x: Vec<f64> = (0..layout.dim).map(|_| rng.gen_range(0.0..1.0)).collect();
        let structural = model_hessian(&m, &x)?.cross_rank_max_abs();
        if structural != 0.0 {
            return Ok(f64::INFINITY);
        }
        let fd = fd_model_hessian(&m, &x, 1e-5)?;
        let grad_scale = 1.0 + model_gradient(&m, &x)?.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
        let mut worst = 0.0_f64;
        for a in 0..layout.len() {
            for b in 0..layout.len() {
                if layout.rank_of(a) != layout.rank_of(b) {
                    worst = worst.max(fd[(a, b)].abs());
                }
            }
        }
        Ok(worst / grad_scale)
    })?;

    Ok(VerifyReport { seed, checks })
}

fn random_dataset(rng: &mut ChaCha8Rng, dim: usize, n: usize) -> Dataset {
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..dim).map(|_| rng.gen_range(0.0..1.0)).collect())
        .collect();
    let y = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    Dataset::from_rows(&rows, y).expect("finite draws")
}

fn random_shift(rng: &mut ChaCha8Rng, layout: Layout, scale: f64) -> ParamVector {
    ParamVector {
        layout,
        values: (0..layout.len()).map(|_| rng.gen_range(-scale..scale)).collect(),
    }
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quick_suite_passes() {
        let report = verify_suite(7, 3).unwrap();
        for c in &report.checks {
            assert!(c.passed, "{c:?}");
            assert_eq!(c.instances, 3);
        }
    }

    #[test]
    fn single_trial_runs_one_instance_each() {
        let report = verify_suite(1, 1).unwrap();
        assert!(report.checks.iter().all(|c| c.instances == 1));
        assert!(report.all_passed());
    }

    #[test]
    fn corrupted_gradient_is_caught() {
        let report = verify_suite_with(7, 3, Fixture::FlipGradientSign).unwrap();
        assert!(!report.all_passed());
        let failing: Vec<_> = report.checks.iter().filter(|c| !c.passed).map(|c| c.name).collect();
        assert_eq!(failing, vec!["gradient_vs_finite_differences"]);
    }
}
