//! End-to-end acceptance criteria. Prints one PASS/FAIL line per criterion
//! and exits nonzero if any fail.
//!
//! Finite-difference oracles here are written against `model::loss` and
//! `calculus::model_gradient` directly, independent of the harness oracles.

use std::f64::consts::PI;
use std::time::Instant;

use aion::calculus::{
    build_ledger, eval_f_direct, eval_f_ledger, eval_j, gradient, hessian, model_gradient,
    model_hessian, JacobianMode,
};
use aion::harness::{demo_dataset, demo_init, exact_demo_params, random_model};
use aion::model::{loss, Dataset, Layout, ModelParams, ParamVector};
use aion::solvers::{solve, Method, SolveReport, SolverConfig, Termination};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    name: &'static str,
    failures: Vec<String>,
    detail: String,
}

fn check(name: &'static str, f: impl FnOnce(&mut Vec<String>) -> String) -> Outcome {
    let mut failures = Vec::new();
    let start = Instant::now();
    let detail = f(&mut failures);
    Outcome {
        name,
        failures,
        detail: format!("{detail} [{:.2} s]", start.elapsed().as_secs_f64()),
    }
}

fn rel_err(analytic: f64, oracle: f64) -> f64 {
    (analytic - oracle).abs() / oracle.abs().max(1.0)
}

fn perturbed(params: &ModelParams, k: usize, h: f64) -> ModelParams {
    let mut v = params.flatten();
    v.values[k] += h;
    ModelParams::unflatten(&v).unwrap()
}

fn fd_loss_gradient(params: &ModelParams, data: &Dataset) -> Vec<f64> {
    let h = 1e-6;
    (0..params.layout().len())
        .map(|k| {
            let plus = loss(&perturbed(params, k, h), data).unwrap();
            let minus = loss(&perturbed(params, k, -h), data).unwrap();
            (plus - minus) / (2.0 * h)
        })
        .collect()
}

/// Column `k` of the Hessian as a central difference of the analytic gradient.
fn fd_hessian_column(params: &ModelParams, data: &Dataset, k: usize) -> Vec<f64> {
    let h = 1e-5;
    let plus = gradient(&perturbed(params, k, h), data).unwrap();
    let minus = gradient(&perturbed(params, k, -h), data).unwrap();
    plus.values
        .iter()
        .zip(&minus.values)
        .map(|(p, m)| (p - m) / (2.0 * h))
        .collect()
}

fn random_points(rng: &mut ChaCha8Rng, dim: usize, n: usize) -> Dataset {
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..dim).map(|_| rng.gen_range(0.0..1.0)).collect())
        .collect();
    let y = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    Dataset::from_rows(&rows, y).unwrap()
}

/// Every tied/untied, r, d, P combination, `repeats` times each.
fn layouts(repeats: usize) -> Vec<Layout> {
    let mut out = Vec::new();
    for _ in 0..repeats {
        for tied in [false, true] {
            for rank in 1..=3 {
                for dim in 1..=3 {
                    for terms in 1..=2 {
                        out.push(Layout::new(rank, dim, terms, tied).unwrap());
                    }
                }
            }
        }
    }
    out
}

fn demo_runs() -> Vec<SolveReport> {
    let data = demo_dataset();
    let init = demo_init();
    Method::ALL
        .iter()
        .map(|&m| solve(&init, &data, &SolverConfig::for_method(m)).expect("solver error"))
        .collect()
}

fn table_reproduction(reports: &[SolveReport], failures: &mut Vec<String>) -> String {
    let (id, sd, ncg) = (&reports[0], &reports[1], &reports[2]);
    let mut fail = |cond: bool, msg: String| {
        if !cond {
            failures.push(msg);
        }
    };
    fail(id.termination == Termination::Converged, format!("ID terminated {:?}", id.termination));
    fail(id.outer_iterations == 1, format!("ID outer iterations {}", id.outer_iterations));
    fail(id.final_loss <= 1e-12, format!("ID loss {:e}", id.final_loss));
    fail(id.inner_iterations <= 50, format!("ID inner iterations {}", id.inner_iterations));
    fail(id.walltime_ms < 5000.0, format!("ID walltime {} ms", id.walltime_ms));
    fail(ncg.final_loss < 1e-8, format!("NCG loss {:e}", ncg.final_loss));
    fail(ncg.outer_iterations <= 50, format!("NCG iterations {}", ncg.outer_iterations));
    fail(sd.outer_iterations == 1000, format!("SD iterations {}", sd.outer_iterations));
    fail(sd.final_loss <= 1e-3, format!("SD loss {:e}", sd.final_loss));
    fail(sd.final_loss > id.final_loss, "SD loss not above ID loss".into());
    fail(
        id.final_loss <= ncg.final_loss && ncg.final_loss <= sd.final_loss,
        "loss ordering ID <= NCG <= SD violated".into(),
    );
    format!(
        "ID outer={} inner={} loss={:.2e}; NCG iters={} loss={:.2e}; SD iters={} loss={:.2e}",
        id.outer_iterations,
        id.inner_iterations,
        id.final_loss,
        ncg.outer_iterations,
        ncg.final_loss,
        sd.outer_iterations,
        sd.final_loss
    )
}

fn resummation(failures: &mut Vec<String>) -> String {
    let start = Instant::now();
    let data = demo_dataset();
    let layout = demo_init().layout();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst = 0.0f64;
    let trials = 120;
    for t in 0..trials {
        let params = random_model(&mut rng, layout);
        let delta = ParamVector::new(layout, (0..layout.len()).map(|_| rng.gen_range(-0.5..0.5)).collect())
            .unwrap();
        let direct = eval_f_direct(&params, &delta, &data).unwrap();
        let ledger = eval_f_ledger(&build_ledger(&params, &data).unwrap(), &delta).unwrap();
        let diff = direct
            .values
            .iter()
            .zip(&ledger.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        let scaled = diff / (1.0 + direct.inf_norm());
        worst = worst.max(scaled);
        if scaled > 1e-10 {
            failures.push(format!("trial {t}: scaled difference {scaled:e}"));
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    if elapsed >= 30.0 {
        failures.push(format!("runtime {elapsed:.1} s exceeds 30 s"));
    }
    format!("{trials} pairs, worst scaled difference {worst:.2e}")
}

fn derivative_oracles(failures: &mut Vec<String>) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let configs = layouts(3);
    let (mut worst_g, mut worst_h) = (0.0f64, 0.0f64);
    for (c, &layout) in configs.iter().enumerate() {
        let params = random_model(&mut rng, layout);
        let data = random_points(&mut rng, layout.dim, 8);
        let g = gradient(&params, &data).unwrap();
        let fd = fd_loss_gradient(&params, &data);
        let eg = g.values.iter().zip(&fd).map(|(a, b)| rel_err(*a, *b)).fold(0.0, f64::max);
        worst_g = worst_g.max(eg);
        if eg > 1e-6 {
            failures.push(format!("config {c} {layout:?}: gradient error {eg:e}"));
        }
        let h = hessian(&params, &data).unwrap();
        if !h.is_symmetric() {
            failures.push(format!("config {c} {layout:?}: Hessian not exactly symmetric"));
        }
        for k in 0..layout.len() {
            let col = fd_hessian_column(&params, &data, k);
            let eh = (0..layout.len())
                .map(|i| rel_err(h.values[(i, k)], col[i]))
                .fold(0.0, f64::max);
            worst_h = worst_h.max(eh);
            if eh > 1e-5 {
                failures.push(format!("config {c} {layout:?}: Hessian column {k} error {eh:e}"));
            }
        }
    }
    format!(
        "{} configs, worst gradient error {worst_g:.2e}, worst Hessian error {worst_h:.2e}",
        configs.len()
    )
}

fn structure(failures: &mut Vec<String>) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let (mut worst_fd, mut count) = (0.0f64, 0);
    for layout in layouts(1).into_iter().filter(|l| l.rank >= 2) {
        count += 1;
        let params = random_model(&mut rng, layout);
        let x: Vec<f64> = (0..layout.dim).map(|_| rng.gen_range(0.0..1.0)).collect();
        let mh = model_hessian(&params, &x).unwrap();
        if mh.cross_rank_max_abs() != 0.0 {
            failures.push(format!("{layout:?}: structural cross-rank entry {:e}", mh.cross_rank_max_abs()));
        }
        let h = 1e-5;
        for k in 0..layout.len() {
            let plus = model_gradient(&perturbed(&params, k, h), &x).unwrap();
            let minus = model_gradient(&perturbed(&params, k, -h), &x).unwrap();
            for i in 0..layout.len() {
                if layout.rank_of(i) != layout.rank_of(k) {
                    let v = ((plus[i] - minus[i]) / (2.0 * h)).abs();
                    worst_fd = worst_fd.max(v);
                    if v > 1e-5 {
                        failures.push(format!("{layout:?}: FD cross-rank entry ({i},{k}) = {v:e}"));
                    }
                }
            }
        }

        let data = random_points(&mut rng, layout.dim, 6);
        let delta =
            ParamVector::new(layout, (0..layout.len()).map(|_| rng.gen_range(-0.2..0.2)).collect()).unwrap();
        let block = eval_j(&params, &delta, &data, JacobianMode::Block).unwrap();
        if block.cross_rank_max_abs() != 0.0 {
            failures.push(format!("{layout:?}: block Jacobian has cross-rank entries"));
        }
        let full = eval_j(&params, &ParamVector::zeros(layout), &data, JacobianMode::Full).unwrap();
        if full.values != hessian(&params, &data).unwrap().values {
            failures.push(format!("{layout:?}: full Jacobian at zero differs from the Hessian"));
        }
    }
    format!("{count} multi-rank layouts, worst FD cross-rank entry {worst_fd:.2e}")
}

fn representability(failures: &mut Vec<String>) -> String {
    let exact = ModelParams::tied_single(2, &[[1.0, 0.0, PI, 0.0], [1.0, 0.0, PI, -PI / 2.0]]).unwrap();
    let data = demo_dataset();
    let l = loss(&exact, &data).unwrap();
    let g = gradient(&exact, &data).unwrap().inf_norm();
    if l > 1e-20 {
        failures.push(format!("loss {l:e}"));
    }
    if g > 1e-9 {
        failures.push(format!("gradient inf-norm {g:e}"));
    }
    format!("loss {l:.2e}, gradient inf-norm {g:.2e}")
}

fn hygiene(reports: &[SolveReport], failures: &mut Vec<String>) -> String {
    for r in &reports[1..] {
        if let Some(w) = r.loss_trace.windows(2).position(|w| w[1] > w[0]) {
            failures.push(format!("{} loss increased at step {}", r.method.code(), w + 1));
        }
    }

    let data = demo_dataset();
    let mut certified = 0;
    let mut starts = vec![demo_init()];
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    for _ in 0..8 {
        let v: Vec<f64> = exact_demo_params()
            .flatten()
            .values
            .iter()
            .map(|x| x + rng.gen_range(-0.1..0.1))
            .collect();
        starts.push(ModelParams::unflatten(&ParamVector::new(demo_init().layout(), v).unwrap()).unwrap());
    }
    for jac in [JacobianMode::Full, JacobianMode::Block] {
        for start in &starts {
            let cfg = SolverConfig {
                id_jacobian: jac,
                ..SolverConfig::for_method(Method::InfiniteDescent)
            };
            let r = solve(start, &data, &cfg).unwrap();
            if r.termination == Termination::Converged {
                certified += 1;
                let fin = ModelParams::unflatten(&r.final_params).unwrap();
                let g = gradient(&fin, &data).unwrap().inf_norm();
                if g > 10.0 * cfg.id_inner_tol {
                    failures.push(format!("ID ({jac:?}) converged with gradient inf-norm {g:e}"));
                }
            }
        }
    }

    let again = demo_runs();
    for (a, b) in reports.iter().zip(&again) {
        if a.without_walltime() != b.without_walltime() {
            failures.push(format!("{} rerun differs", a.method.code()));
        }
    }
    if certified == 0 {
        failures.push("no ID run converged, certificate not exercised".into());
    }
    format!("{certified} converged ID runs certified, reruns bit-identical")
}

fn main() {
    let reports = demo_runs();
    let outcomes = vec![
        check("table1_reproduction", |f| table_reproduction(&reports, f)),
        check("resummation_identity", resummation),
        check("derivative_oracles", derivative_oracles),
        check("structure_checks", structure),
        check("exact_representability", representability),
        check("solver_hygiene", |f| hygiene(&reports, f)),
    ];
    let mut failed = 0;
    for o in &outcomes {
        let status = if o.failures.is_empty() { "PASS" } else { "FAIL" };
        println!("{status} {:<24} {}", o.name, o.detail);
        for msg in o.failures.iter().take(10) {
            println!("     - {msg}");
        }
        if !o.failures.is_empty() {
            failed += 1;
        }
    }
    println!("{} of {} criteria passed", outcomes.len() - failed, outcomes.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
