//! Command-line configuration and commands.
//!
//! Each command returns a process exit code: 0 on success, 1 on error, and
//! for `fit`, 2 when the solver stopped without converging.

pub mod config;

use std::io::Write;
use std::path::{Path, PathBuf};

pub use config::{ConfigError, DataSpec, InitSpec, OutputSpec, RunConfig};

use crate::files::{format_real, write_landscape, write_trajectory};
use crate::harness::{run_demo, verify_suite_with, Fixture};
use crate::model::ModelParams;
use crate::solvers::{solve, SolveReport, Termination};

fn config_dir(path: &Path) -> PathBuf {
    path.parent()
        .filter(|p| !p.as_os_str().is_empty())
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."))
}

struct Loaded {
    config: RunConfig,
    base: PathBuf,
    init: ModelParams,
    data: crate::model::Dataset,
}

fn load(path: &Path) -> Result<Loaded, String> {
    let config = RunConfig::load(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let base = config_dir(path);
    let init = config.initial_params().map_err(|e| format!("init: {e}"))?;
    let data = config.dataset(&base).map_err(|e| format!("data: {e}"))?;
    Ok(Loaded {
        config,
        base,
        init,
        data,
    })
}

fn exit_code(termination: &Termination) -> i32 {
    match termination {
        Termination::Converged => 0,
        Termination::MaxIters | Termination::Stalled => 2,
        Termination::Error(_) => 1,
    }
}

fn summary(report: &SolveReport) -> String {
    format!(
        "{}: {:?} after {} iterations ({} inner), loss {}, {:.1} ms",
        report.method.code(),
        report.termination,
        report.outer_iterations,
        report.inner_iterations,
        format_real(report.final_loss),
        report.walltime_ms
    )
}

fn write_landscapes(
    loaded: &Loaded,
    out_dir: &Path,
    report: &SolveReport,
    out: &mut dyn Write,
) -> Result<(), String> {
    let reference = ModelParams::unflatten(&report.final_params).map_err(|e| e.to_string())?;
    let trajectories = vec![(report.method.code().to_string(), report.trajectory.clone())];
    for spec in &loaded.config.output.landscapes {
        let slice = spec
            .evaluate(&reference, &loaded.data, &trajectories)
            .map_err(|e| e.to_string())?;
        let path = write_landscape(out_dir, &slice).map_err(|e| format!("{}: {e}", out_dir.display()))?;
        let _ = writeln!(out, "wrote {}", path.display());
    }
    Ok(())
}

/// `fit <config>`: solve, then write `report.json` and the requested CSVs.
pub fn cmd_fit(config_path: &Path, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let loaded = match load(config_path) {
        Ok(l) => l,
        Err(msg) => {
            let _ = writeln!(err, "error: {msg}");
            return 1;
        }
    };
    let report = match solve(&loaded.init, &loaded.data, &loaded.config.solver) {
        Ok(r) => r,
        Err(e) => {
            let _ = writeln!(err, "error: solver: {e}");
            return 1;
        }
    };
    let out_dir = loaded.base.join(&loaded.config.output.dir);
    let written = (|| -> Result<(), String> {
        std::fs::create_dir_all(&out_dir).map_err(|e| format!("{}: {e}", out_dir.display()))?;
        let json = serde_json::to_string_pretty(&report).map_err(|e| e.to_string())?;
        let path = out_dir.join("report.json");
        std::fs::write(&path, json).map_err(|e| format!("{}: {e}", path.display()))?;
        if loaded.config.output.emit_trajectory {
            let name = format!("trajectory_{}.csv", report.method.code().to_ascii_lowercase());
            let path = out_dir.join(name);
            write_trajectory(&path, &report).map_err(|e| format!("{}: {e}", path.display()))?;
        }
        if loaded.config.output.emit_landscape {
            write_landscapes(&loaded, &out_dir, &report, out)?;
        }
        Ok(())
    })();
    if let Err(msg) = written {
        let _ = writeln!(err, "error: {msg}");
        return 1;
    }
    let _ = writeln!(out, "{}", summary(&report));
    if let Termination::Error(msg) = &report.termination {
        let _ = writeln!(err, "error: {msg}");
    }
    exit_code(&report.termination)
}

/// `demo [--out DIR]`: the three-solver comparison on the reference problem.
pub fn cmd_demo(out_dir: &Path, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let outcome = match run_demo(out_dir) {
        Ok(o) => o,
        Err(e) => {
            let _ = writeln!(err, "error: {}: {e}", out_dir.display());
            return 1;
        }
    };
    let _ = writeln!(out, "{:<6} {:>10} {:>12} {:>24}", "method", "iterations", "walltime_ms", "final_loss");
    for row in &outcome.rows {
        let t = row.table_row();
        let _ = writeln!(
            out,
            "{:<6} {:>10} {:>12.2} {:>24}",
            t.method,
            t.iterations,
            t.walltime_ms,
            format_real(t.final_loss)
        );
        if let Err(msg) = &row.report {
            let _ = writeln!(err, "warning: {} failed: {msg}", t.method);
        }
    }
    let _ = writeln!(out, "outputs in {}", out_dir.display());
    0
}

/// `verify [--seed S] [--trials T]`: randomized property checks.
pub fn cmd_verify(seed: u64, trials: usize, fixture: Fixture, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let report = match verify_suite_with(seed, trials, fixture) {
        Ok(r) => r,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return 1;
        }
    };
    for c in &report.checks {
        let _ = writeln!(
            out,
            "{} {:<28} instances={:<5} max_error={:.3e} tol={:.1e}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.instances,
            c.max_error,
            c.tolerance
        );
    }
    let _ = writeln!(out, "seed {}", report.seed);
    if report.all_passed() {
        0
    } else {
        1
    }
}

/// `landscape <config>`: fits, then writes every configured slice around the
/// fitted parameters regardless of `output.emit_landscape`.
pub fn cmd_landscape(config_path: &Path, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let loaded = match load(config_path) {
        Ok(l) => l,
        Err(msg) => {
            let _ = writeln!(err, "error: {msg}");
            return 1;
        }
    };
    if loaded.config.output.landscapes.is_empty() {
        let _ = writeln!(err, "error: output.landscape.1.axes: no landscape slices configured");
        return 1;
    }
    let report = match solve(&loaded.init, &loaded.data, &loaded.config.solver) {
        Ok(r) => r,
        Err(e) => {
            let _ = writeln!(err, "error: solver: {e}");
            return 1;
        }
    };
    let out_dir = loaded.base.join(&loaded.config.output.dir);
    if let Err(e) = std::fs::create_dir_all(&out_dir) {
        let _ = writeln!(err, "error: {}: {e}", out_dir.display());
        return 1;
    }
    match write_landscapes(&loaded, &out_dir, &report, out) {
        Ok(()) => 0,
        Err(msg) => {
            let _ = writeln!(err, "error: {msg}");
            1
        }
    }
}
