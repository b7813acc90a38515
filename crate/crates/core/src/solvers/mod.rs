//! Infinite Descent and the two classical baselines.

mod descent;
mod line_search;
mod newton_cg;
mod snr;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::calculus::JacobianMode;
use crate::error::{Error, Result};
use crate::model::{loss, Dataset, ModelParams, ParamVector};

pub use descent::steepest_descent;
pub use line_search::armijo_search;
pub use newton_cg::{newton_cg, truncated_cg, CgOutcome};
pub use snr::{infinite_descent, snr_solve, snr_solve_ledger, snr_solve_subset, SnrOutcome};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    /// Infinite Descent: one resummed root solve per outer round.
    #[serde(rename = "ID")]
    InfiniteDescent,
    /// Steepest descent with Armijo backtracking.
    #[serde(rename = "SD")]
    SteepestDescent,
    /// Line-search Newton-CG.
    #[serde(rename = "NCG")]
    NewtonCg,
}

impl Method {
    pub const ALL: [Method; 3] = [
        Method::InfiniteDescent,
        Method::SteepestDescent,
        Method::NewtonCg,
    ];

    pub fn code(self) -> &'static str {
        match self {
            Method::InfiniteDescent => "ID",
            Method::SteepestDescent => "SD",
            Method::NewtonCg => "NCG",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "ID" => Ok(Method::InfiniteDescent),
            "SD" => Ok(Method::SteepestDescent),
            "NCG" => Ok(Method::NewtonCg),
            other => Err(Error::InvalidConfig(format!(
                "unknown method `{other}` (expected ID, SD or NCG)"
            ))),
        }
    }
}

/// Residual tolerance for the truncated CG inner loop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum CgResidualTol {
    /// `min(0.5, sqrt(‖∇Φ‖)) · ‖∇Φ‖`
    Adaptive,
    Fixed(f64),
}

impl CgResidualTol {
    pub fn resolve(self, grad_norm: f64) -> f64 {
        match self {
            CgResidualTol::Adaptive => 0.5_f64.min(grad_norm.sqrt()) * grad_norm,
            CgResidualTol::Fixed(tol) => tol,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub method: Method,
    pub id_inner_tol: f64,
    pub id_max_inner: usize,
    pub id_max_outer: usize,
    pub id_jacobian: JacobianMode,
    /// First Levenberg shift; grows ×10 on rejection and shrinks ÷10 on acceptance.
    pub id_lambda0: f64,
    pub id_backtrack_factor: f64,
    pub id_max_halvings: usize,
    pub sd_max_iters: usize,
    pub sd_c1: f64,
    pub sd_rho: f64,
    pub sd_step0: f64,
    pub ncg_max_iters: usize,
    pub ncg_loss_tol: f64,
    pub ncg_cg_residual_tol: CgResidualTol,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            method: Method::InfiniteDescent,
            id_inner_tol: 1e-12,
            id_max_inner: 100,
            id_max_outer: 1,
            id_jacobian: JacobianMode::Full,
            id_lambda0: 1e-8,
            id_backtrack_factor: 0.5,
            id_max_halvings: 40,
            sd_max_iters: 1000,
            sd_c1: 1e-4,
            sd_rho: 0.5,
            sd_step0: 1.0,
            ncg_max_iters: 50,
            ncg_loss_tol: 1e-8,
            ncg_cg_residual_tol: CgResidualTol::Adaptive,
        }
    }
}

impl SolverConfig {
    pub fn for_method(method: Method) -> Self {
        Self {
            method,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("id_inner_tol", self.id_inner_tol),
            ("id_lambda0", self.id_lambda0),
            ("sd_step0", self.sd_step0),
            ("ncg_loss_tol", self.ncg_loss_tol),
        ];
        for (name, value) in positive {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::InvalidConfig(format!("{name} must be positive, got {value}")));
            }
        }
        if let CgResidualTol::Fixed(tol) = self.ncg_cg_residual_tol {
            if !(tol > 0.0 && tol.is_finite()) {
                return Err(Error::InvalidConfig(format!(
                    "ncg_cg_residual_tol must be positive, got {tol}"
                )));
            }
        }
        let unit = [
            ("sd_rho", self.sd_rho),
            ("sd_c1", self.sd_c1),
            ("id_backtrack_factor", self.id_backtrack_factor),
        ];
        for (name, value) in unit {
            if !(value > 0.0 && value < 1.0) {
                return Err(Error::InvalidConfig(format!("{name} must lie in (0, 1), got {value}")));
            }
        }
        Ok(())
    }

    fn expect_method(&self, method: Method) -> Result<()> {
        self.validate()?;
        if self.method != method {
            return Err(Error::InvalidConfig(format!(
                "configuration is for {}, not {}",
                self.method, method
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Termination {
    Converged,
    MaxIters,
    Stalled,
    Error(String),
}

impl Termination {
    pub fn is_converged(&self) -> bool {
        matches!(self, Termination::Converged)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub method: Method,
    pub outer_iterations: usize,
    pub inner_iterations: usize,
    pub loss_trace: Vec<f64>,
    pub grad_norm_trace: Vec<f64>,
    pub trajectory: Vec<ParamVector>,
    pub walltime_ms: f64,
    pub termination: Termination,
    pub final_params: ParamVector,
    pub final_loss: f64,
}

impl SolveReport {
    /// Iteration count as tabulated: outer rounds for ID, steps otherwise.
    pub fn iterations(&self) -> usize {
        self.outer_iterations
    }

    /// Copy with timing removed, for determinism comparisons.
    pub fn without_walltime(&self) -> SolveReport {
        SolveReport {
            walltime_ms: 0.0,
            ..self.clone()
        }
    }
}

/// Dispatches on `cfg.method`.
pub fn solve(params: &ModelParams, data: &Dataset, cfg: &SolverConfig) -> Result<SolveReport> {
    match cfg.method {
        Method::InfiniteDescent => infinite_descent(params, data, cfg),
        Method::SteepestDescent => steepest_descent(params, data, cfg),
        Method::NewtonCg => newton_cg(params, data, cfg),
    }
}

/// Records one snapshot of an iterate.
struct Recorder {
    loss_trace: Vec<f64>,
    grad_norm_trace: Vec<f64>,
    trajectory: Vec<ParamVector>,
}

impl Recorder {
    fn new() -> Self {
        Self {
            loss_trace: Vec::new(),
            grad_norm_trace: Vec::new(),
            trajectory: Vec::new(),
        }
    }

    fn push(&mut self, params: &ModelParams, loss: f64, grad_inf_norm: f64) {
        self.loss_trace.push(loss);
        self.grad_norm_trace.push(grad_inf_norm);
        self.trajectory.push(params.flatten());
    }

    #[allow(clippy::too_many_arguments)]
    fn finish(
        self,
        method: Method,
        outer_iterations: usize,
        inner_iterations: usize,
        termination: Termination,
        final_params: &ModelParams,
        started: std::time::Instant,
        data: &Dataset,
    ) -> Result<SolveReport> {
        let final_loss = loss(final_params, data)?;
        Ok(SolveReport {
            method,
            outer_iterations,
            inner_iterations,
            loss_trace: self.loss_trace,
            grad_norm_trace: self.grad_norm_trace,
            trajectory: self.trajectory,
            walltime_ms: started.elapsed().as_secs_f64() * 1e3,
            termination,
            final_params: final_params.flatten(),
            final_loss,
        })
    }
}

pub(crate) fn axpy(base: &ModelParams, step: f64, direction: &[f64]) -> Result<ModelParams> {
    let mut v = base.flatten();
    for (x, d) in v.values.iter_mut().zip(direction) {
        *x += step * d;
    }
    ModelParams::unflatten(&v)
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
