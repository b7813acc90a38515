use std::f64::consts::PI;
use std::path::Path;

use crate::error::{Error, Result};
use crate::files::{write_landscape, write_table1, write_trajectory, TableRow};
use crate::model::{Dataset, ModelParams};
use crate::solvers::{solve, Method, SolveReport, SolverConfig};

use super::dataset::{linspace, make_grid_dataset};
use super::landscape::{landscape_slice, LandscapeSlice};

/// 25 × 25 grid on `[0, 1]²` with target `cos(π(x - y))`.
pub fn demo_dataset() -> Dataset {
    make_grid_dataset(25, 2, (0.0, 1.0), "cos_pi_diff").expect("demo grid is valid")
}

/// Tied rank-2 parameters that represent the demo target exactly:
/// `cos(πx)cos(πy) + sin(πx)sin(πy)`.
pub fn exact_demo_params() -> ModelParams {
    ModelParams::tied_single(2, &[[1.0, 0.0, PI, 0.0], [1.0, 0.0, PI, -PI / 2.0]])
        .expect("finite parameters")
}

/// Fixed starting point shared by every solver in the demo.
pub fn demo_init() -> ModelParams {
    ModelParams::tied_single(2, &[[1.2, 0.1, 3.0, 0.2], [0.8, -0.1, 3.3, -1.4]])
        .expect("finite parameters")
}

/// Axis pair and inclusive grids `(lo, hi, n)` of one landscape slice.
#[derive(Debug, Clone, PartialEq)]
pub struct SliceSpec {
    pub axis1: String,
    pub axis2: String,
    pub grid1: (f64, f64, usize),
    pub grid2: (f64, f64, usize),
}

impl SliceSpec {
    pub fn evaluate(
        &self,
        reference: &ModelParams,
        data: &Dataset,
        trajectories: &[(String, Vec<crate::model::ParamVector>)],
    ) -> Result<LandscapeSlice> {
        let layout = reference.layout();
        let find = |name: &str| {
            layout
                .axis_index(name)
                .ok_or_else(|| Error::InvalidAxis(format!("unknown parameter axis `{name}`")))
        };
        let (a1, a2) = (find(&self.axis1)?, find(&self.axis2)?);
        for (lo, hi, n) in [self.grid1, self.grid2] {
            if n == 0 || !lo.is_finite() || !hi.is_finite() {
                return Err(Error::InvalidAxis(format!("bad grid ({lo}, {hi}, {n})")));
            }
        }
        let g1 = linspace(self.grid1.0, self.grid1.1, self.grid1.2);
        let g2 = linspace(self.grid2.0, self.grid2.1, self.grid2.2);
        landscape_slice(reference, a1, a2, &g1, &g2, data, trajectories)
    }
}

/// The two slices shown for the demo: `alpha_1 × phi_1` and `A_1 × omega_1`.
pub fn demo_landscape_specs() -> Vec<SliceSpec> {
    vec![
        SliceSpec {
            axis1: "alpha_1".into(),
            axis2: "phi_1".into(),
            grid1: (-1.0, 1.0, 81),
            grid2: (-PI, PI, 81),
        },
        SliceSpec {
            axis1: "A_1".into(),
            axis2: "omega_1".into(),
            grid1: (0.0, 2.0, 81),
            grid2: (1.5, 4.5, 81),
        },
    ]
}

#[derive(Debug, Clone, PartialEq)]
pub struct DemoRow {
    pub method: Method,
    pub report: std::result::Result<SolveReport, String>,
}

impl DemoRow {
    pub fn table_row(&self) -> TableRow {
        match &self.report {
            Ok(r) => TableRow {
                method: self.method.code().into(),
                iterations: r.iterations(),
                walltime_ms: r.walltime_ms,
                final_loss: r.final_loss,
            },
            Err(_) => TableRow {
                method: self.method.code().into(),
                iterations: 0,
                walltime_ms: 0.0,
                final_loss: f64::NAN,
            },
        }
    }
}

#[derive(Debug, Clone)]
pub struct DemoOutcome {
    pub rows: Vec<DemoRow>,
    pub landscapes: Vec<LandscapeSlice>,
}

impl DemoOutcome {
    pub fn report(&self, method: Method) -> Option<&SolveReport> {
        self.rows
            .iter()
            .find(|r| r.method == method)
            .and_then(|r| r.report.as_ref().ok())
    }
}

/// Runs ID, SD and NCG from [`demo_init`] on [`demo_dataset`] and writes
/// `table1.csv`, `trajectory_<method>.csv` and the landscape slices (other
/// parameters frozen at the ID result) into `out_dir`.
pub fn run_demo(out_dir: &Path) -> Result<DemoOutcome> {
    std::fs::create_dir_all(out_dir)?;
    let data = demo_dataset();
    let init = demo_init();
    let mut rows = Vec::new();
    for method in Method::ALL {
        let report = solve(&init, &data, &SolverConfig::for_method(method)).map_err(|e| e.to_string());
        rows.push(DemoRow { method, report });
    }

    let table: Vec<TableRow> = rows.iter().map(DemoRow::table_row).collect();
    write_table1(&out_dir.join("table1.csv"), &table)?;
    let mut trajectories = Vec::new();
    for row in &rows {
        if let Ok(report) = &row.report {
            let name = format!("trajectory_{}.csv", row.method.code().to_ascii_lowercase());
            write_trajectory(&out_dir.join(name), report)?;
            trajectories.push((row.method.code().to_string(), report.trajectory.clone()));
        }
    }

    let reference = match rows[0].report.as_ref() {
        Ok(r) => ModelParams::unflatten(&r.final_params)?,
        Err(_) => init,
    };
    let mut landscapes = Vec::new();
    for spec in demo_landscape_specs() {
        let slice = spec.evaluate(&reference, &data, &trajectories)?;
        write_landscape(out_dir, &slice)?;
        landscapes.push(slice);
    }
    Ok(DemoOutcome { rows, landscapes })
}
