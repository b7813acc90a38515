//! Finite-difference oracles and random configurations. These only call
//! `loss`, `gradient` and `model_gradient`, never the quantity under test.

use nalgebra::DMatrix;
use rand::Rng;

use crate::calculus::{gradient, model_gradient};
use crate::error::Result;
use crate::model::{loss, Dataset, Layout, ModelParams, ParamKind, ParamVector};

/// Central differences of `loss`, one coordinate at a time.
pub fn fd_gradient(params: &ModelParams, data: &Dataset, step: f64) -> Result<Vec<f64>> {
    let base = params.flatten();
    (0..base.len())
        .map(|k| {
            let plus = loss(&nudge(&base, k, step)?, data)?;
            let minus = loss(&nudge(&base, k, -step)?, data)?;
            Ok((plus - minus) / (2.0 * step))
        })
        .collect()
}

/// Central differences of `gradient`, column by column.
pub fn fd_hessian(params: &ModelParams, data: &Dataset, step: f64) -> Result<DMatrix<f64>> {
    let base = params.flatten();
    let k = base.len();
    let mut out = DMatrix::zeros(k, k);
    for col in 0..k {
        let plus = gradient(&nudge(&base, col, step)?, data)?;
        let minus = gradient(&nudge(&base, col, -step)?, data)?;
        for row in 0..k {
            out[(row, col)] = (plus.values[row] - minus.values[row]) / (2.0 * step);
        }
    }
    Ok(out)
}

/// Central differences of `∇f(x)`.
pub fn fd_model_hessian(params: &ModelParams, x: &[f64], step: f64) -> Result<DMatrix<f64>> {
    let base = params.flatten();
    let k = base.len();
    let mut out = DMatrix::zeros(k, k);
    for col in 0..k {
        let plus = model_gradient(&nudge(&base, col, step)?, x)?;
        let minus = model_gradient(&nudge(&base, col, -step)?, x)?;
        for row in 0..k {
            out[(row, col)] = (plus[row] - minus[row]) / (2.0 * step);
        }
    }
    Ok(out)
}

fn nudge(base: &ParamVector, k: usize, step: f64) -> Result<ModelParams> {
    let mut v = base.clone();
    v.values[k] += step;
    ModelParams::unflatten(&v)
}

/// Tied or untied, `r, d ∈ {1, 2, 3}`, `P ∈ {1, 2}`.
pub fn random_layout<R: Rng>(rng: &mut R) -> Layout {
    Layout::new(
        rng.gen_range(1..=3),
        rng.gen_range(1..=3),
        rng.gen_range(1..=2),
        rng.gen_bool(0.5),
    )
    .expect("positive sizes")
}

/// Parameters drawn uniformly from moderate ranges.
pub fn random_model<R: Rng>(rng: &mut R, layout: Layout) -> ModelParams {
    let values = (0..layout.len())
        .map(|k| match layout.decode(k).3 {
            ParamKind::Amplitude => rng.gen_range(-1.5..1.5),
            ParamKind::Growth => rng.gen_range(-1.0..1.0),
            ParamKind::Frequency => rng.gen_range(-4.0..4.0),
            ParamKind::Phase => rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI),
        })
        .collect();
    ModelParams::unflatten(&ParamVector { layout, values }).expect("finite draws")
}
