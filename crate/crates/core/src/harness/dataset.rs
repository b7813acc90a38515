use std::f64::consts::PI;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::model::Dataset;

/// Named target functions for grid datasets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Target {
    /// `cos(π(x1 - x2))`, two inputs.
    CosPiDiff,
    One,
    Zero,
}

impl Target {
    pub fn name(self) -> &'static str {
        match self {
            Target::CosPiDiff => "cos_pi_diff",
            Target::One => "one",
            Target::Zero => "zero",
        }
    }

    pub fn eval(self, x: &[f64]) -> f64 {
        match self {
            Target::CosPiDiff => libm::cos(PI * (x[0] - x[1])),
            Target::One => 1.0,
            Target::Zero => 0.0,
        }
    }

    fn required_dim(self) -> Option<usize> {
        match self {
            Target::CosPiDiff => Some(2),
            Target::One | Target::Zero => None,
        }
    }
}

impl FromStr for Target {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "cos_pi_diff" => Ok(Target::CosPiDiff),
            "one" => Ok(Target::One),
            "zero" => Ok(Target::Zero),
            other => Err(Error::UnknownTarget(other.to_string())),
        }
    }
}

/// `n` evenly spaced values from `lo` to `hi` inclusive; `[lo]` when `n = 1`.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n)
        .map(|k| {
            let t = k as f64 / (n - 1) as f64;
            lo * (1.0 - t) + hi * t
        })
        .collect()
}

/// Uniform inclusive grid over `[lo, hi]^dim`, rows in lexicographic order
/// (first coordinate slowest).
pub fn make_grid_dataset(
    points_per_axis: usize,
    dim: usize,
    domain: (f64, f64),
    target: &str,
) -> Result<Dataset> {
    let target: Target = target.parse()?;
    if points_per_axis < 2 {
        return Err(Error::InvalidDataset(format!(
            "points_per_axis must be at least 2, got {points_per_axis}"
        )));
    }
    if dim == 0 {
        return Err(Error::InvalidDataset("dimension must be positive".into()));
    }
    if let Some(required) = target.required_dim() {
        if required != dim {
            return Err(Error::DimensionMismatch {
                expected: required,
                found: dim,
            });
        }
    }
    let axis = linspace(domain.0, domain.1, points_per_axis);
    let count = points_per_axis.pow(dim as u32);
    let mut points = Vec::with_capacity(count * dim);
    let mut targets = Vec::with_capacity(count);
    let mut row = vec![0.0; dim];
    for flat in 0..count {
        let mut rest = flat;
        for slot in row.iter_mut().rev() {
            *slot = axis[rest % points_per_axis];
            rest /= points_per_axis;
        }
        points.extend_from_slice(&row);
        targets.push(target.eval(&row));
    }
    Dataset::new(dim, points, targets)
}
