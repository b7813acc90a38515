use crate::error::{Error, Result};
use crate::model::{loss, Dataset, ModelParams, ParamVector};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Axis {
    pub index: usize,
    pub name: String,
}

/// Loss on a 2-D parameter slice. `None` cells overflowed the exponent guard
/// or produced a non-finite loss.
#[derive(Debug, Clone, PartialEq)]
pub struct LandscapeSlice {
    pub axis1: Axis,
    pub axis2: Axis,
    pub grid1: Vec<f64>,
    pub grid2: Vec<f64>,
    /// `loss_values[a][b]` at `(grid1[a], grid2[b])`.
    pub loss_values: Vec<Vec<Option<f64>>>,
    pub trajectories: Vec<(String, Vec<(f64, f64)>)>,
}

impl LandscapeSlice {
    /// Finite cell with the smallest loss, as `(a, b, loss)`.
    pub fn argmin(&self) -> Option<(usize, usize, f64)> {
        let mut best: Option<(usize, usize, f64)> = None;
        for (a, row) in self.loss_values.iter().enumerate() {
            for (b, cell) in row.iter().enumerate() {
                if let Some(v) = *cell {
                    if best.is_none_or(|(_, _, m)| v < m) {
                        best = Some((a, b, v));
                    }
                }
            }
        }
        best
    }
}

pub fn landscape_slice(
    reference: &ModelParams,
    axis1: usize,
    axis2: usize,
    grid1: &[f64],
    grid2: &[f64],
    data: &Dataset,
    trajectories: &[(String, Vec<ParamVector>)],
) -> Result<LandscapeSlice> {
    let layout = reference.layout();
    for axis in [axis1, axis2] {
        if axis >= layout.len() {
            return Err(Error::InvalidAxis(format!(
                "index {axis} out of range for {} parameters",
                layout.len()
            )));
        }
    }
    if axis1 == axis2 {
        return Err(Error::InvalidAxis(format!(
            "both axes are `{}`",
            layout.axis_name(axis1)
        )));
    }
    if grid1.is_empty() || grid2.is_empty() {
        return Err(Error::InvalidAxis("empty grid".into()));
    }
    let base = reference.flatten();
    let mut loss_values = Vec::with_capacity(grid1.len());
    for &a in grid1 {
        let mut row = Vec::with_capacity(grid2.len());
        for &b in grid2 {
            let mut v = base.clone();
            v.values[axis1] = a;
            v.values[axis2] = b;
            let cell = match ModelParams::unflatten(&v).and_then(|m| loss(&m, data)) {
                Ok(value) if value.is_finite() => Some(value),
                Ok(_) | Err(Error::ExponentOverflow { .. }) => None,
                Err(e) => return Err(e),
            };
            row.push(cell);
        }
        loss_values.push(row);
    }
    let trajectories = trajectories
        .iter()
        .map(|(name, path)| {
            let projected = path
                .iter()
                .map(|p| (p.values[axis1], p.values[axis2]))
                .collect();
            (name.clone(), projected)
        })
        .collect();
    Ok(LandscapeSlice {
        axis1: Axis {
            index: axis1,
            name: layout.axis_name(axis1),
        },
        axis2: Axis {
            index: axis2,
            name: layout.axis_name(axis2),
        },
        grid1: grid1.to_vec(),
        grid2: grid2.to_vec(),
        loss_values,
        trajectories,
    })
}
