//! Analytic derivatives of the least-squares objective and the resummed
//! root function `F(Δ) = ∇Φ(Θ + Δ)`.
//!
//! Every derivative of an atom term is a polynomial prefactor in `(A, x)`
//! times the term's complex carrier `u = exp(αx + i(ωx + φ))`:
//!
//! | parameter | `∂ψ`          |
//! |-----------|---------------|
//! | `A`       | `Re u`        |
//! | `α`       | `A x Re u`    |
//! | `ω`       | `-A x Im u`   |
//! | `φ`       | `-A Im u`     |
//!
//! Shifting the parameters by `Δ` multiplies each carrier by
//! `exp(δα x + i(δω x + δφ))` and shifts the prefactors, so the gradient at
//! `Θ + Δ` can be assembled from carriers stored once at `Θ`
//! (see [`TermLedger`] and [`eval_f_ledger`]).

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    check_exponent, inf_norm, polar, Dataset, Layout, ModelParams, ParamKind,
    UpdateVector,
};

/// `∇Φ` in canonical parameter order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientVector {
    pub values: Vec<f64>,
}

impl GradientVector {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn inf_norm(&self) -> f64 {
        inf_norm(&self.values)
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Dense `K × K` second-derivative matrix with rank-block bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub struct HessianMatrix {
    pub layout: Layout,
    pub values: DMatrix<f64>,
}

impl HessianMatrix {
    fn zeros(layout: Layout) -> Self {
        Self {
            layout,
            values: DMatrix::zeros(layout.len(), layout.len()),
        }
    }

    pub fn block_range(&self, rank: usize) -> std::ops::Range<usize> {
        self.layout.rank_range(rank)
    }

    pub fn is_symmetric(&self) -> bool {
        self.values == self.values.transpose()
    }

    /// Largest absolute entry outside the rank-diagonal blocks.
    pub fn cross_rank_max_abs(&self) -> f64 {
        let k = self.layout.len();
        let mut max = 0.0_f64;
        for a in 0..k {
            for b in 0..k {
                if self.layout.rank_of(a) != self.layout.rank_of(b) {
                    max = max.max(self.values[(a, b)].abs());
                }
            }
        }
        max
    }

    pub fn zero_cross_rank(&mut self) {
        let k = self.layout.len();
        for a in 0..k {
            for b in 0..k {
                if self.layout.rank_of(a) != self.layout.rank_of(b) {
                    self.values[(a, b)] = 0.0;
                }
            }
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.amax()
    }

    fn mirror_upper(&mut self) {
        let k = self.values.nrows();
        for a in 0..k {
            for b in 0..a {
                self.values[(a, b)] = self.values[(b, a)];
            }
        }
    }
}

/// `∇²Φ = gauss_newton + residual`, with
/// `gauss_newton = Σ 2 ∇f ∇fᵀ` and `residual = Σ 2 (f - y) ∇²f`.
#[derive(Debug, Clone, PartialEq)]
pub struct HessianParts {
    pub gauss_newton: HessianMatrix,
    pub residual: HessianMatrix,
}

/// Which Jacobian of `F` to assemble.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum JacobianMode {
    /// Complete `∇²Φ(Θ + Δ)`.
    #[default]
    Full,
    /// Rank-block-diagonal part only.
    Block,
}

#[inline]
fn first_derivative(kind: ParamKind, amplitude: f64, x: f64, u: Complex64) -> f64 {
    match kind {
        ParamKind::Amplitude => u.re,
        ParamKind::Growth => amplitude * x * u.re,
        ParamKind::Frequency => -amplitude * x * u.im,
        ParamKind::Phase => -amplitude * u.im,
    }
}

#[inline]
fn second_derivative(k: ParamKind, m: ParamKind, amplitude: f64, x: f64, u: Complex64) -> f64 {
    use ParamKind::*;
    let (k, m) = if (k as usize) <= (m as usize) { (k, m) } else { (m, k) };
    match (k, m) {
        (Amplitude, Amplitude) => 0.0,
        (Amplitude, Growth) => x * u.re,
        (Amplitude, Frequency) => -x * u.im,
        (Amplitude, Phase) => -u.im,
        (Growth, Growth) => amplitude * x * x * u.re,
        (Growth, Frequency) => -amplitude * x * x * u.im,
        (Growth, Phase) => -amplitude * x * u.im,
        (Frequency, Frequency) => -amplitude * x * x * u.re,
        (Frequency, Phase) => -amplitude * x * u.re,
        (Phase, Phase) => -amplitude * u.re,
        _ => unreachable!("pair is ordered"),
    }
}

/// `out[i] = prod_{s != i} values[s]`, without division.
fn partner_products(values: &[f64], out: &mut [f64]) {
    let mut prefix = 1.0;
    for (o, v) in out.iter_mut().zip(values) {
        *o = prefix;
        prefix *= v;
    }
    let mut suffix = 1.0;
    for (o, v) in out.iter_mut().zip(values).rev() {
        *o *= suffix;
        suffix *= v;
    }
}

#[inline]
fn carrier_slot(layout: &Layout, rank: usize, dim: usize, term: usize) -> usize {
    (rank * layout.dim + dim) * layout.terms + term
}

/// Carriers of every `(rank, dim, term)` at one point, computed from scratch.
fn direct_carriers(params: &ModelParams, x: &[f64], out: &mut Vec<Complex64>) -> Result<()> {
    let layout = params.layout();
    out.clear();
    for j in 0..layout.rank {
        for (i, &xi) in x.iter().enumerate() {
            let atom = params.atom(j, i);
            for p in 0..layout.terms {
                out.push(atom.carrier(p, xi)?);
            }
        }
    }
    Ok(())
}

/// Scratch space for the per-point kernels.
struct Workspace {
    psi: Vec<f64>,
    partner: Vec<f64>,
}

impl Workspace {
    fn new(dim: usize) -> Self {
        Self {
            psi: vec![0.0; dim],
            partner: vec![0.0; dim],
        }
    }

    fn load_rank(&mut self, params: &ModelParams, rank: usize, carriers: &[Complex64]) {
        let layout = params.layout();
        for i in 0..layout.dim {
            let amps = params.atom(rank, i).amplitudes();
            self.psi[i] = (0..layout.terms)
                .map(|p| amps[p] * carriers[carrier_slot(&layout, rank, i, p)].re)
                .sum();
        }
        partner_products(&self.psi, &mut self.partner);
    }
}

/// Model value and `∇f` at one point given its carriers. Amplitudes come from
/// `params`; carriers may have been produced by any route.
fn point_gradient(
    params: &ModelParams,
    x: &[f64],
    carriers: &[Complex64],
    ws: &mut Workspace,
    grad: &mut [f64],
) -> f64 {
    let layout = params.layout();
    grad.fill(0.0);
    let mut value = 0.0;
    for j in 0..layout.rank {
        ws.load_rank(params, j, carriers);
        value += ws.psi.iter().product::<f64>();
        for (i, &xi) in x.iter().enumerate() {
            let amps = params.atom(j, i).amplitudes();
            let partner = ws.partner[i];
            for (p, &amp) in amps.iter().enumerate() {
                let u = carriers[carrier_slot(&layout, j, i, p)];
                for kind in ParamKind::ALL {
                    grad[layout.param_index(j, i, p, kind)] +=
                        first_derivative(kind, amp, xi, u) * partner;
                }
            }
        }
    }
    value
}

/// Adds `∇²f` at one point into the rank-diagonal blocks of `hess` (both
/// triangles). Cross-rank entries are never written.
fn point_model_hessian(
    params: &ModelParams,
    x: &[f64],
    carriers: &[Complex64],
    ws: &mut Workspace,
    scale: f64,
    hess: &mut DMatrix<f64>,
) {
    let layout = params.layout();
    let d = layout.dim;
    for j in 0..layout.rank {
        ws.load_rank(params, j, carriers);
        for i in 0..d {
            let amps_i = params.atom(j, i).amplitudes();
            for s in 0..d {
                let amps_s = params.atom(j, s).amplitudes();
                let pair_partner = if i == s {
                    ws.partner[i]
                } else {
                    (0..d)
                        .filter(|&t| t != i && t != s)
                        .map(|t| ws.psi[t])
                        .product::<f64>()
                };
                for p in 0..layout.terms {
                    let up = carriers[carrier_slot(&layout, j, i, p)];
                    for q in 0..layout.terms {
                        if i == s && p != q {
                            continue;
                        }
                        let uq = carriers[carrier_slot(&layout, j, s, q)];
                        for k in ParamKind::ALL {
                            let row = layout.param_index(j, i, p, k);
                            for m in ParamKind::ALL {
                                let col = layout.param_index(j, s, q, m);
                                let value = if i == s {
                                    second_derivative(k, m, amps_i[p], x[i], up)
                                } else {
                                    first_derivative(k, amps_i[p], x[i], up)
                                        * first_derivative(m, amps_s[q], x[s], uq)
                                };
                                hess[(row, col)] += scale * value * pair_partner;
                            }
                        }
                    }
                }
            }
        }
    }
}

/// `∇_Θ f(x)`.
pub fn model_gradient(params: &ModelParams, x: &[f64]) -> Result<Vec<f64>> {
    let layout = params.layout();
    check_point(layout, x)?;
    let mut carriers = Vec::new();
    direct_carriers(params, x, &mut carriers)?;
    let mut grad = vec![0.0; layout.len()];
    point_gradient(params, x, &carriers, &mut Workspace::new(layout.dim), &mut grad);
    Ok(grad)
}

/// `∇²_Θ f(x)`. Cross-rank blocks are identically zero.
pub fn model_hessian(params: &ModelParams, x: &[f64]) -> Result<HessianMatrix> {
    let layout = params.layout();
    check_point(layout, x)?;
    let mut carriers = Vec::new();
    direct_carriers(params, x, &mut carriers)?;
    let mut out = HessianMatrix::zeros(layout);
    point_model_hessian(
        params,
        x,
        &carriers,
        &mut Workspace::new(layout.dim),
        1.0,
        &mut out.values,
    );
    Ok(out)
}

fn check_point(layout: Layout, x: &[f64]) -> Result<()> {
    if x.len() != layout.dim {
        return Err(Error::DimensionMismatch {
            expected: layout.dim,
            found: x.len(),
        });
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteInput("model coordinate"));
    }
    Ok(())
}

/// Loss and gradient in one pass.
pub fn loss_and_gradient(params: &ModelParams, data: &Dataset) -> Result<(f64, GradientVector)> {
    let layout = params.layout();
    data.check_dim(layout)?;
    let mut ws = Workspace::new(layout.dim);
    let mut carriers = Vec::with_capacity(layout.rank * layout.dim * layout.terms);
    let mut point_grad = vec![0.0; layout.len()];
    let mut total = vec![0.0; layout.len()];
    let mut loss = 0.0;
    for (x, y) in data.iter() {
        direct_carriers(params, x, &mut carriers)?;
        let residual = point_gradient(params, x, &carriers, &mut ws, &mut point_grad) - y;
        loss += residual * residual;
        for (t, g) in total.iter_mut().zip(&point_grad) {
            *t += 2.0 * residual * g;
        }
    }
    Ok((loss, GradientVector { values: total }))
}

/// Exact `∇Φ(Θ)`; points are reduced in ascending order.
pub fn gradient(params: &ModelParams, data: &Dataset) -> Result<GradientVector> {
    loss_and_gradient(params, data).map(|(_, g)| g)
}

pub fn hessian_parts(params: &ModelParams, data: &Dataset) -> Result<HessianParts> {
    let layout = params.layout();
    data.check_dim(layout)?;
    let k = layout.len();
    let mut ws = Workspace::new(layout.dim);
    let mut carriers = Vec::new();
    let mut grad = vec![0.0; k];
    let mut gauss_newton = HessianMatrix::zeros(layout);
    let mut residual_part = HessianMatrix::zeros(layout);
    for (x, y) in data.iter() {
        direct_carriers(params, x, &mut carriers)?;
        let residual = point_gradient(params, x, &carriers, &mut ws, &mut grad) - y;
        for a in 0..k {
            for b in a..k {
                gauss_newton.values[(a, b)] += 2.0 * (grad[a] * grad[b]);
            }
        }
        point_model_hessian(
            params,
            x,
            &carriers,
            &mut ws,
            2.0 * residual,
            &mut residual_part.values,
        );
    }
    gauss_newton.mirror_upper();
    residual_part.mirror_upper();
    Ok(HessianParts {
        gauss_newton,
        residual: residual_part,
    })
}

/// Exact `∇²Φ(Θ)`, assembled from the upper triangle and mirrored.
pub fn hessian(params: &ModelParams, data: &Dataset) -> Result<HessianMatrix> {
    let parts = hessian_parts(params, data)?;
    let mut total = parts.gauss_newton;
    total.values += &parts.residual.values;
    total.mirror_upper();
    Ok(total)
}

/// Carriers, atom values and partner products stored at a base point `Θ`.
#[derive(Debug, Clone)]
pub struct TermLedger {
    base: ModelParams,
    data: Dataset,
    /// `[n][j][i][p]`
    carriers: Vec<Complex64>,
    /// `[n][j][i]`
    atom_values: Vec<f64>,
    /// `[n][j][i]`
    partners: Vec<f64>,
}

pub fn build_ledger(params: &ModelParams, data: &Dataset) -> Result<TermLedger> {
    let layout = params.layout();
    data.check_dim(layout)?;
    let per_point = layout.rank * layout.dim;
    let mut carriers = Vec::with_capacity(data.len() * per_point * layout.terms);
    let mut atom_values = Vec::with_capacity(data.len() * per_point);
    let mut partners = Vec::with_capacity(data.len() * per_point);
    let mut ws = Workspace::new(layout.dim);
    let mut point = Vec::new();
    for (x, _) in data.iter() {
        direct_carriers(params, x, &mut point)?;
        for j in 0..layout.rank {
            ws.load_rank(params, j, &point);
            atom_values.extend_from_slice(&ws.psi);
            partners.extend_from_slice(&ws.partner);
        }
        carriers.extend_from_slice(&point);
    }
    Ok(TermLedger {
        base: params.clone(),
        data: data.clone(),
        carriers,
        atom_values,
        partners,
    })
}

impl TermLedger {
    pub fn base(&self) -> &ModelParams {
        &self.base
    }

    pub fn layout(&self) -> Layout {
        self.base.layout()
    }

    pub fn points(&self) -> usize {
        self.data.len()
    }

    pub fn data(&self) -> &Dataset {
        &self.data
    }

    fn point_stride(&self) -> usize {
        let l = self.layout();
        l.rank * l.dim * l.terms
    }

    pub fn carrier(&self, n: usize, rank: usize, dim: usize, term: usize) -> Complex64 {
        let l = self.layout();
        self.carriers[n * self.point_stride() + carrier_slot(&l, rank, dim, term)]
    }

    pub fn atom_value(&self, n: usize, rank: usize, dim: usize) -> f64 {
        let l = self.layout();
        self.atom_values[(n * l.rank + rank) * l.dim + dim]
    }

    pub fn partner_product(&self, n: usize, rank: usize, dim: usize) -> f64 {
        let l = self.layout();
        self.partners[(n * l.rank + rank) * l.dim + dim]
    }

    /// `Σ_j ψ_i · Π_{s≠i} ψ_s` at point `n`, for a chosen dimension `i`.
    pub fn reconstruct(&self, n: usize, dim: usize) -> f64 {
        (0..self.layout().rank)
            .map(|j| self.atom_value(n, j, dim) * self.partner_product(n, j, dim))
            .sum()
    }
}

/// `F(Δ) = ∇Φ(Θ + Δ)` by re-evaluating the shifted model from scratch.
pub fn eval_f_direct(
    params: &ModelParams,
    delta: &UpdateVector,
    data: &Dataset,
) -> Result<GradientVector> {
    gradient(&params.shifted(delta)?, data)
}

/// `F(Δ)` from the ledger: each stored carrier is rotated and scaled by
/// `exp(δα x + i(δω x + δφ))`, amplitudes become `A + δA`, and the shifted
/// prefactor rules assemble the gradient.
pub fn eval_f_ledger(ledger: &TermLedger, delta: &UpdateVector) -> Result<GradientVector> {
    ledger_loss_and_f(ledger, delta).map(|(_, f)| f)
}

/// `Φ(Θ + Δ)` together with `F(Δ)`, both from the ledger.
pub fn ledger_loss_and_f(ledger: &TermLedger, delta: &UpdateVector) -> Result<(f64, GradientVector)> {
    let layout = ledger.layout();
    if delta.layout != layout {
        return Err(Error::LayoutMismatch(format!(
            "update layout {:?} does not match ledger layout {:?}",
            delta.layout, layout
        )));
    }
    let shifted = ledger.base.shifted(delta)?;
    let stride = ledger.point_stride();
    let mut ws = Workspace::new(layout.dim);
    let mut carriers = vec![Complex64::new(0.0, 0.0); stride];
    let mut point_grad = vec![0.0; layout.len()];
    let mut total = vec![0.0; layout.len()];
    let mut loss = 0.0;
    for (n, (x, y)) in ledger.data.iter().enumerate() {
        let stored = &ledger.carriers[n * stride..(n + 1) * stride];
        for j in 0..layout.rank {
            for (i, &xi) in x.iter().enumerate() {
                for p in 0..layout.terms {
                    let idx = |kind| delta.values[layout.param_index(j, i, p, kind)];
                    let (d_growth, d_freq, d_phase) = (
                        idx(ParamKind::Growth),
                        idx(ParamKind::Frequency),
                        idx(ParamKind::Phase),
                    );
                    check_exponent(shifted.atom(j, i).growth_rates()[p], xi)?;
                    let slot = carrier_slot(&layout, j, i, p);
                    let multiplier =
                        polar(d_growth * xi, d_freq * xi + d_phase);
                    carriers[slot] = stored[slot] * multiplier;
                }
            }
        }
        let residual = point_gradient(&shifted, x, &carriers, &mut ws, &mut point_grad) - y;
        loss += residual * residual;
        for (t, g) in total.iter_mut().zip(&point_grad) {
            *t += 2.0 * residual * g;
        }
    }
    Ok((loss, GradientVector { values: total }))
}

/// Jacobian of `F` at `Δ`, i.e. `∇²Φ(Θ + Δ)`, optionally restricted to its
/// rank-diagonal blocks.
pub fn eval_j(
    params: &ModelParams,
    delta: &UpdateVector,
    data: &Dataset,
    mode: JacobianMode,
) -> Result<HessianMatrix> {
    let mut h = hessian(&params.shifted(delta)?, data)?;
    if mode == JacobianMode::Block {
        h.zero_cross_rank();
    }
    Ok(h)
}
