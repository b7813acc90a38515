//! Separable exponential-trigonometric model.
//!
//! A model of rank `r` over `d` inputs is `f(x) = sum_j prod_i psi_ij(x_i)`
//! where each atom is `psi(x) = sum_p A_p exp(alpha_p x) cos(omega_p x + phi_p)`.
//! With `tied = true` every dimension of a rank shares one atom.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest admissible `|alpha * x|`; `exp` overflows a little above 709.
pub const EXPONENT_LIMIT: f64 = 700.0;

/// Parameter kinds within one term, in canonical order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ParamKind {
    Amplitude = 0,
    Growth = 1,
    Frequency = 2,
    Phase = 3,
}

impl ParamKind {
    pub const ALL: [ParamKind; 4] = [
        ParamKind::Amplitude,
        ParamKind::Growth,
        ParamKind::Frequency,
        ParamKind::Phase,
    ];

    pub fn from_index(k: usize) -> ParamKind {
        Self::ALL[k]
    }

    pub fn axis_prefix(self) -> &'static str {
        match self {
            ParamKind::Amplitude => "A",
            ParamKind::Growth => "alpha",
            ParamKind::Frequency => "omega",
            ParamKind::Phase => "phi",
        }
    }
}

/// One univariate atom with `P` terms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtomParams {
    amplitudes: Vec<f64>,
    growth_rates: Vec<f64>,
    frequencies: Vec<f64>,
    phases: Vec<f64>,
}

impl AtomParams {
    pub fn new(
        amplitudes: Vec<f64>,
        growth_rates: Vec<f64>,
        frequencies: Vec<f64>,
        phases: Vec<f64>,
    ) -> Result<Self> {
        let p = amplitudes.len();
        if p == 0 {
            return Err(Error::InvalidParams("an atom needs at least one term".into()));
        }
        if growth_rates.len() != p || frequencies.len() != p || phases.len() != p {
            return Err(Error::InvalidParams(format!(
                "term arrays differ in length: A={}, alpha={}, omega={}, phi={}",
                p,
                growth_rates.len(),
                frequencies.len(),
                phases.len()
            )));
        }
        let all = amplitudes
            .iter()
            .chain(&growth_rates)
            .chain(&frequencies)
            .chain(&phases);
        if all.into_iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteInput("atom parameter"));
        }
        Ok(Self {
            amplitudes,
            growth_rates,
            frequencies,
            phases,
        })
    }

    /// Single-term atom `A exp(alpha x) cos(omega x + phi)`.
    pub fn single(amplitude: f64, growth: f64, frequency: f64, phase: f64) -> Result<Self> {
        Self::new(vec![amplitude], vec![growth], vec![frequency], vec![phase])
    }

    pub fn terms(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[f64] {
        &self.amplitudes
    }

    pub fn growth_rates(&self) -> &[f64] {
        &self.growth_rates
    }

    pub fn frequencies(&self) -> &[f64] {
        &self.frequencies
    }

    pub fn phases(&self) -> &[f64] {
        &self.phases
    }

    pub fn get(&self, term: usize, kind: ParamKind) -> f64 {
        match kind {
            ParamKind::Amplitude => self.amplitudes[term],
            ParamKind::Growth => self.growth_rates[term],
            ParamKind::Frequency => self.frequencies[term],
            ParamKind::Phase => self.phases[term],
        }
    }

    /// Unit-amplitude complex carrier `exp(alpha x + i(omega x + phi))` of one term.
    pub fn carrier(&self, term: usize, x: f64) -> Result<Complex64> {
        carrier(
            self.growth_rates[term],
            self.frequencies[term],
            self.phases[term],
            x,
        )
    }
}

pub(crate) fn check_exponent(growth: f64, x: f64) -> Result<()> {
    let magnitude = (growth * x).abs();
    if magnitude > EXPONENT_LIMIT {
        return Err(Error::ExponentOverflow {
            magnitude,
            limit: EXPONENT_LIMIT,
        });
    }
    Ok(())
}

pub(crate) fn carrier(growth: f64, frequency: f64, phase: f64, x: f64) -> Result<Complex64> {
    check_exponent(growth, x)?;
    Ok(polar(growth * x, frequency * x + phase))
}

/// `exp(log_modulus + i angle)`. Goes through `libm` so results do not depend
/// on whether the optimizer fuses `sin`/`cos` into a platform `sincos`.
pub(crate) fn polar(log_modulus: f64, angle: f64) -> Complex64 {
    let r = libm::exp(log_modulus);
    Complex64::new(r * libm::cos(angle), r * libm::sin(angle))
}

/// Evaluates a real atom at `x`.
pub fn eval_atom(params: &AtomParams, x: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::NonFiniteInput("atom coordinate"));
    }
    let mut value = 0.0;
    for p in 0..params.terms() {
        value += params.amplitudes[p] * params.carrier(p, x)?.re;
    }
    Ok(value)
}

/// Shape of a model: rank, input dimension, terms per atom and tying.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Layout {
    pub rank: usize,
    pub dim: usize,
    pub terms: usize,
    pub tied: bool,
}

impl Layout {
    pub fn new(rank: usize, dim: usize, terms: usize, tied: bool) -> Result<Self> {
        if rank == 0 || dim == 0 || terms == 0 {
            return Err(Error::InvalidParams(format!(
                "rank, dim and terms must be positive (got {rank}, {dim}, {terms})"
            )));
        }
        Ok(Self {
            rank,
            dim,
            terms,
            tied,
        })
    }

    /// Number of distinct atoms per rank.
    pub fn atoms_per_rank(&self) -> usize {
        if self.tied {
            1
        } else {
            self.dim
        }
    }

    pub fn atom_count(&self) -> usize {
        self.rank * self.atoms_per_rank()
    }

    /// Parameters owned by one rank.
    pub fn rank_len(&self) -> usize {
        4 * self.terms * self.atoms_per_rank()
    }

    /// Total scalar parameter count `K`.
    pub fn len(&self) -> usize {
        self.rank * self.rank_len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Index of the atom used by rank `j` at input dimension `i`.
    pub fn atom_index(&self, rank: usize, dim: usize) -> usize {
        if self.tied {
            rank
        } else {
            rank * self.dim + dim
        }
    }

    /// Flat coordinate of one scalar parameter.
    pub fn param_index(&self, rank: usize, dim: usize, term: usize, kind: ParamKind) -> usize {
        self.atom_index(rank, dim) * 4 * self.terms + 4 * term + kind as usize
    }

    /// Contiguous coordinate range of rank `j`.
    pub fn rank_range(&self, rank: usize) -> std::ops::Range<usize> {
        let len = self.rank_len();
        rank * len..(rank + 1) * len
    }

    pub fn rank_of(&self, index: usize) -> usize {
        index / self.rank_len()
    }

    /// Decodes a flat coordinate into `(rank, atom-within-rank, term, kind)`.
    pub fn decode(&self, index: usize) -> (usize, usize, usize, ParamKind) {
        let atom = index / (4 * self.terms);
        let within = index % (4 * self.terms);
        let rank = atom / self.atoms_per_rank();
        let local_atom = atom % self.atoms_per_rank();
        (
            rank,
            local_atom,
            within / 4,
            ParamKind::from_index(within % 4),
        )
    }

    /// Human-readable axis name of a flat coordinate.
    ///
    /// `A_j`, `alpha_j`, `omega_j`, `phi_j` with 1-based rank; untied models
    /// append `_i` (1-based dimension); multi-term atoms append `_p<term>`.
    pub fn axis_name(&self, index: usize) -> String {
        let (rank, atom, term, kind) = self.decode(index);
        let mut name = format!("{}_{}", kind.axis_prefix(), rank + 1);
        if !self.tied {
            name.push_str(&format!("_{}", atom + 1));
        }
        if self.terms > 1 {
            name.push_str(&format!("_p{}", term + 1));
        }
        name
    }

    pub fn axis_index(&self, name: &str) -> Option<usize> {
        (0..self.len()).find(|&k| self.axis_name(k) == name)
    }
}

/// The full parameter dictionary of a model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    layout: Layout,
    atoms: Vec<AtomParams>,
}

impl ModelParams {
    pub fn new(layout: Layout, atoms: Vec<AtomParams>) -> Result<Self> {
        let layout = Layout::new(layout.rank, layout.dim, layout.terms, layout.tied)?;
        if atoms.len() != layout.atom_count() {
            return Err(Error::LayoutMismatch(format!(
                "expected {} atoms, got {}",
                layout.atom_count(),
                atoms.len()
            )));
        }
        if let Some(bad) = atoms.iter().find(|a| a.terms() != layout.terms) {
            return Err(Error::LayoutMismatch(format!(
                "atom has {} terms, layout requires {}",
                bad.terms(),
                layout.terms
            )));
        }
        Ok(Self { layout, atoms })
    }

    /// Tied model where each rank has one single-term atom `(A, alpha, omega, phi)`.
    pub fn tied_single(dim: usize, ranks: &[[f64; 4]]) -> Result<Self> {
        let layout = Layout::new(ranks.len(), dim, 1, true)?;
        let atoms = ranks
            .iter()
            .map(|&[a, g, w, p]| AtomParams::single(a, g, w, p))
            .collect::<Result<Vec<_>>>()?;
        Self::new(layout, atoms)
    }

    pub fn layout(&self) -> Layout {
        self.layout
    }

    pub fn atoms(&self) -> &[AtomParams] {
        &self.atoms
    }

    pub fn atom(&self, rank: usize, dim: usize) -> &AtomParams {
        &self.atoms[self.layout.atom_index(rank, dim)]
    }

    pub fn flatten(&self) -> ParamVector {
        let mut values = Vec::with_capacity(self.layout.len());
        for atom in &self.atoms {
            for p in 0..atom.terms() {
                for kind in ParamKind::ALL {
                    values.push(atom.get(p, kind));
                }
            }
        }
        ParamVector {
            layout: self.layout,
            values,
        }
    }

    pub fn unflatten(v: &ParamVector) -> Result<Self> {
        let layout = v.layout;
        if v.values.len() != layout.len() {
            return Err(Error::LayoutMismatch(format!(
                "vector has {} entries, layout requires {}",
                v.values.len(),
                layout.len()
            )));
        }
        let atoms = v
            .values
            .chunks_exact(4 * layout.terms)
            .map(|chunk| {
                let column = |k: usize| chunk.iter().skip(k).step_by(4).copied().collect();
                AtomParams::new(column(0), column(1), column(2), column(3))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(layout, atoms)
    }

    /// Returns `self + delta` in flat coordinates.
    pub fn shifted(&self, delta: &ParamVector) -> Result<Self> {
        let base = self.flatten();
        Self::unflatten(&base.add(delta)?)
    }

    /// Restricts the model to a single rank.
    pub fn rank_submodel(&self, rank: usize) -> Self {
        let layout = Layout {
            rank: 1,
            ..self.layout
        };
        let per = self.layout.atoms_per_rank();
        Self {
            layout,
            atoms: self.atoms[rank * per..(rank + 1) * per].to_vec(),
        }
    }
}

/// Flat real coordinates of a parameter set or an update.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamVector {
    pub layout: Layout,
    pub values: Vec<f64>,
}

impl ParamVector {
    pub fn new(layout: Layout, values: Vec<f64>) -> Result<Self> {
        if values.len() != layout.len() {
            return Err(Error::LayoutMismatch(format!(
                "vector has {} entries, layout requires {}",
                values.len(),
                layout.len()
            )));
        }
        Ok(Self { layout, values })
    }

    pub fn zeros(layout: Layout) -> Self {
        Self {
            layout,
            values: vec![0.0; layout.len()],
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn add(&self, other: &ParamVector) -> Result<ParamVector> {
        if self.layout != other.layout {
            return Err(Error::LayoutMismatch(format!(
                "cannot add vectors with layouts {:?} and {:?}",
                self.layout, other.layout
            )));
        }
        Ok(ParamVector {
            layout: self.layout,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a + b)
                .collect(),
        })
    }

    pub fn inf_norm(&self) -> f64 {
        inf_norm(&self.values)
    }
}

/// Shift `Δ` applied to a parameter set.
pub type UpdateVector = ParamVector;

pub(crate) fn inf_norm(values: &[f64]) -> f64 {
    values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
}

/// Paired samples `{x_n, y_n}` stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    dim: usize,
    points: Vec<f64>,
    targets: Vec<f64>,
}

impl Dataset {
    pub fn new(dim: usize, points: Vec<f64>, targets: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidDataset("dimension must be positive".into()));
        }
        if targets.is_empty() {
            return Err(Error::InvalidDataset("dataset must contain at least one point".into()));
        }
        if points.len() != dim * targets.len() {
            return Err(Error::InvalidDataset(format!(
                "{} coordinates do not form {} points of dimension {}",
                points.len(),
                targets.len(),
                dim
            )));
        }
        if points.iter().chain(&targets).any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteInput("dataset value"));
        }
        Ok(Self {
            dim,
            points,
            targets,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>], targets: Vec<f64>) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: bad.len(),
            });
        }
        Self::new(dim, rows.concat(), targets)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn point(&self, n: usize) -> &[f64] {
        &self.points[n * self.dim..(n + 1) * self.dim]
    }

    pub fn target(&self, n: usize) -> f64 {
        self.targets[n]
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[f64], f64)> + '_ {
        self.points
            .chunks_exact(self.dim)
            .zip(self.targets.iter().copied())
    }

    pub(crate) fn check_dim(&self, layout: Layout) -> Result<()> {
        if self.dim != layout.dim {
            return Err(Error::DimensionMismatch {
                expected: layout.dim,
                found: self.dim,
            });
        }
        Ok(())
    }
}

pub fn eval_model(params: &ModelParams, x: &[f64]) -> Result<f64> {
    let layout = params.layout();
    if x.len() != layout.dim {
        return Err(Error::DimensionMismatch {
            expected: layout.dim,
            found: x.len(),
        });
    }
    let mut total = 0.0;
    for j in 0..layout.rank {
        let mut product = 1.0;
        for (i, &xi) in x.iter().enumerate() {
            product *= eval_atom(params.atom(j, i), xi)?;
        }
        total += product;
    }
    Ok(total)
}

/// Least-squares objective `sum_n (f(x_n) - y_n)^2`.
pub fn loss(params: &ModelParams, data: &Dataset) -> Result<f64> {
    data.check_dim(params.layout())?;
    let mut total = 0.0;
    for (x, y) in data.iter() {
        let r = eval_model(params, x)? - y;
        total += r * r;
    }
    Ok(total)
}
