//! Run configuration in flat dotted-key form:
//!
//! ```text
//! # comment
//! model.rank = 2
//! data.target = cos_pi_diff
//! ```
//!
//! Lists are comma separated. Keys not listed in [`RunConfig::to_text`] are
//! rejected, as are duplicates.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::calculus::JacobianMode;
use crate::files::read_dataset_csv;
use crate::harness::{make_grid_dataset, SliceSpec};
use crate::model::{Dataset, Layout, ModelParams, ParamKind, ParamVector};
use crate::solvers::{CgResidualTol, SolverConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub key: String,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(line) => write!(f, "line {line}: {}: {}", self.key, self.message),
            None => write!(f, "{}: {}", self.key, self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, PartialEq)]
pub enum InitSpec {
    Explicit(Vec<f64>),
    Random {
        seed: u64,
        amplitude: (f64, f64),
        growth: (f64, f64),
        frequency: (f64, f64),
        phase: (f64, f64),
    },
}

#[derive(Debug, Clone, PartialEq)]
pub enum DataSpec {
    Grid {
        points_per_axis: usize,
        domain: (f64, f64),
        target: String,
    },
    CsvFile {
        path: PathBuf,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputSpec {
    pub dir: PathBuf,
    pub emit_trajectory: bool,
    pub emit_landscape: bool,
    pub landscapes: Vec<SliceSpec>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub model: Layout,
    pub init: InitSpec,
    pub data: DataSpec,
    pub solver: SolverConfig,
    pub output: OutputSpec,
}

struct Entries {
    map: BTreeMap<String, (String, usize)>,
    lines: BTreeMap<String, usize>,
}

impl Entries {
    fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut map = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let Some((key, value)) = content.split_once('=') else {
                return Err(ConfigError {
                    line: Some(line),
                    key: content.to_string(),
                    message: "expected `key = value`".into(),
                });
            };
            let key = key.trim().to_string();
            if key.is_empty() {
                return Err(ConfigError {
                    line: Some(line),
                    key,
                    message: "empty key".into(),
                });
            }
            if let Some((_, first)) = map.get(&key) {
                return Err(ConfigError {
                    line: Some(line),
                    key,
                    message: format!("duplicate key (first set on line {first})"),
                });
            }
            map.insert(key, (value.trim().to_string(), line));
        }
        let lines = map.iter().map(|(k, (_, l))| (k.clone(), *l)).collect();
        Ok(Self { map, lines })
    }

    fn error(&self, key: &str, message: impl Into<String>) -> ConfigError {
        ConfigError {
            line: self.lines.get(key).copied(),
            key: key.to_string(),
            message: message.into(),
        }
    }

    fn has(&self, key: &str) -> bool {
        self.map.contains_key(key)
    }

    fn take_raw(&mut self, key: &str) -> Option<(String, usize)> {
        self.map.remove(key)
    }

    fn required<T: FromStr>(&mut self, key: &str) -> Result<T, ConfigError>
    where
        T::Err: fmt::Display,
    {
        match self.optional(key)? {
            Some(v) => Ok(v),
            None => Err(self.error(key, "missing required key")),
        }
    }

    fn optional<T: FromStr>(&mut self, key: &str) -> Result<Option<T>, ConfigError>
    where
        T::Err: fmt::Display,
    {
        match self.take_raw(key) {
            None => Ok(None),
            Some((value, line)) => value.parse().map(Some).map_err(|e: T::Err| ConfigError {
                line: Some(line),
                key: key.to_string(),
                message: format!("cannot parse `{value}`: {e}"),
            }),
        }
    }

    fn or<T: FromStr>(&mut self, key: &str, default: T) -> Result<T, ConfigError>
    where
        T::Err: fmt::Display,
    {
        Ok(self.optional(key)?.unwrap_or(default))
    }

    fn list(&mut self, key: &str) -> Result<Option<(Vec<f64>, usize)>, ConfigError> {
        let Some((value, line)) = self.take_raw(key) else {
            return Ok(None);
        };
        let parsed = value
            .split(',')
            .map(|t| t.trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| ConfigError {
                line: Some(line),
                key: key.to_string(),
                message: format!("cannot parse list `{value}`: {e}"),
            })?;
        Ok(Some((parsed, line)))
    }

    fn pair(&mut self, key: &str, default: (f64, f64)) -> Result<(f64, f64), ConfigError> {
        match self.list(key)? {
            None => Ok(default),
            Some((v, line)) if v.len() == 2 => {
                if v[0] <= v[1] && v.iter().all(|x| x.is_finite()) {
                    Ok((v[0], v[1]))
                } else {
                    Err(ConfigError {
                        line: Some(line),
                        key: key.into(),
                        message: "expected finite `lo, hi` with lo <= hi".into(),
                    })
                }
            }
            Some((_, line)) => Err(ConfigError {
                line: Some(line),
                key: key.into(),
                message: "expected two values `lo, hi`".into(),
            }),
        }
    }
}

/// Accepts `true/false`, `yes/no`, `1/0`.
#[derive(Debug, Clone, Copy)]
struct Flag(bool);

impl FromStr for Flag {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "true" | "yes" | "1" => Ok(Flag(true)),
            "false" | "no" | "0" => Ok(Flag(false)),
            other => Err(format!("`{other}` is not a boolean")),
        }
    }
}

fn parse_jacobian(s: &str) -> Result<JacobianMode, String> {
    match s.to_ascii_lowercase().as_str() {
        "full" => Ok(JacobianMode::Full),
        "block" => Ok(JacobianMode::Block),
        other => Err(format!("`{other}` is not `full` or `block`")),
    }
}

fn parse_cg_tol(s: &str) -> Result<CgResidualTol, String> {
    if s.eq_ignore_ascii_case("adaptive") {
        return Ok(CgResidualTol::Adaptive);
    }
    s.parse::<f64>()
        .map(CgResidualTol::Fixed)
        .map_err(|e| format!("expected `adaptive` or a number: {e}"))
}

const DEFAULT_AMPLITUDE: (f64, f64) = (0.5, 1.5);
const DEFAULT_GROWTH: (f64, f64) = (-0.2, 0.2);
const DEFAULT_FREQUENCY: (f64, f64) = (2.5, 3.5);
const DEFAULT_PHASE: (f64, f64) = (-1.6, 0.4);

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError {
            line: None,
            key: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut e = Entries::parse(text)?;

        let rank: usize = e.required("model.rank")?;
        let dim: usize = e.required("model.dim")?;
        let terms: usize = e.or("model.terms", 1)?;
        let tied = e.or("model.tied", Flag(false))?.0;
        for (key, value) in [("model.rank", rank), ("model.dim", dim), ("model.terms", terms)] {
            if value == 0 {
                return Err(e.error(key, "must be a positive integer"));
            }
        }
        let model = Layout::new(rank, dim, terms, tied).expect("sizes checked");

        let init_kind: String = e.required("init.kind")?;
        let random_keys = [
            "init.seed",
            "init.amplitude_range",
            "init.growth_range",
            "init.frequency_range",
            "init.phase_range",
        ];
        let init = match init_kind.as_str() {
            "explicit" => {
                if let Some(k) = random_keys.iter().find(|k| e.has(k)) {
                    return Err(e.error(k, "only one init source allowed; init.kind is explicit"));
                }
                let err = e.error("init.values", "");
                let (values, _) = e
                    .list("init.values")?
                    .ok_or_else(|| ConfigError {
                        message: "missing required key".into(),
                        ..err.clone()
                    })?;
                if values.len() != model.len() {
                    return Err(ConfigError {
                        message: format!(
                            "expected {} values for this model, got {}",
                            model.len(),
                            values.len()
                        ),
                        ..err
                    });
                }
                if values.iter().any(|v| !v.is_finite()) {
                    return Err(ConfigError {
                        message: "values must be finite".into(),
                        ..err
                    });
                }
                InitSpec::Explicit(values)
            }
            "random" => {
                if e.has("init.values") {
                    return Err(e.error("init.values", "only one init source allowed; init.kind is random"));
                }
                InitSpec::Random {
                    seed: e.required("init.seed")?,
                    amplitude: e.pair("init.amplitude_range", DEFAULT_AMPLITUDE)?,
                    growth: e.pair("init.growth_range", DEFAULT_GROWTH)?,
                    frequency: e.pair("init.frequency_range", DEFAULT_FREQUENCY)?,
                    phase: e.pair("init.phase_range", DEFAULT_PHASE)?,
                }
            }
            other => return Err(e.error("init.kind", format!("`{other}` is not `explicit` or `random`"))),
        };

        let data_kind: String = e.required("data.kind")?;
        let data = match data_kind.as_str() {
            "grid" => {
                if e.has("data.path") {
                    return Err(e.error("data.path", "only one data source allowed; data.kind is grid"));
                }
                let points_per_axis: usize = e.required("data.points_per_axis")?;
                if points_per_axis < 2 {
                    return Err(e.error("data.points_per_axis", "must be at least 2"));
                }
                let domain = e.pair("data.domain", (0.0, 1.0))?;
                let target: String = e.required("data.target")?;
                DataSpec::Grid {
                    points_per_axis,
                    domain,
                    target,
                }
            }
            "csv_file" => {
                for k in ["data.points_per_axis", "data.domain", "data.target"] {
                    if e.has(k) {
                        return Err(e.error(k, "only one data source allowed; data.kind is csv_file"));
                    }
                }
                DataSpec::CsvFile {
                    path: PathBuf::from(e.required::<String>("data.path")?),
                }
            }
            other => return Err(e.error("data.kind", format!("`{other}` is not `grid` or `csv_file`"))),
        };

        let d = SolverConfig::default();
        let method = e.or("solver.method", d.method)?;
        let jacobian = match e.take_raw("solver.id_jacobian") {
            None => d.id_jacobian,
            Some((v, line)) => parse_jacobian(&v).map_err(|m| ConfigError {
                line: Some(line),
                key: "solver.id_jacobian".into(),
                message: m,
            })?,
        };
        let cg_tol = match e.take_raw("solver.ncg_cg_residual_tol") {
            None => d.ncg_cg_residual_tol,
            Some((v, line)) => parse_cg_tol(&v).map_err(|m| ConfigError {
                line: Some(line),
                key: "solver.ncg_cg_residual_tol".into(),
                message: m,
            })?,
        };
        let solver = SolverConfig {
            method,
            id_inner_tol: e.or("solver.id_inner_tol", d.id_inner_tol)?,
            id_max_inner: e.or("solver.id_max_inner", d.id_max_inner)?,
            id_max_outer: e.or("solver.id_max_outer", d.id_max_outer)?,
            id_jacobian: jacobian,
            id_lambda0: e.or("solver.id_lambda0", d.id_lambda0)?,
            id_backtrack_factor: e.or("solver.id_backtrack_factor", d.id_backtrack_factor)?,
            id_max_halvings: e.or("solver.id_max_halvings", d.id_max_halvings)?,
            sd_max_iters: e.or("solver.sd_max_iters", d.sd_max_iters)?,
            sd_c1: e.or("solver.sd_c1", d.sd_c1)?,
            sd_rho: e.or("solver.sd_rho", d.sd_rho)?,
            sd_step0: e.or("solver.sd_step0", d.sd_step0)?,
            ncg_max_iters: e.or("solver.ncg_max_iters", d.ncg_max_iters)?,
            ncg_loss_tol: e.or("solver.ncg_loss_tol", d.ncg_loss_tol)?,
            ncg_cg_residual_tol: cg_tol,
        };
        solver.validate().map_err(|err| ConfigError {
            line: None,
            key: "solver".into(),
            message: err.to_string(),
        })?;

        let dir = PathBuf::from(e.or("output.dir", String::from("out"))?);
        let emit_trajectory = e.or("output.emit_trajectory", Flag(true))?.0;
        let emit_landscape = e.or("output.emit_landscape", Flag(false))?.0;
        let mut landscapes = Vec::new();
        for k in 1.. {
            let prefix = format!("output.landscape.{k}");
            let axes_key = format!("{prefix}.axes");
            if !e.has(&axes_key) {
                break;
            }
            let axes_line = e.map.get(&axes_key).map(|(_, l)| *l);
            let axes: String = e.required(&axes_key)?;
            let names: Vec<&str> = axes.split(',').map(str::trim).collect();
            let axis_error = |message: String| ConfigError {
                line: axes_line,
                key: axes_key.clone(),
                message,
            };
            if names.len() != 2 {
                return Err(axis_error("expected two axis names".into()));
            }
            for name in &names {
                if model.axis_index(name).is_none() {
                    return Err(axis_error(format!("unknown parameter axis `{name}`")));
                }
            }
            if names[0] == names[1] {
                return Err(axis_error(format!("both axes are `{}`", names[0])));
            }
            let grid = |e: &mut Entries, which: &str| -> Result<(f64, f64, usize), ConfigError> {
                let key = format!("{prefix}.{which}");
                let (v, line) = e
                    .list(&key)?
                    .ok_or_else(|| e.error(&key, "missing required key"))?;
                let n = v.get(2).copied().unwrap_or(0.0);
                if v.len() != 3 || n < 1.0 || n.fract() != 0.0 || !v[0].is_finite() || !v[1].is_finite() {
                    return Err(ConfigError {
                        line: Some(line),
                        key,
                        message: "expected `lo, hi, n` with integer n >= 1".into(),
                    });
                }
                Ok((v[0], v[1], n as usize))
            };
            let grid1 = grid(&mut e, "grid1")?;
            let grid2 = grid(&mut e, "grid2")?;
            landscapes.push(SliceSpec {
                axis1: names[0].to_string(),
                axis2: names[1].to_string(),
                grid1,
                grid2,
            });
        }

        if let Some((key, (_, line))) = e.map.iter().next() {
            return Err(ConfigError {
                line: Some(*line),
                key: key.clone(),
                message: "unknown key".into(),
            });
        }

        Ok(RunConfig {
            model,
            init,
            data,
            solver,
            output: OutputSpec {
                dir,
                emit_trajectory,
                emit_landscape,
                landscapes,
            },
        })
    }

    /// Serializes every key, defaults included.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut put = |k: &str, v: String| out.push_str(&format!("{k} = {v}\n"));
        let list = |v: &[f64]| v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(", ");
        put("model.rank", self.model.rank.to_string());
        put("model.dim", self.model.dim.to_string());
        put("model.terms", self.model.terms.to_string());
        put("model.tied", self.model.tied.to_string());
        match &self.init {
            InitSpec::Explicit(values) => {
                put("init.kind", "explicit".into());
                put("init.values", list(values));
            }
            InitSpec::Random {
                seed,
                amplitude,
                growth,
                frequency,
                phase,
            } => {
                put("init.kind", "random".into());
                put("init.seed", seed.to_string());
                put("init.amplitude_range", list(&[amplitude.0, amplitude.1]));
                put("init.growth_range", list(&[growth.0, growth.1]));
                put("init.frequency_range", list(&[frequency.0, frequency.1]));
                put("init.phase_range", list(&[phase.0, phase.1]));
            }
        }
        match &self.data {
            DataSpec::Grid {
                points_per_axis,
                domain,
                target,
            } => {
                put("data.kind", "grid".into());
                put("data.points_per_axis", points_per_axis.to_string());
                put("data.domain", list(&[domain.0, domain.1]));
                put("data.target", target.clone());
            }
            DataSpec::CsvFile { path } => {
                put("data.kind", "csv_file".into());
                put("data.path", path.display().to_string());
            }
        }
        let s = &self.solver;
        put("solver.method", s.method.code().into());
        put("solver.id_inner_tol", format!("{:?}", s.id_inner_tol));
        put("solver.id_max_inner", s.id_max_inner.to_string());
        put("solver.id_max_outer", s.id_max_outer.to_string());
        put(
            "solver.id_jacobian",
            match s.id_jacobian {
                JacobianMode::Full => "full".into(),
                JacobianMode::Block => "block".into(),
            },
        );
        put("solver.id_lambda0", format!("{:?}", s.id_lambda0));
        put("solver.id_backtrack_factor", format!("{:?}", s.id_backtrack_factor));
        put("solver.id_max_halvings", s.id_max_halvings.to_string());
        put("solver.sd_max_iters", s.sd_max_iters.to_string());
        put("solver.sd_c1", format!("{:?}", s.sd_c1));
        put("solver.sd_rho", format!("{:?}", s.sd_rho));
        put("solver.sd_step0", format!("{:?}", s.sd_step0));
        put("solver.ncg_max_iters", s.ncg_max_iters.to_string());
        put("solver.ncg_loss_tol", format!("{:?}", s.ncg_loss_tol));
        put(
            "solver.ncg_cg_residual_tol",
            match s.ncg_cg_residual_tol {
                CgResidualTol::Adaptive => "adaptive".into(),
                CgResidualTol::Fixed(t) => format!("{t:?}"),
            },
        );
        put("output.dir", self.output.dir.display().to_string());
        put("output.emit_trajectory", self.output.emit_trajectory.to_string());
        put("output.emit_landscape", self.output.emit_landscape.to_string());
        for (k, slice) in self.output.landscapes.iter().enumerate() {
            let prefix = format!("output.landscape.{}", k + 1);
            put(&format!("{prefix}.axes"), format!("{}, {}", slice.axis1, slice.axis2));
            let g = |(lo, hi, n): (f64, f64, usize)| format!("{lo:?}, {hi:?}, {n}");
            put(&format!("{prefix}.grid1"), g(slice.grid1));
            put(&format!("{prefix}.grid2"), g(slice.grid2));
        }
        out
    }

    /// Initial parameters described by the `init` block.
    pub fn initial_params(&self) -> crate::Result<ModelParams> {
        let layout = self.model;
        let values = match &self.init {
            InitSpec::Explicit(values) => values.clone(),
            InitSpec::Random {
                seed,
                amplitude,
                growth,
                frequency,
                phase,
            } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                (0..layout.len())
                    .map(|k| {
                        let (lo, hi) = match layout.decode(k).3 {
                            ParamKind::Amplitude => *amplitude,
                            ParamKind::Growth => *growth,
                            ParamKind::Frequency => *frequency,
                            ParamKind::Phase => *phase,
                        };
                        if lo == hi {
                            lo
                        } else {
                            rng.gen_range(lo..hi)
                        }
                    })
                    .collect()
            }
        };
        ModelParams::unflatten(&ParamVector::new(layout, values)?)
    }

    /// Loads or generates the dataset; relative paths resolve against `base_dir`.
    pub fn dataset(&self, base_dir: &Path) -> crate::Result<Dataset> {
        let data = match &self.data {
            DataSpec::Grid {
                points_per_axis,
                domain,
                target,
            } => make_grid_dataset(*points_per_axis, self.model.dim, *domain, target)?,
            DataSpec::CsvFile { path } => read_dataset_csv(&base_dir.join(path))
                .map_err(|e| crate::Error::InvalidDataset(e.to_string()))?,
        };
        if data.dim() != self.model.dim {
            return Err(crate::Error::DimensionMismatch {
                expected: self.model.dim,
                found: data.dim(),
            });
        }
        Ok(data)
    }
}
