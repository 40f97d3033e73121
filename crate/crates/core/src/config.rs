//! Run configuration: flat `key = value` text with dotted sections.
//!
//! ```text
//! benchmark = fisher_kpp
//! mesh.h = 0.15
//! time.dt = 0.005
//! noise.delta = 0, 0.03
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::benchmarks::{BenchmarkKind, DataIndexing};
use crate::error::{Error, Result};
use crate::mesh::Point;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum InitialParameter {
    /// 1 inside the ball, 0 outside.
    Ball { cx: f64, cy: f64, r: f64 },
    /// 1 inside the box, 0 outside.
    Box { x0: f64, x1: f64, y0: f64, y1: f64 },
    Constant(f64),
    Truth,
}

impl InitialParameter {
    pub fn eval(&self, p: Point, truth: impl Fn(Point) -> f64) -> f64 {
        match *self {
            InitialParameter::Ball { cx, cy, r } => f64::from((p[0] - cx).hypot(p[1] - cy) < r),
            InitialParameter::Box { x0, x1, y0, y1 } => f64::from(p[0] >= x0 && p[0] <= x1 && p[1] >= y0 && p[1] <= y1),
            InitialParameter::Constant(c) => c,
            InitialParameter::Truth => truth(p),
        }
    }
}

impl fmt::Display for InitialParameter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InitialParameter::Ball { cx, cy, r } => write!(f, "ball({cx},{cy},{r})"),
            InitialParameter::Box { x0, x1, y0, y1 } => write!(f, "box({x0},{x1},{y0},{y1})"),
            InitialParameter::Constant(c) => write!(f, "constant({c})"),
            InitialParameter::Truth => f.write_str("truth"),
        }
    }
}

impl FromStr for InitialParameter {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let s = s.trim();
        if s == "truth" {
            return Ok(InitialParameter::Truth);
        }
        if s == "zero" {
            return Ok(InitialParameter::Constant(0.0));
        }
        let (name, rest) = s.split_once('(').ok_or_else(|| format!("unrecognised descriptor `{s}`"))?;
        let args = rest.strip_suffix(')').ok_or_else(|| format!("missing `)` in `{s}`"))?;
        let nums = args
            .split(',')
            .map(|a| a.trim().parse::<f64>().map_err(|e| format!("`{a}`: {e}")))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        match (name.trim(), nums.as_slice()) {
            ("ball", &[cx, cy, r]) if r > 0.0 => Ok(InitialParameter::Ball { cx, cy, r }),
            ("box", &[x0, x1, y0, y1]) if x1 > x0 && y1 > y0 => Ok(InitialParameter::Box { x0, x1, y0, y1 }),
            ("constant", &[c]) => Ok(InitialParameter::Constant(c)),
            _ => Err(format!("invalid descriptor `{s}`")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SourceMode {
    /// The physical (random or manufactured) source.
    Physical,
    /// Source making the truth an exact fixed point of the discrete scheme.
    Consistent,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InitialState {
    /// First data snapshot.
    Data,
    /// Noise-free truth at t = 0.
    Truth,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub benchmark: BenchmarkKind,
    pub h: f64,
    pub truth_h: f64,
    pub truth_substeps: usize,
    pub truth_parameter_file: Option<PathBuf>,
    pub dt: f64,
    pub t_end: f64,
    pub deltas: Vec<f64>,
    pub per_snapshot_noise: bool,
    pub seed: u64,
    pub source_mode: SourceMode,
    pub initial_parameter: InitialParameter,
    pub initial_state: InitialState,
    pub z_lower: f64,
    pub z_upper: f64,
    pub embedding_constant: f64,
    /// `None` uses the L2 norm of the true parameter on the reconstruction mesh.
    pub param_norm_bound: Option<f64>,
    pub stabilizer_m: Option<f64>,
    pub stabilizer_scale: f64,
    pub indexing: DataIndexing,
    pub cg_tol: f64,
    pub snapshot_times: Vec<f64>,
    pub discrepancy_threshold: f64,
    pub output_dir: PathBuf,
    pub write_vtk: bool,
}

impl RunConfig {
    /// Small defaults that run in seconds to minutes.
    pub fn desk(kind: BenchmarkKind) -> Self {
        let base = RunConfig {
            benchmark: kind,
            h: 0.15,
            truth_h: 0.1,
            truth_substeps: 1,
            truth_parameter_file: None,
            dt: 0.005,
            t_end: 2.0,
            deltas: vec![0.0],
            per_snapshot_noise: true,
            seed: 1,
            source_mode: SourceMode::Physical,
            initial_parameter: InitialParameter::Constant(0.0),
            initial_state: InitialState::Data,
            z_lower: 1.0,
            z_upper: 2.2,
            embedding_constant: 1.0,
            param_norm_bound: None,
            stabilizer_m: None,
            stabilizer_scale: crate::benchmarks::StabilizerConfig::DEFAULT_SCALE,
            indexing: DataIndexing::AsPrinted,
            cg_tol: 1e-10,
            snapshot_times: vec![0.0, 0.05, 0.1, 0.2, 0.5, 1.0, 2.0],
            discrepancy_threshold: 1e-3,
            output_dir: PathBuf::from("out").join(kind.name()),
            write_vtk: true,
        };
        match kind {
            BenchmarkKind::Darcy => RunConfig {
                initial_parameter: InitialParameter::Ball { cx: 0.5, cy: 0.5, r: 0.42 },
                ..base
            },
            BenchmarkKind::FisherKpp => RunConfig {
                initial_parameter: InitialParameter::Box { x0: -1.15, x1: 1.15, y0: -1.15, y1: 1.15 },
                deltas: vec![0.0, 0.03],
                ..base
            },
            BenchmarkKind::NonlinearPotential => RunConfig {
                h: 0.25,
                deltas: vec![0.0, 0.05],
                ..base
            },
            BenchmarkKind::AllenCahn => RunConfig {
                h: 0.2,
                deltas: vec![0.0, 0.05],
                z_lower: 0.05,
                z_upper: 1.5,
                ..base
            },
        }
    }

    /// The published resolutions; long-running.
    pub fn paper(kind: BenchmarkKind) -> Self {
        let desk = RunConfig::desk(kind);
        let base = RunConfig {
            dt: 0.001,
            t_end: 5.0,
            snapshot_times: vec![0.0, 0.005, 0.05, 0.1, 0.2, 0.5, 1.5, 5.0],
            output_dir: PathBuf::from("out").join(format!("{}_paper", kind.name())),
            ..desk
        };
        match kind {
            BenchmarkKind::Darcy => RunConfig { h: 0.04, truth_h: 0.03, ..base },
            BenchmarkKind::FisherKpp => RunConfig {
                h: 0.1,
                truth_h: 0.075,
                t_end: 10.0,
                snapshot_times: vec![0.0, 0.001, 0.05, 0.075, 0.2, 0.5, 1.5, 5.0, 10.0],
                ..base
            },
            BenchmarkKind::NonlinearPotential => RunConfig { h: 0.1, ..base },
            BenchmarkKind::AllenCahn => RunConfig {
                h: 0.1,
                deltas: vec![0.0, 0.05, 0.1, 0.2],
                ..base
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |field: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::config(field, format!("must be a positive finite number, got {v}")))
            }
        };
        positive("mesh.h", self.h)?;
        positive("time.dt", self.dt)?;
        positive("time.t_end", self.t_end)?;
        positive("solver.tol", self.cg_tol)?;
        if !self.benchmark.is_potential() {
            positive("truth.h", self.truth_h)?;
            if self.truth_h > 0.75 * self.h {
                return Err(Error::config("truth.h", format!("must be <= 0.75 * mesh.h = {}", 0.75 * self.h)));
            }
        }
        if self.truth_substeps == 0 {
            return Err(Error::config("truth.substeps", "must be >= 1"));
        }
        let steps = (self.t_end / self.dt).round();
        if (steps * self.dt - self.t_end).abs() > 1e-9 * self.t_end {
            return Err(Error::config("time.t_end", "must be a multiple of time.dt"));
        }
        if self.deltas.is_empty() {
            return Err(Error::config("noise.delta", "needs at least one level"));
        }
        if let Some(d) = self.deltas.iter().find(|d| !(**d >= 0.0 && d.is_finite())) {
            return Err(Error::config("noise.delta", format!("levels must be >= 0, got {d}")));
        }
        for (i, d) in self.deltas.iter().enumerate() {
            if self.deltas[..i].contains(d) {
                return Err(Error::config("noise.delta", format!("level {d} is listed twice")));
            }
        }
        if self.benchmark.is_potential() {
            positive("stabilizer.z_lower", self.z_lower)?;
            if !(self.z_upper >= self.z_lower) {
                return Err(Error::config("stabilizer.z_upper", "must be >= stabilizer.z_lower"));
            }
            positive("stabilizer.embedding_constant", self.embedding_constant)?;
            if let Some(m) = self.stabilizer_m {
                positive("stabilizer.m", m)?;
            }
            if let Some(b) = self.param_norm_bound {
                if !(b >= 0.0) {
                    return Err(Error::config("stabilizer.param_norm_bound", "must be >= 0"));
                }
            }
            if !(self.stabilizer_scale >= 1.0) {
                return Err(Error::config("stabilizer.scale", "must be >= 1"));
            }
        }
        if self.snapshot_times.iter().any(|t| !(*t >= 0.0)) {
            return Err(Error::config("output.snapshots", "times must be >= 0"));
        }
        positive("run.discrepancy_threshold", self.discrepancy_threshold)?;
        Ok(())
    }

    /// Parses a config file; keys absent from the text keep the desk
    /// defaults of the named benchmark.
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::config(format!("line {}", lineno + 1), "expected `key = value`"))?;
            let k = k.trim().to_string();
            if entries.insert(k.clone(), v.trim().to_string()).is_some() {
                return Err(Error::config(k, "given more than once"));
            }
        }
        let kind: BenchmarkKind = entries
            .remove("benchmark")
            .ok_or_else(|| Error::config("benchmark", "missing"))?
            .parse()?;
        let mut cfg = RunConfig::desk(kind);
        for (k, v) in &entries {
            cfg.set(k, v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        RunConfig::parse(&text)
    }

    /// Sets one dotted key from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let err = |m: String| Error::config(key, m);
        let real = || value.parse::<f64>().map_err(|e| err(format!("`{value}`: {e}")));
        let list = || -> Result<Vec<f64>> {
            value
                .split(',')
                .filter(|s| !s.trim().is_empty())
                .map(|s| s.trim().parse::<f64>().map_err(|e| err(format!("`{s}`: {e}"))))
                .collect()
        };
        let boolean = || match value {
            "true" => Ok(true),
            "false" => Ok(false),
            _ => Err(err(format!("expected true or false, got `{value}`"))),
        };
        match key {
            "mesh.h" => self.h = real()?,
            "truth.h" => self.truth_h = real()?,
            "truth.substeps" => self.truth_substeps = value.parse().map_err(|e| err(format!("{e}")))?,
            "truth.parameter_file" => self.truth_parameter_file = Some(PathBuf::from(value)),
            "time.dt" => self.dt = real()?,
            "time.t_end" => self.t_end = real()?,
            "noise.delta" => self.deltas = list()?,
            "noise.per_snapshot" => self.per_snapshot_noise = boolean()?,
            "seed" => self.seed = value.parse().map_err(|e| err(format!("{e}")))?,
            "source.mode" => {
                self.source_mode = match value {
                    "physical" => SourceMode::Physical,
                    "consistent" => SourceMode::Consistent,
                    _ => return Err(err(format!("expected physical or consistent, got `{value}`"))),
                }
            }
            "initial.parameter" => self.initial_parameter = value.parse().map_err(err)?,
            "initial.state" => {
                self.initial_state = match value {
                    "data" => InitialState::Data,
                    "truth" => InitialState::Truth,
                    _ => return Err(err(format!("expected data or truth, got `{value}`"))),
                }
            }
            "stabilizer.z_lower" => self.z_lower = real()?,
            "stabilizer.z_upper" => self.z_upper = real()?,
            "stabilizer.embedding_constant" => self.embedding_constant = real()?,
            "stabilizer.param_norm_bound" => self.param_norm_bound = if value == "auto" { None } else { Some(real()?) },
            "stabilizer.m" => self.stabilizer_m = if value == "auto" { None } else { Some(real()?) },
            "stabilizer.scale" => self.stabilizer_scale = real()?,
            "stabilizer.indexing" => {
                self.indexing = match value {
                    "printed" => DataIndexing::AsPrinted,
                    "uniform_next" => DataIndexing::UniformNext,
                    _ => return Err(err(format!("expected printed or uniform_next, got `{value}`"))),
                }
            }
            "solver.tol" => self.cg_tol = real()?,
            "output.snapshots" => self.snapshot_times = list()?,
            "output.dir" => self.output_dir = PathBuf::from(value),
            "output.vtk" => self.write_vtk = boolean()?,
            "run.discrepancy_threshold" => self.discrepancy_threshold = real()?,
            _ => return Err(Error::config(key, "unknown key")),
        }
        Ok(())
    }

    /// `key = value` lines that parse back to this configuration.
    pub fn entries(&self) -> Vec<(String, String)> {
        let join = |v: &[f64]| v.iter().map(f64::to_string).collect::<Vec<_>>().join(", ");
        let mut out = vec![
            ("benchmark", self.benchmark.name().to_string()),
            ("mesh.h", self.h.to_string()),
            ("truth.h", self.truth_h.to_string()),
            ("truth.substeps", self.truth_substeps.to_string()),
            ("time.dt", self.dt.to_string()),
            ("time.t_end", self.t_end.to_string()),
            ("noise.delta", join(&self.deltas)),
            ("noise.per_snapshot", self.per_snapshot_noise.to_string()),
            ("seed", self.seed.to_string()),
            (
                "source.mode",
                match self.source_mode {
                    SourceMode::Physical => "physical",
                    SourceMode::Consistent => "consistent",
                }
                .to_string(),
            ),
            ("initial.parameter", self.initial_parameter.to_string()),
            (
                "initial.state",
                match self.initial_state {
                    InitialState::Data => "data",
                    InitialState::Truth => "truth",
                }
                .to_string(),
            ),
            ("stabilizer.z_lower", self.z_lower.to_string()),
            ("stabilizer.z_upper", self.z_upper.to_string()),
            ("stabilizer.embedding_constant", self.embedding_constant.to_string()),
            ("stabilizer.param_norm_bound", self.param_norm_bound.map_or("auto".into(), |v| v.to_string())),
            ("stabilizer.m", self.stabilizer_m.map_or("auto".into(), |v| v.to_string())),
            ("stabilizer.scale", self.stabilizer_scale.to_string()),
            (
                "stabilizer.indexing",
                match self.indexing {
                    DataIndexing::AsPrinted => "printed",
                    DataIndexing::UniformNext => "uniform_next",
                }
                .to_string(),
            ),
            ("solver.tol", self.cg_tol.to_string()),
            ("output.snapshots", join(&self.snapshot_times)),
            ("output.dir", self.output_dir.display().to_string()),
            ("output.vtk", self.write_vtk.to_string()),
            ("run.discrepancy_threshold", self.discrepancy_threshold.to_string()),
        ];
        if let Some(p) = &self.truth_parameter_file {
            out.push(("truth.parameter_file", p.display().to_string()));
        }
        out.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
    }

    pub fn render(&self) -> String {
        self.entries().iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}
