//! Error tracking, decay fitting and file output (CSV, legacy VTK, reports).

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::fem::{CellField, NodalField};
use crate::mesh::Mesh;
use crate::mras::MrasState;

/// Per-step L2 errors of the parameter and state estimates.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ErrorSeries {
    pub times: Vec<f64>,
    pub eq: Vec<f64>,
    pub eu: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Monotonicity {
    pub violations: usize,
    /// Largest `(E_{n+1} - E_n) / E_n` observed, or 0.
    pub worst_relative_uptick: f64,
    pub worst_step: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DecayFit {
    pub rate: f64,
    /// Root-mean-square residual of the log-linear fit.
    pub residual: f64,
    pub points: usize,
}

/// `(||q - q_true||, ||u - u_true||)` in L2.
pub fn error_sample(mesh: &Mesh, q_true: &CellField, u_true: &NodalField, state: &MrasState) -> (f64, f64) {
    (state.q.sub(q_true).l2_norm(mesh), state.u.sub(u_true).l2_norm(mesh))
}

impl ErrorSeries {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn push(&mut self, t: f64, eq: f64, eu: f64) {
        self.times.push(t);
        self.eq.push(eq);
        self.eu.push(eu);
    }

    pub fn record(&mut self, mesh: &Mesh, t: f64, q_true: &CellField, u_true: &NodalField, state: &MrasState) {
        let (eq, eu) = error_sample(mesh, q_true, u_true, state);
        self.push(t, eq, eu);
    }

    /// `eu^2 + eq^2` per record.
    pub fn energy(&self) -> Vec<f64> {
        self.eq.iter().zip(&self.eu).map(|(q, u)| q * q + u * u).collect()
    }

    /// Counts steps where the energy grows by more than `slack` relative to
    /// the previous value.
    pub fn monotonicity(&self, slack: f64) -> Monotonicity {
        let e = self.energy();
        let mut out = Monotonicity {
            violations: 0,
            worst_relative_uptick: 0.0,
            worst_step: None,
        };
        for (n, w) in e.windows(2).enumerate() {
            let rel = if w[0] > 0.0 {
                (w[1] - w[0]) / w[0]
            } else if w[1] > 0.0 {
                f64::INFINITY
            } else {
                0.0
            };
            if rel > slack {
                out.violations += 1;
            }
            if rel > out.worst_relative_uptick {
                out.worst_relative_uptick = rel;
                out.worst_step = Some(n + 1);
            }
        }
        out
    }

    /// Least-squares fit of `log(E_n / E_0) ~ b - C' t` over the first half of
    /// the time axis; returns `C'`. Records with nonpositive energy are skipped.
    pub fn fit_decay(&self) -> Result<DecayFit> {
        let e = self.energy();
        let e0 = *e.first().ok_or_else(|| Error::invalid("empty error series"))?;
        if !(e0 > 0.0) {
            return Err(Error::invalid("initial energy must be positive"));
        }
        let t0 = self.times[0];
        let half = t0 + 0.5 * (self.times[self.len() - 1] - t0);
        let pts: Vec<(f64, f64)> = self
            .times
            .iter()
            .zip(&e)
            .filter(|&(&t, &en)| t <= half + 1e-12 && en > 0.0)
            .map(|(&t, &en)| (t, (en / e0).ln()))
            .collect();
        if pts.len() < 2 {
            return Err(Error::invalid("decay fit needs at least two positive records"));
        }
        let m = pts.len() as f64;
        let tm = pts.iter().map(|p| p.0).sum::<f64>() / m;
        let ym = pts.iter().map(|p| p.1).sum::<f64>() / m;
        let stt: f64 = pts.iter().map(|p| (p.0 - tm).powi(2)).sum();
        let sty: f64 = pts.iter().map(|p| (p.0 - tm) * (p.1 - ym)).sum();
        let slope = sty / stt;
        let intercept = ym - slope * tm;
        let ss: f64 = pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
        Ok(DecayFit {
            rate: -slope,
            residual: (ss / m).sqrt(),
            points: pts.len(),
        })
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("t,eq,eu,energy\n");
        for (i, e) in self.energy().iter().enumerate() {
            writeln!(s, "{:.16e},{:.16e},{:.16e},{:.16e}", self.times[i], self.eq[i], self.eu[i], e).unwrap();
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        if lines.next().map(str::trim) != Some("t,eq,eu,energy") {
            return Err(Error::invalid("missing CSV header `t,eq,eu,energy`"));
        }
        let mut out = ErrorSeries::default();
        for (i, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let cols: Vec<f64> = line
                .split(',')
                .map(|c| c.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::invalid(format!("CSV line {}: {e}", i + 2)))?;
            if cols.len() != 4 {
                return Err(Error::invalid(format!("CSV line {}: expected 4 columns", i + 2)));
            }
            out.push(cols[0], cols[1], cols[2]);
        }
        Ok(out)
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        write_file(path.as_ref(), &self.to_csv())
    }
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Legacy ASCII VTK unstructured grid with P1 point data and P0 cell data.
pub fn vtk_string(mesh: &Mesh, title: &str, point_data: &[(&str, &NodalField)], cell_data: &[(&str, &CellField)]) -> Result<String> {
    for (_, f) in point_data {
        f.check(mesh)?;
    }
    for (_, f) in cell_data {
        f.check(mesh)?;
    }
    let nv = mesh.n_vertices();
    let nt = mesh.n_triangles();
    let mut s = String::new();
    s.push_str("# vtk DataFile Version 3.0\n");
    s.push_str(title.lines().next().unwrap_or(""));
    s.push_str("\nASCII\nDATASET UNSTRUCTURED_GRID\n");
    writeln!(s, "POINTS {nv} double").unwrap();
    for p in mesh.vertices() {
        writeln!(s, "{} {} 0", fmt_num(p[0]), fmt_num(p[1])).unwrap();
    }
    writeln!(s, "CELLS {nt} {}", 4 * nt).unwrap();
    for t in mesh.triangles() {
        writeln!(s, "3 {} {} {}", t[0], t[1], t[2]).unwrap();
    }
    writeln!(s, "CELL_TYPES {nt}").unwrap();
    for _ in 0..nt {
        s.push_str("5\n");
    }
    if !point_data.is_empty() {
        writeln!(s, "POINT_DATA {nv}").unwrap();
        for (name, f) in point_data {
            scalars(&mut s, name, f);
        }
    }
    if !cell_data.is_empty() {
        writeln!(s, "CELL_DATA {nt}").unwrap();
        for (name, f) in cell_data {
            scalars(&mut s, name, f);
        }
    }
    Ok(s)
}

fn scalars(s: &mut String, name: &str, values: &[f64]) {
    writeln!(s, "SCALARS {name} double 1\nLOOKUP_TABLE default").unwrap();
    for v in values {
        s.push_str(&fmt_num(*v));
        s.push('\n');
    }
}

fn fmt_num(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_vtk(
    path: impl AsRef<Path>,
    mesh: &Mesh,
    title: &str,
    point_data: &[(&str, &NodalField)],
    cell_data: &[(&str, &CellField)],
) -> Result<()> {
    write_file(path.as_ref(), &vtk_string(mesh, title, point_data, cell_data)?)
}

/// Summary of one run, written as `key = value` lines.
#[derive(Clone, Debug, Default)]
pub struct RunReport {
    pub config: Vec<(String, String)>,
    pub initial_eq: f64,
    pub initial_eu: f64,
    pub final_eq: f64,
    pub final_eu: f64,
    pub monotonicity_violations: usize,
    pub worst_relative_uptick: f64,
    pub decay_rate: Option<f64>,
    pub threshold_step: Option<usize>,
    pub wall_clock_secs: f64,
}

impl RunReport {
    pub fn from_series(series: &ErrorSeries, slack: f64) -> Self {
        let mono = series.monotonicity(slack);
        let first = |v: &[f64]| v.first().copied().unwrap_or(f64::NAN);
        let last = |v: &[f64]| v.last().copied().unwrap_or(f64::NAN);
        RunReport {
            initial_eq: first(&series.eq),
            initial_eu: first(&series.eu),
            final_eq: last(&series.eq),
            final_eu: last(&series.eu),
            monotonicity_violations: mono.violations,
            worst_relative_uptick: mono.worst_relative_uptick,
            decay_rate: series.fit_decay().ok().map(|f| f.rate),
            ..Default::default()
        }
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.config {
            writeln!(s, "config.{k} = {v}").unwrap();
        }
        writeln!(s, "initial_eq = {:e}", self.initial_eq).unwrap();
        writeln!(s, "initial_eu = {:e}", self.initial_eu).unwrap();
        writeln!(s, "final_eq = {:e}", self.final_eq).unwrap();
        writeln!(s, "final_eu = {:e}", self.final_eu).unwrap();
        writeln!(s, "eq_ratio = {:e}", self.final_eq / self.initial_eq).unwrap();
        writeln!(s, "monotonicity_violations = {}", self.monotonicity_violations).unwrap();
        writeln!(s, "worst_relative_uptick = {:e}", self.worst_relative_uptick).unwrap();
        match self.decay_rate {
            Some(r) => writeln!(s, "decay_rate = {r:e}").unwrap(),
            None => s.push_str("decay_rate = none\n"),
        }
        match self.threshold_step {
            Some(k) => writeln!(s, "threshold_step = {k}").unwrap(),
            None => s.push_str("threshold_step = none\n"),
        }
        writeln!(s, "wall_clock_secs = {:.3}", self.wall_clock_secs).unwrap();
        s
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        write_file(path.as_ref(), &self.render())
    }
}
