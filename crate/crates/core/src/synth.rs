//! Synthetic data: ground truths, forward simulation on a finer mesh,
//! restriction to the reconstruction mesh and noise injection.

use std::f64::consts::PI;
use std::path::Path;

use log::info;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::benchmarks::BenchmarkKind;
use crate::error::{Error, Result};
use crate::fem::{assemble_mass, assemble_stiffness, assemble_weighted_mass, apply_dirichlet, CellField, NodalField, Transfer};
use crate::mesh::{Mesh, Point};
use crate::mras::{Observations, TimeGrid};
use crate::sparse::{cg_solve_checked, CgOptions};

/// Side length of the random source grid.
pub const SOURCE_GRID: usize = 128;

/// Stream offsets keeping the independent random draws apart.
const STREAM_SOURCE: u64 = 0;
const STREAM_NOISE: u64 = 1 << 40;
const STREAM_INITIAL: u64 = 1 << 41;

/// Darcy truth: 1 on two rectangles, 0.25 elsewhere.
pub fn darcy_truth(p: Point) -> f64 {
    let inside = |x0: f64, x1: f64, y0: f64, y1: f64| p[0] >= x0 && p[0] <= x1 && p[1] >= y0 && p[1] <= y1;
    if inside(0.15, 0.45, 0.2, 0.8) || inside(0.5, 0.85, 0.5, 0.85) {
        1.0
    } else {
        0.25
    }
}

/// Darcy initial guess: indicator of the ball of radius 0.42 around (0.5, 0.5).
pub fn darcy_initial_guess(p: Point) -> f64 {
    if (p[0] - 0.5).hypot(p[1] - 0.5) < 0.42 {
        1.0
    } else {
        0.0
    }
}

/// Fisher-KPP truth: 1 on the ring `0.5 < r < 0.9`, 0.25 elsewhere.
pub fn fisher_truth(p: Point) -> f64 {
    let r2 = p[0] * p[0] + p[1] * p[1];
    if r2 > 0.25 && r2 < 0.81 {
        1.0
    } else {
        0.25
    }
}

pub fn fisher_initial_guess(p: Point) -> f64 {
    if p[0].abs() <= 1.15 && p[1].abs() <= 1.15 {
        1.0
    } else {
        0.0
    }
}

fn fisher_bump(p: Point) -> f64 {
    3.0 * (-(p[0] * p[0] + p[1] * p[1]) / 0.4).exp()
}

pub fn fisher_source(p: Point, t: f64) -> f64 {
    fisher_bump(p) * (2.0 * t).cos()
}

pub fn fisher_initial_state(p: Point) -> f64 {
    fisher_bump(p)
}

/// Cone potential on the disk of radius pi.
pub fn potential_truth(p: Point) -> f64 {
    PI - p[0].hypot(p[1])
}

/// Positive initial state of the potential benchmark; its gradient vanishes
/// on the circle of radius pi.
pub fn potential_initial_state(p: Point) -> f64 {
    let (x, y) = (p[0], p[1]);
    let r = x.hypot(y);
    let b = 1.0 - r * r / (PI * PI);
    1.6 + 0.3 * r.cos() + 0.15 * (x * x - y * y) * b * b
}

fn potential_initial_laplacian(p: Point) -> f64 {
    let (x, y) = (p[0], p[1]);
    let r = x.hypot(y);
    let radial = if r < 1e-8 { -2.0 } else { -r.cos() - r.sin() / r };
    let pi2 = PI * PI;
    0.3 * radial + 0.15 * (x * x - y * y) * (-24.0 / pi2 + 32.0 * r * r / (pi2 * pi2))
}

pub fn potential_state(p: Point, t: f64) -> f64 {
    potential_initial_state(p) * (6.0 - t) / 6.0 + t / 6.0
}

/// Three-part Allen-Cahn potential with values 1, 4 and 2.
pub fn allen_cahn_truth(p: Point) -> f64 {
    let (x1, x2) = (p[0], p[1]);
    if x1 + x2 >= 1.0 {
        4.0
    } else if x1 - 2.0 * x2 < -0.4 {
        1.0
    } else {
        2.0
    }
}

fn allen_cahn_shape(p: Point) -> f64 {
    (PI / 4.0 * (p[0] - 2.0)).sin() * (PI / 2.0 + (p[1] - 1.0)).sin()
}

pub fn allen_cahn_state(p: Point, t: f64) -> f64 {
    allen_cahn_shape(p) * (10.0 - t) / 10.0 + 1.0
}

fn reaction(c: f64, u: f64, power: i32) -> f64 {
    c * u.powi(power) + c.abs().powf(2.0 / 3.0) * c * u
}

fn potential_source(p: Point, t: f64) -> f64 {
    let u = potential_state(p, t);
    let dt = (1.0 - potential_initial_state(p)) / 6.0;
    let lap = potential_initial_laplacian(p) * (6.0 - t) / 6.0;
    dt - lap + reaction(potential_truth(p), u, 1)
}

fn allen_cahn_source(p: Point, t: f64) -> f64 {
    let s = allen_cahn_shape(p);
    let u = allen_cahn_state(p, t);
    let dt = -s / 10.0;
    let lap = -(PI * PI / 16.0 + 1.0) * s * (10.0 - t) / 10.0;
    dt - lap + reaction(allen_cahn_truth(p), u, 3)
}

/// Manufactured source `D_t u - lap u + c u^p + |c|^(2/3) c u` of a potential benchmark.
pub fn manufactured_source(kind: BenchmarkKind) -> Result<fn(Point, f64) -> f64> {
    match kind {
        BenchmarkKind::NonlinearPotential => Ok(potential_source),
        BenchmarkKind::AllenCahn => Ok(allen_cahn_source),
        _ => Err(Error::invalid(format!("{kind} has no manufactured solution"))),
    }
}

/// Counter-based generator for draw `stream` under `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Standard normal values on a regular grid over a box, bilinearly interpolated.
#[derive(Clone, Debug, PartialEq)]
pub struct GridField {
    pub nx: usize,
    pub ny: usize,
    pub xmin: f64,
    pub xmax: f64,
    pub ymin: f64,
    pub ymax: f64,
    /// Row-major, `values[j * nx + i]` at `(x_i, y_j)`.
    pub values: Vec<f64>,
}

impl GridField {
    pub fn gaussian(nx: usize, ny: usize, bounds: (Point, Point), rng: &mut ChaCha8Rng) -> Self {
        let values = (0..nx * ny).map(|_| StandardNormal.sample(rng)).collect();
        GridField {
            nx,
            ny,
            xmin: bounds.0[0],
            xmax: bounds.1[0],
            ymin: bounds.0[1],
            ymax: bounds.1[1],
            values,
        }
    }

    /// Bilinear interpolation between grid nodes, clamped to the box.
    pub fn bilinear(&self, p: Point) -> f64 {
        let locate = |v: f64, lo: f64, hi: f64, n: usize| {
            let s = ((v - lo) / (hi - lo) * (n - 1) as f64).clamp(0.0, (n - 1) as f64);
            let i = (s.floor() as usize).min(n.saturating_sub(2));
            (i, s - i as f64)
        };
        let (i, fx) = locate(p[0], self.xmin, self.xmax, self.nx);
        let (j, fy) = locate(p[1], self.ymin, self.ymax, self.ny);
        let v = |i: usize, j: usize| self.values[j * self.nx + i];
        let (i1, j1) = ((i + 1).min(self.nx - 1), (j + 1).min(self.ny - 1));
        (1.0 - fx) * (1.0 - fy) * v(i, j) + fx * (1.0 - fy) * v(i1, j) + (1.0 - fx) * fy * v(i, j1) + fx * fy * v(i1, j1)
    }

    /// Value of the voxel containing `p` when the grid is read as `nx * ny` cells.
    pub fn voxel(&self, p: Point) -> f64 {
        let idx = |v: f64, lo: f64, hi: f64, n: usize| (((v - lo) / (hi - lo) * n as f64).floor().max(0.0) as usize).min(n - 1);
        self.values[idx(p[1], self.ymin, self.ymax, self.ny) * self.nx + idx(p[0], self.xmin, self.xmax, self.nx)]
    }

    /// Parses `nx ny xmin xmax ymin ymax` followed by `nx * ny` row-major values.
    pub fn parse(text: &str) -> Result<Self> {
        let mut tokens = text.split_whitespace();
        let mut next = |what: &str| tokens.next().ok_or_else(|| Error::invalid(format!("grid file: missing {what}")));
        let int = |s: &str| s.parse::<usize>().map_err(|e| Error::invalid(format!("grid file: {e}")));
        let real = |s: &str| s.parse::<f64>().map_err(|e| Error::invalid(format!("grid file: {e}")));
        let nx = int(next("nx")?)?;
        let ny = int(next("ny")?)?;
        let xmin = real(next("xmin")?)?;
        let xmax = real(next("xmax")?)?;
        let ymin = real(next("ymin")?)?;
        let ymax = real(next("ymax")?)?;
        if nx == 0 || ny == 0 || !(xmax > xmin) || !(ymax > ymin) {
            return Err(Error::invalid("grid file: degenerate header"));
        }
        let values = (0..nx * ny).map(|_| real(next("value")?)).collect::<Result<Vec<_>>>()?;
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("grid file: non-finite value"));
        }
        Ok(GridField { nx, ny, xmin, xmax, ymin, ymax, values })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        GridField::parse(&text)
    }

    /// P0 field by voxel lookup at element centroids.
    pub fn to_cells(&self, mesh: &Mesh) -> CellField {
        CellField::from_fn(mesh, |p| self.voxel(p))
    }
}

/// The 128x128 standard normal grid over the unit square drawn for time step `step`.
pub fn source_grid(seed: u64, step: usize) -> GridField {
    let mut rng = stream_rng(seed, STREAM_SOURCE + step as u64);
    GridField::gaussian(SOURCE_GRID, SOURCE_GRID, ([0.0, 0.0], [1.0, 1.0]), &mut rng)
}

/// Random Darcy source at time step `step`, interpolated to the mesh vertices.
pub fn random_source(seed: u64, step: usize, mesh: &Mesh) -> NodalField {
    let grid = source_grid(seed, step);
    NodalField::from_fn(mesh, |p| grid.bilinear(p))
}

/// Smooth random Darcy initial state vanishing on the boundary of the unit square.
pub fn darcy_initial_state(seed: u64) -> impl Fn(Point) -> f64 {
    let mut rng = stream_rng(seed, STREAM_INITIAL);
    let grid = GridField::gaussian(6, 6, ([0.0, 0.0], [1.0, 1.0]), &mut rng);
    move |p| 16.0 * p[0] * (1.0 - p[0]) * p[1] * (1.0 - p[1]) * grid.bilinear(p)
}

/// Ground truth on the reconstruction mesh, with the fine-mesh history when a
/// forward simulation produced it.
#[derive(Clone, Debug)]
pub struct TruthBundle {
    pub q: CellField,
    pub u: Vec<NodalField>,
    pub fine_mesh: Option<Mesh>,
    pub u_fine: Option<Vec<NodalField>>,
}

#[derive(Clone, Debug)]
pub struct ObservationSeries {
    pub grid: TimeGrid,
    pub delta: f64,
    pub seed: u64,
    pub data: Observations,
}

/// Closed-form initial state of a benchmark; Darcy depends on the seed.
pub fn initial_state(kind: BenchmarkKind, seed: u64) -> Box<dyn Fn(Point) -> f64> {
    match kind {
        BenchmarkKind::Darcy => Box::new(darcy_initial_state(seed)),
        BenchmarkKind::FisherKpp => Box::new(fisher_initial_state),
        BenchmarkKind::NonlinearPotential => Box::new(|p| potential_state(p, 0.0)),
        BenchmarkKind::AllenCahn => Box::new(|p| allen_cahn_state(p, 0.0)),
    }
}

pub fn truth_parameter(kind: BenchmarkKind) -> fn(Point) -> f64 {
    match kind {
        BenchmarkKind::Darcy => darcy_truth,
        BenchmarkKind::FisherKpp => fisher_truth,
        BenchmarkKind::NonlinearPotential => potential_truth,
        BenchmarkKind::AllenCahn => allen_cahn_truth,
    }
}

/// Physical source at step `n` (time `grid.time(n)`) on the given mesh.
pub fn physical_source(kind: BenchmarkKind, mesh: &Mesh, grid: &TimeGrid, n: usize, seed: u64) -> Result<NodalField> {
    let t = grid.time(n);
    Ok(match kind {
        BenchmarkKind::Darcy => random_source(seed, n, mesh),
        BenchmarkKind::FisherKpp => NodalField::from_fn(mesh, |p| fisher_source(p, t)),
        _ => {
            let g = manufactured_source(kind)?;
            NodalField::from_fn(mesh, |p| g(p, t))
        }
    })
}

/// Implicit Euler history of the Darcy (or lagged Fisher-KPP) truth on
/// `fine`, returned at the reconstruction times. Within reconstruction window
/// `n` the source is frozen at `source(n + 1)`.
pub fn forward_solve(
    kind: BenchmarkKind,
    fine: &Mesh,
    coeff: &CellField,
    u0: &NodalField,
    grid: &TimeGrid,
    substeps: usize,
    source: &dyn Fn(usize) -> Result<NodalField>,
) -> Result<Vec<NodalField>> {
    if kind.is_potential() {
        return Err(Error::invalid(format!("{kind} truth is closed-form; no forward solve")));
    }
    if substeps == 0 {
        return Err(Error::config("truth.substeps", "must be >= 1"));
    }
    coeff.check(fine)?;
    u0.check(fine)?;
    let dt = grid.dt / substeps as f64;
    let mass = assemble_mass(fine);
    let stiff = assemble_stiffness(fine, Some(coeff))?;
    let base = mass.linear_combination(1.0, &stiff, dt)?;
    let zeros = vec![0.0; fine.n_vertices()];
    let cg = CgOptions::default();
    let mut u = u0.clone();
    for (i, fixed) in fine.boundary_flags().iter().enumerate() {
        if *fixed {
            u[i] = 0.0;
        }
    }
    let mut out = Vec::with_capacity(grid.n_steps + 1);
    out.push(u.clone());
    for n in 0..grid.n_steps {
        let g = source(n + 1)?;
        g.check(fine)?;
        let mg = mass.spmv(&g);
        for _ in 0..substeps {
            let mu = mass.spmv(&u);
            let rhs: Vec<f64> = mu.iter().zip(&mg).map(|(a, b)| a + dt * b).collect();
            let matrix = if kind == BenchmarkKind::FisherKpp {
                // u - u^2 lagged as (1 - u_n) u_{n+1}
                let wu = assemble_weighted_mass(fine, &u, 1)?;
                let lin = mass.linear_combination(1.0, &wu, -1.0)?;
                base.linear_combination(1.0, &lin, dt)?
            } else {
                base.clone()
            };
            let sys = apply_dirichlet(&matrix, &rhs, fine.boundary_flags(), &zeros)?;
            let x = cg_solve_checked(&sys.matrix, &sys.rhs, &sys.restrict(&u), &cg)?;
            u = NodalField(sys.expand(&x));
        }
        out.push(u.clone());
    }
    Ok(out)
}

/// Interpolates fine snapshots onto the reconstruction mesh.
pub fn restrict(fine: &Mesh, snapshots: &[NodalField], coarse: &Mesh) -> Result<Vec<NodalField>> {
    let tr = Transfer::new(fine, coarse)?;
    Ok(snapshots.iter().map(|s| tr.apply(s)).collect())
}

/// `z = u + (delta ||u|| / ||eps||) eps` with i.i.d. standard normal nodal
/// `eps`, drawn afresh per snapshot or once for the whole series.
pub fn add_noise(mesh: &Mesh, clean: &[NodalField], delta: f64, seed: u64, per_snapshot: bool) -> Result<Vec<NodalField>> {
    if !(delta >= 0.0 && delta.is_finite()) {
        return Err(Error::config("noise.delta", "must be a finite number >= 0"));
    }
    if delta == 0.0 {
        return Ok(clean.to_vec());
    }
    let draw = |stream: u64| -> NodalField {
        let mut rng = stream_rng(seed, STREAM_NOISE + stream);
        NodalField((0..mesh.n_vertices()).map(|_| StandardNormal.sample(&mut rng)).collect())
    };
    let shared = (!per_snapshot).then(|| draw(0));
    clean
        .iter()
        .enumerate()
        .map(|(n, u)| {
            u.check(mesh)?;
            let un = u.l2_norm(mesh);
            if un == 0.0 {
                return Err(Error::invalid(format!("snapshot {n} is zero; relative noise undefined")));
            }
            let eps = match &shared {
                Some(e) => e.clone(),
                None => draw(n as u64),
            };
            let scale = delta * un / eps.l2_norm(mesh);
            Ok(u.add_scaled(scale, &eps))
        })
        .collect()
}

/// Builds the truth on `mesh` over `grid`: closed-form for the potential
/// problems, forward simulation on a finer mesh otherwise.
pub fn make_truth(
    kind: BenchmarkKind,
    mesh: &Mesh,
    fine: Option<&Mesh>,
    grid: &TimeGrid,
    substeps: usize,
    seed: u64,
    q_override: Option<&GridField>,
) -> Result<TruthBundle> {
    let param = |m: &Mesh| match q_override {
        Some(g) => g.to_cells(m),
        None => CellField::from_fn(m, truth_parameter(kind)),
    };
    let q = param(mesh);
    if kind.is_potential() {
        let state: fn(Point, f64) -> f64 = if kind == BenchmarkKind::AllenCahn { allen_cahn_state } else { potential_state };
        let u: Vec<NodalField> = (0..=grid.n_steps)
            .map(|n| NodalField::from_fn(mesh, |p| state(p, grid.time(n))))
            .collect();
        let (lo, hi) = u.iter().flat_map(|f| f.iter()).fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
        if !(lo > 0.0) {
            let hint = if kind == BenchmarkKind::AllenCahn {
                " (it vanishes at (0, 1) at t = 0; pick mesh.h so that x = 0 is not a grid line)"
            } else {
                ""
            };
            return Err(Error::invalid(format!("{kind} truth must stay positive; its minimum is {lo}{hint}")));
        }
        info!("{kind} truth range on the reconstruction mesh: [{lo:.4}, {hi:.4}]");
        return Ok(TruthBundle { q, u, fine_mesh: None, u_fine: None });
    }
    let fine = fine.ok_or_else(|| Error::invalid(format!("{kind} needs a truth mesh")))?;
    let u0 = NodalField::from_fn(fine, initial_state(kind, seed));
    let source = |n: usize| physical_source(kind, fine, grid, n, seed);
    let u_fine = forward_solve(kind, fine, &param(fine), &u0, grid, substeps, &source)?;
    let u = restrict(fine, &u_fine, mesh)?;
    Ok(TruthBundle {
        q,
        u,
        fine_mesh: Some(fine.clone()),
        u_fine: Some(u_fine),
    })
}

/// Attained `(min, max)` over all truth snapshots.
pub fn state_range(truth: &TruthBundle) -> (f64, f64) {
    truth
        .u
        .iter()
        .flat_map(|f| f.iter())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)))
}
