//! End-to-end runs: mesh, truth, data, MRAS and output files.

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use log::info;

use crate::benchmarks::{BenchmarkKind, Problem, ProblemSpec, StabilizerConfig};
use crate::config::{InitialState, RunConfig, SourceMode};
use crate::diag::{write_vtk, RunReport};
use crate::error::Result;
use crate::fem::{CellField, NodalField};
use crate::mesh::{disk_mesh, rect_mesh, Mesh};
use crate::mras::{run, MrasState, Observations, Reference, RunOutput, RunSettings, TimeGrid};
use crate::sparse::CgOptions;
use crate::synth::{add_noise, make_truth, physical_source, state_range, truth_parameter, GridField, ObservationSeries, TruthBundle};

/// Per-step relative slack tolerated by the energy monotonicity count.
pub const MONOTONICITY_SLACK: f64 = 1e-6;

/// Reconstruction (or truth) mesh of a benchmark's domain.
pub fn domain_mesh(kind: BenchmarkKind, h: f64) -> Result<Mesh> {
    match kind {
        BenchmarkKind::Darcy => rect_mesh(0.0, 1.0, 0.0, 1.0, h),
        BenchmarkKind::FisherKpp => rect_mesh(-1.25, 1.25, -1.25, 1.25, h),
        BenchmarkKind::NonlinearPotential => disk_mesh(std::f64::consts::PI, h),
        BenchmarkKind::AllenCahn => rect_mesh(-2.0, 2.0, -1.0, 1.0, h),
    }
}

/// Everything that does not depend on the noise level.
#[derive(Clone, Debug)]
pub struct Experiment {
    pub config: RunConfig,
    pub mesh: Arc<Mesh>,
    pub grid: TimeGrid,
    pub truth: TruthBundle,
    pub problem: Problem,
    pub sources: Vec<NodalField>,
    pub source_cells: Option<Vec<CellField>>,
}

impl Experiment {
    pub fn new(config: &RunConfig) -> Result<Self> {
        config.validate()?;
        let kind = config.benchmark;
        let mesh = Arc::new(domain_mesh(kind, config.h)?);
        let grid = TimeGrid::from_end_time(config.t_end, config.dt)?;
        info!(
            "{kind}: {} vertices, {} triangles, {} steps",
            mesh.n_vertices(),
            mesh.n_triangles(),
            grid.n_steps
        );
        let fine = if kind.is_potential() {
            None
        } else {
            Some(domain_mesh(kind, config.truth_h)?)
        };
        let q_file = config.truth_parameter_file.as_ref().map(GridField::load).transpose()?;
        let truth = make_truth(kind, &mesh, fine.as_ref(), &grid, config.truth_substeps, config.seed, q_file.as_ref())?;

        let norm_true = truth.q.l2_norm(&mesh);
        let mut stab = StabilizerConfig::new(config.z_lower, config.z_upper, config.param_norm_bound.unwrap_or(norm_true));
        stab.embedding_constant = config.embedding_constant;
        stab.scale = config.stabilizer_scale;
        stab.m = config.stabilizer_m.unwrap_or(1.0 / config.stabilizer_scale);
        if kind.is_potential() {
            let (lo, hi) = state_range(&truth);
            info!(
                "state range [{lo:.4}, {hi:.4}] against stabilizer bounds [{}, {}]",
                stab.z_lower, stab.z_upper
            );
        }
        let mut spec = ProblemSpec::new(kind, &mesh, stab);
        spec.indexing = config.indexing;
        let mut problem = Problem::new(spec, mesh.clone())?;
        problem.ops.cg = CgOptions {
            tol: config.cg_tol,
            ..CgOptions::default()
        };

        let (sources, source_cells) = match config.source_mode {
            SourceMode::Physical => {
                let g = (0..=grid.n_steps)
                    .map(|n| physical_source(kind, &mesh, &grid, n, config.seed))
                    .collect::<Result<Vec<_>>>()?;
                (g, None)
            }
            SourceMode::Consistent => {
                let mut g = vec![NodalField::zeros(&mesh)];
                let mut cells = vec![CellField::zeros(&mesh)];
                for n in 0..grid.n_steps {
                    let (gn, cn) = problem.consistent_source(&truth.q, &truth.u[n], &truth.u[n + 1], grid.dt)?;
                    g.push(gn);
                    cells.push(cn.unwrap_or_else(|| CellField::zeros(&mesh)));
                }
                let cells = kind.is_potential().then_some(cells);
                (g, cells)
            }
        };
        Ok(Experiment {
            config: config.clone(),
            mesh,
            grid,
            truth,
            problem,
            sources,
            source_cells,
        })
    }

    pub fn observations(&self, delta: f64) -> Result<ObservationSeries> {
        let snapshots = add_noise(&self.mesh, &self.truth.u, delta, self.config.seed, self.config.per_snapshot_noise)?;
        Ok(ObservationSeries {
            grid: self.grid,
            delta,
            seed: self.config.seed,
            data: Observations {
                snapshots,
                sources: self.sources.clone(),
                source_cells: self.source_cells.clone(),
            },
        })
    }

    pub fn initial_state(&self, series: &ObservationSeries) -> Result<MrasState> {
        let truth_fn = truth_parameter(self.config.benchmark);
        let q = match self.config.initial_parameter {
            crate::config::InitialParameter::Truth => self.truth.q.clone(),
            ip => CellField::from_fn(&self.mesh, |p| ip.eval(p, truth_fn)),
        };
        let u = match self.config.initial_state {
            InitialState::Data => series.data.snapshots[0].clone(),
            InitialState::Truth => self.truth.u[0].clone(),
        };
        MrasState::new(&self.mesh, q, u)
    }

    pub fn settings(&self) -> RunSettings {
        RunSettings {
            snapshot_times: self.config.snapshot_times.clone(),
            discrepancy_threshold: self.config.discrepancy_threshold,
        }
    }

    /// Data and MRAS run for one noise level.
    pub fn run(&self, delta: f64) -> Result<(ObservationSeries, RunOutput)> {
        let series = self.observations(delta)?;
        let initial = self.initial_state(&series)?;
        let reference = Reference {
            q: &self.truth.q,
            u: &self.truth.u,
        };
        let out = run(&self.problem, &self.grid, &series.data, &reference, initial, &self.settings())?;
        Ok((series, out))
    }
}

#[derive(Clone, Debug)]
pub struct DeltaOutcome {
    pub delta: f64,
    pub dir: PathBuf,
    pub report: RunReport,
}

pub fn delta_dir(out: &Path, delta: f64) -> PathBuf {
    out.join(format!("delta_{delta}"))
}

/// Runs every configured noise level, one thread per level, and writes
/// `errors.csv`, `report.txt` and VTK snapshots into one subdirectory each.
pub fn run_benchmark(config: &RunConfig, out: &Path) -> Result<Vec<DeltaOutcome>> {
    let exp = Experiment::new(config)?;
    std::thread::scope(|scope| {
        let workers: Vec<_> = config
            .deltas
            .iter()
            .map(|&delta| {
                let exp = &exp;
                scope.spawn(move || run_level(exp, delta, out))
            })
            .collect();
        workers
            .into_iter()
            .map(|w| w.join().expect("noise level worker panicked"))
            .collect()
    })
}

fn run_level(exp: &Experiment, delta: f64, out: &Path) -> Result<DeltaOutcome> {
    let config = &exp.config;
    let mesh = &*exp.mesh;
    let start = Instant::now();
    let (series, result) = exp.run(delta)?;
    let dir = delta_dir(out, delta);
    result.errors.write_csv(dir.join("errors.csv"))?;
    let mut report = RunReport::from_series(&result.errors, MONOTONICITY_SLACK);
    report.config = config.entries();
    report.config.push(("noise.level".into(), delta.to_string()));
    report.threshold_step = result.threshold_step;
    report.wall_clock_secs = start.elapsed().as_secs_f64();
    report.write(dir.join("report.txt"))?;
    if config.write_vtk {
        for snap in &result.snapshots {
            let z = &series.data.snapshots[snap.step];
            let ut = &exp.truth.u[snap.step];
            write_vtk(
                dir.join(format!("snapshot_{:06}.vtk", snap.step)),
                mesh,
                &format!("{} t={}", config.benchmark, snap.time),
                &[("u", &snap.u), ("z", z), ("u_true", ut)],
                &[("q", &snap.q), ("q_true", &exp.truth.q)],
            )?;
        }
    }
    info!(
        "delta = {delta}: eq {:.4e} -> {:.4e}, {} monotonicity violations",
        report.initial_eq, report.final_eq, report.monotonicity_violations
    );
    Ok(DeltaOutcome { delta, dir, report })
}

/// Writes the synthetic data only: VTK files of data and source at the
/// snapshot times, and the true parameter.
pub fn synthesize(config: &RunConfig, out: &Path) -> Result<Vec<PathBuf>> {
    let exp = Experiment::new(config)?;
    let mesh = &*exp.mesh;
    let mut written = Vec::new();
    let truth_path = out.join("truth.vtk");
    write_vtk(&truth_path, mesh, "true parameter", &[], &[("q_true", &exp.truth.q)])?;
    written.push(truth_path);
    if let (Some(fine), Some(u_fine)) = (&exp.truth.fine_mesh, &exp.truth.u_fine) {
        let path = out.join("truth_fine_final.vtk");
        write_vtk(&path, fine, "fine truth at t_end", &[("u_true", u_fine.last().expect("nonempty"))], &[])?;
        written.push(path);
    }
    let settings = exp.settings();
    let mut steps: Vec<usize> = settings.snapshot_times.iter().map(|&t| exp.grid.nearest_step(t)).collect();
    steps.sort_unstable();
    steps.dedup();
    for &delta in &config.deltas {
        let series = exp.observations(delta)?;
        let dir = delta_dir(out, delta);
        for &k in &steps {
            let path = dir.join(format!("data_{k:06}.vtk"));
            write_vtk(
                &path,
                mesh,
                &format!("{} data t={}", config.benchmark, exp.grid.time(k)),
                &[("z", &series.data.snapshots[k]), ("g", &series.data.sources[k]), ("u_true", &exp.truth.u[k])],
                &[],
            )?;
            written.push(path);
        }
    }
    Ok(written)
}
