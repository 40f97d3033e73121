//! The semi-implicit MRAS stepper: parameter update first (never reads
//! `u_{n+1}`), then the state solve with the new parameter.

use log::{debug, info};

use crate::diag::ErrorSeries;
use crate::error::{check_len, Error, Result};
use crate::fem::{CellField, NodalField};
use crate::mesh::Mesh;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimeGrid {
    pub dt: f64,
    pub n_steps: usize,
}

impl TimeGrid {
    pub fn new(dt: f64, n_steps: usize) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::config("time.dt", "must be a positive finite number"));
        }
        Ok(TimeGrid { dt, n_steps })
    }

    /// Grid with `round(t_end / dt)` steps; `t_end` must be a multiple of `dt`.
    pub fn from_end_time(t_end: f64, dt: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::config("time.dt", "must be a positive finite number"));
        }
        if !(t_end > 0.0 && t_end.is_finite()) {
            return Err(Error::config("time.t_end", "must be a positive finite number"));
        }
        let n = (t_end / dt).round();
        if (n * dt - t_end).abs() > 1e-9 * t_end || n < 1.0 {
            return Err(Error::config("time.t_end", format!("{t_end} is not a multiple of dt = {dt}")));
        }
        Ok(TimeGrid { dt, n_steps: n as usize })
    }

    pub fn t_end(&self) -> f64 {
        self.dt * self.n_steps as f64
    }

    pub fn time(&self, n: usize) -> f64 {
        self.dt * n as f64
    }

    /// Step index closest to time `t`, clamped to the grid.
    pub fn nearest_step(&self, t: f64) -> usize {
        ((t / self.dt).round().max(0.0) as usize).min(self.n_steps)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MrasState {
    pub q: CellField,
    pub u: NodalField,
    pub step: usize,
}

impl MrasState {
    pub fn new(mesh: &Mesh, q: CellField, u: NodalField) -> Result<Self> {
        q.check(mesh)?;
        u.check(mesh)?;
        if !q.is_finite() || !u.is_finite() {
            return Err(Error::invalid("initial state is not finite"));
        }
        Ok(MrasState { q, u, step: 0 })
    }
}

/// Data for one window `[t_n, t_{n+1}]`.
#[derive(Clone, Copy, Debug)]
pub struct StepInputs<'a> {
    pub z_n: &'a NodalField,
    pub z_np1: &'a NodalField,
    pub g_np1: &'a NodalField,
    pub dz_dt: &'a NodalField,
    /// Element integrals of the source for the parameter equation; when absent
    /// they are taken from the nodal source.
    pub g_cell: Option<&'a CellField>,
}

impl StepInputs<'_> {
    pub fn backward_difference(z_n: &NodalField, z_np1: &NodalField, dt: f64) -> NodalField {
        NodalField(z_np1.iter().zip(z_n.iter()).map(|(b, a)| (b - a) / dt).collect())
    }

    fn check(&self, mesh: &Mesh) -> Result<()> {
        for f in [self.z_n, self.z_np1, self.g_np1, self.dz_dt] {
            f.check(mesh)?;
        }
        if let Some(g) = self.g_cell {
            g.check(mesh)?;
        }
        Ok(())
    }
}

/// A discrete MRAS update law.
pub trait UpdateLaw {
    fn mesh(&self) -> &Mesh;

    fn sigma(&self) -> f64;

    /// `q_{n+1}` from `(q_n, u_n)` and the window data.
    fn parameter_update(&self, state: &MrasState, inputs: &StepInputs<'_>, dt: f64) -> Result<CellField>;

    /// `u_{n+1}` from `(q_n, u_n)`, the new parameter and the window data.
    fn state_update(&self, state: &MrasState, q_next: &CellField, inputs: &StepInputs<'_>, dt: f64) -> Result<NodalField>;
}

/// One window of the update law. Errors carry the index of the step being taken.
pub fn mras_step<P: UpdateLaw + ?Sized>(problem: &P, state: &MrasState, inputs: &StepInputs<'_>, grid: &TimeGrid) -> Result<MrasState> {
    let step = state.step;
    let inner = || -> Result<MrasState> {
        let mesh = problem.mesh();
        state.q.check(mesh)?;
        state.u.check(mesh)?;
        inputs.check(mesh)?;
        let q = problem.parameter_update(state, inputs, grid.dt)?;
        if !q.is_finite() {
            return Err(Error::invalid("parameter update produced non-finite values"));
        }
        let u = problem.state_update(state, &q, inputs, grid.dt)?;
        if !u.is_finite() {
            return Err(Error::invalid("state update produced non-finite values"));
        }
        Ok(MrasState { q, u, step: step + 1 })
    };
    inner().map_err(|e| e.at_step(step))
}

/// Time-indexed data on the reconstruction mesh. `sources[n]` is the source at
/// `t_n`; `sources[0]` is never read by the stepper.
#[derive(Clone, Debug, PartialEq)]
pub struct Observations {
    pub snapshots: Vec<NodalField>,
    pub sources: Vec<NodalField>,
    pub source_cells: Option<Vec<CellField>>,
}

impl Observations {
    pub fn len(&self) -> usize {
        self.snapshots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snapshots.is_empty()
    }
}

/// Truth used only for error tracking.
#[derive(Clone, Debug)]
pub struct Reference<'a> {
    pub q: &'a CellField,
    pub u: &'a [NodalField],
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunSettings {
    pub snapshot_times: Vec<f64>,
    /// Relative state discrepancy `||u - z|| / ||z||` reported as reached.
    pub discrepancy_threshold: f64,
}

impl Default for RunSettings {
    fn default() -> Self {
        RunSettings {
            snapshot_times: Vec::new(),
            discrepancy_threshold: 1e-3,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub step: usize,
    pub time: f64,
    pub q: CellField,
    pub u: NodalField,
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub state: MrasState,
    pub errors: ErrorSeries,
    pub snapshots: Vec<Snapshot>,
    /// First step with relative discrepancy below the threshold.
    pub threshold_step: Option<usize>,
}

/// Advances `n_steps` windows from `initial`, recording the L2 errors against
/// the reference after every step and keeping snapshots at the scheduled
/// times (rounded to the nearest step).
pub fn run<P: UpdateLaw + ?Sized>(
    problem: &P,
    grid: &TimeGrid,
    obs: &Observations,
    reference: &Reference<'_>,
    initial: MrasState,
    settings: &RunSettings,
) -> Result<RunOutput> {
    let mesh = problem.mesh();
    let n = grid.n_steps;
    check_len("observation snapshots", n + 1, obs.snapshots.len())?;
    check_len("observation sources", n + 1, obs.sources.len())?;
    if let Some(cells) = &obs.source_cells {
        check_len("observation cell sources", n + 1, cells.len())?;
    }
    check_len("reference states", n + 1, reference.u.len())?;
    reference.q.check(mesh)?;

    let mut snapshot_steps: Vec<usize> = settings.snapshot_times.iter().map(|&t| grid.nearest_step(t)).collect();
    snapshot_steps.sort_unstable();
    snapshot_steps.dedup();

    let mut errors = ErrorSeries::default();
    let mut snapshots = Vec::new();
    let mut threshold_step = None;
    let mut state = initial;

    let observe = |state: &MrasState, errors: &mut ErrorSeries, snapshots: &mut Vec<Snapshot>, threshold_step: &mut Option<usize>| {
        let k = state.step;
        errors.record(mesh, grid.time(k), reference.q, &reference.u[k], state);
        let z = &obs.snapshots[k];
        let zn = z.l2_norm(mesh);
        let disc = state.u.sub(z).l2_norm(mesh) / if zn > 0.0 { zn } else { 1.0 };
        if threshold_step.is_none() && disc < settings.discrepancy_threshold && k > 0 {
            *threshold_step = Some(k);
        }
        if snapshot_steps.binary_search(&k).is_ok() {
            snapshots.push(Snapshot {
                step: k,
                time: grid.time(k),
                q: state.q.clone(),
                u: state.u.clone(),
            });
        }
    };

    observe(&state, &mut errors, &mut snapshots, &mut threshold_step);
    let log_every = (n / 10).max(1);
    for k in 0..n {
        let dz = StepInputs::backward_difference(&obs.snapshots[k], &obs.snapshots[k + 1], grid.dt);
        let inputs = StepInputs {
            z_n: &obs.snapshots[k],
            z_np1: &obs.snapshots[k + 1],
            g_np1: &obs.sources[k + 1],
            dz_dt: &dz,
            g_cell: obs.source_cells.as_ref().map(|c| &c[k + 1]),
        };
        state = mras_step(problem, &state, &inputs, grid)?;
        observe(&state, &mut errors, &mut snapshots, &mut threshold_step);
        if (k + 1) % log_every == 0 {
            let last = errors.len() - 1;
            info!("step {}/{n}: eq = {:.4e}, eu = {:.4e}", k + 1, errors.eq[last], errors.eu[last]);
        } else {
            debug!("step {}", k + 1);
        }
    }
    Ok(RunOutput {
        state,
        errors,
        snapshots,
        threshold_step,
    })
}
