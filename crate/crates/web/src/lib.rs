//! Browser bindings: an MRAS run that can be stepped from JavaScript.

use wasm_bindgen::prelude::*;

use mras::benchmarks::BenchmarkKind;
use mras::config::RunConfig;
use mras::diag::ErrorSeries;
use mras::driver::{domain_mesh, Experiment};
use mras::mesh::Mesh;
use mras::mras::{mras_step, MrasState, StepInputs};
use mras::synth::ObservationSeries;

/// Vertex count, triangle count, largest diameter and boundary edge count.
#[wasm_bindgen]
pub fn mesh_stats(benchmark: &str, h: f64) -> Result<Vec<f64>, JsError> {
    let kind: BenchmarkKind = benchmark.parse()?;
    let mesh = domain_mesh(kind, h)?;
    Ok(vec![
        mesh.n_vertices() as f64,
        mesh.n_triangles() as f64,
        mesh.h_max(),
        mesh.boundary_edges().len() as f64,
    ])
}

#[wasm_bindgen]
pub struct Session {
    exp: Experiment,
    series: ObservationSeries,
    state: MrasState,
    errors: ErrorSeries,
}

#[wasm_bindgen]
impl Session {
    /// Desk settings for `benchmark` with the given mesh size, noise level and seed.
    #[wasm_bindgen(constructor)]
    pub fn new(benchmark: &str, h: f64, delta: f64, seed: u32) -> Result<Session, JsError> {
        let kind: BenchmarkKind = benchmark.parse()?;
        let mut cfg = RunConfig::desk(kind);
        if !kind.is_potential() {
            cfg.truth_h = cfg.truth_h.min(0.75 * h);
        }
        cfg.h = h;
        cfg.deltas = vec![delta];
        cfg.seed = seed as u64;
        let exp = Experiment::new(&cfg)?;
        let series = exp.observations(delta)?;
        let state = exp.initial_state(&series)?;
        let mut errors = ErrorSeries::default();
        errors.record(&exp.mesh, 0.0, &exp.truth.q, &exp.truth.u[0], &state);
        Ok(Session {
            exp,
            series,
            state,
            errors,
        })
    }

    /// Advances up to `n` windows; returns the number actually taken.
    pub fn step(&mut self, n: usize) -> Result<usize, JsError> {
        let grid = self.exp.grid;
        let data = &self.series.data;
        let mut taken = 0;
        while taken < n && self.state.step < grid.n_steps {
            let k = self.state.step;
            let dz = StepInputs::backward_difference(&data.snapshots[k], &data.snapshots[k + 1], grid.dt);
            let inputs = StepInputs {
                z_n: &data.snapshots[k],
                z_np1: &data.snapshots[k + 1],
                g_np1: &data.sources[k + 1],
                dz_dt: &dz,
                g_cell: data.source_cells.as_ref().map(|c| &c[k + 1]),
            };
            self.state = mras_step(&self.exp.problem, &self.state, &inputs, &grid)?;
            let k = self.state.step;
            self.errors
                .record(&self.exp.mesh, grid.time(k), &self.exp.truth.q, &self.exp.truth.u[k], &self.state);
            taken += 1;
        }
        Ok(taken)
    }

    pub fn step_index(&self) -> usize {
        self.state.step
    }

    pub fn n_steps(&self) -> usize {
        self.exp.grid.n_steps
    }

    pub fn time(&self) -> f64 {
        self.exp.grid.time(self.state.step)
    }

    /// Interleaved `x, y` coordinates.
    pub fn vertices(&self) -> Vec<f64> {
        flat_vertices(&self.exp.mesh)
    }

    pub fn triangles(&self) -> Vec<u32> {
        self.exp.mesh.triangles().iter().flatten().map(|&i| i as u32).collect()
    }

    /// Current parameter, one value per triangle.
    pub fn parameter(&self) -> Vec<f64> {
        self.state.q.0.clone()
    }

    pub fn true_parameter(&self) -> Vec<f64> {
        self.exp.truth.q.0.clone()
    }

    /// Current state, one value per vertex.
    pub fn state(&self) -> Vec<f64> {
        self.state.u.0.clone()
    }

    pub fn data(&self) -> Vec<f64> {
        self.series.data.snapshots[self.state.step].0.clone()
    }

    /// Parameter error history.
    pub fn eq_history(&self) -> Vec<f64> {
        self.errors.eq.clone()
    }

    pub fn eu_history(&self) -> Vec<f64> {
        self.errors.eu.clone()
    }

    /// Relative L2 distance between the data and the noise-free state at the current step.
    pub fn noise_level(&self) -> f64 {
        let mesh = &self.exp.mesh;
        let k = self.state.step;
        let clean = &self.exp.truth.u[k];
        let n = clean.l2_norm(mesh);
        if n > 0.0 {
            self.series.data.snapshots[k].sub(clean).l2_norm(mesh) / n
        } else {
            0.0
        }
    }
}

fn flat_vertices(mesh: &Mesh) -> Vec<f64> {
    mesh.vertices().iter().flatten().copied().collect()
}
