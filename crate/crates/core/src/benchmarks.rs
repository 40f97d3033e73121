//! The four benchmark problems and their discrete MRAS update laws.
//!
//! Every problem supplies a parameter update (P0, solved element by element)
//! and a state system (P1, one SPD solve). Darcy and Fisher-KPP are linear in
//! the diffusion coefficient `a` (switch `sigma = 0`); the nonlinear potential
//! and modified Allen-Cahn problems are nonlinear in the potential `c`
//! (`sigma = 1`) and are written in increments so the data boundary values
//! cancel.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::fem::{
    self, apply_dirichlet, assemble_mass, assemble_stiffness, boundary_flux_form, cell_integrals,
    elementwise_gradient_dot, grad_coupling_apply, load_vector, quadrature_load, CellField, NodalField,
};
use crate::mesh::Mesh;
use crate::mras::{MrasState, StepInputs, UpdateLaw};
use crate::sparse::{cg_solve_checked, CgOptions, CsrMatrix};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BenchmarkKind {
    Darcy,
    FisherKpp,
    NonlinearPotential,
    AllenCahn,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoundaryMode {
    /// `u = 0` on the boundary.
    HomogeneousDirichlet,
    /// `u = z` on the boundary.
    DataDirichlet,
}

impl BenchmarkKind {
    pub const ALL: [BenchmarkKind; 4] = [
        BenchmarkKind::Darcy,
        BenchmarkKind::FisherKpp,
        BenchmarkKind::NonlinearPotential,
        BenchmarkKind::AllenCahn,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BenchmarkKind::Darcy => "darcy",
            BenchmarkKind::FisherKpp => "fisher_kpp",
            BenchmarkKind::NonlinearPotential => "nonlinear_potential",
            BenchmarkKind::AllenCahn => "allen_cahn",
        }
    }

    pub fn equation(self) -> &'static str {
        match self {
            BenchmarkKind::Darcy => "u_t - div(a grad u) = g, u = 0 on the boundary",
            BenchmarkKind::FisherKpp => "u_t - div(a grad u) + u - u^2 = g, u = 0 on the boundary",
            BenchmarkKind::NonlinearPotential => "u_t - lap u + c u + c|c|^(2/3) u = g, u = h > 0 on the boundary",
            BenchmarkKind::AllenCahn => "u_t - lap u + c u^3 + c|c|^(2/3) u = g, u = h > 0 on the boundary",
        }
    }

    /// 0 for models linear in the parameter, 1 otherwise.
    pub fn sigma(self) -> f64 {
        match self {
            BenchmarkKind::Darcy | BenchmarkKind::FisherKpp => 0.0,
            BenchmarkKind::NonlinearPotential | BenchmarkKind::AllenCahn => 1.0,
        }
    }

    pub fn boundary_mode(self) -> BoundaryMode {
        match self {
            BenchmarkKind::Darcy | BenchmarkKind::FisherKpp => BoundaryMode::HomogeneousDirichlet,
            _ => BoundaryMode::DataDirichlet,
        }
    }

    /// Power of `z` multiplying `c` in the reaction term (potential problems only).
    pub fn reaction_power(self) -> u32 {
        match self {
            BenchmarkKind::AllenCahn => 3,
            _ => 1,
        }
    }

    pub fn is_potential(self) -> bool {
        self.sigma() == 1.0
    }
}

impl fmt::Display for BenchmarkKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BenchmarkKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        BenchmarkKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::config("benchmark", format!("unknown benchmark `{s}`")))
    }
}

/// Bounds and constants behind the stabilizing operator `C(||c||) = C_c (-lap)`.
#[derive(Clone, Debug, PartialEq)]
pub struct StabilizerConfig {
    pub z_lower: f64,
    pub z_upper: f64,
    /// Norm of the embedding `H^1 -> L^6`.
    pub embedding_constant: f64,
    /// A-priori bound standing in for `||c_true||_{L^2}`.
    pub true_param_norm_bound: f64,
    pub m: f64,
    pub scale: f64,
}

impl StabilizerConfig {
    /// Scale `4 (3/5)^2` with `M = 1 / scale`, which collapses the constant to
    /// `C_e^2 (2 zmax^2 / zmin) S^2 + 1`.
    pub const DEFAULT_SCALE: f64 = 4.0 * 0.36;

    pub fn new(z_lower: f64, z_upper: f64, true_param_norm_bound: f64) -> Self {
        StabilizerConfig {
            z_lower,
            z_upper,
            embedding_constant: 1.0,
            true_param_norm_bound,
            m: 1.0 / Self::DEFAULT_SCALE,
            scale: Self::DEFAULT_SCALE,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |f: &str, m: &str| Err(Error::config(format!("stabilizer.{f}"), m));
        if !(self.z_lower > 0.0) {
            return bad("z_lower", "must be > 0");
        }
        if !(self.z_upper >= self.z_lower) {
            return bad("z_upper", "must be >= z_lower");
        }
        if !(self.m > 0.0) {
            return bad("m", "must be > 0");
        }
        if !(self.scale >= 1.0) {
            return bad("scale", "must be >= 1");
        }
        if !(self.embedding_constant > 0.0) {
            return bad("embedding_constant", "must be > 0");
        }
        if !(self.true_param_norm_bound >= 0.0) {
            return bad("param_norm_bound", "must be >= 0");
        }
        Ok(())
    }

    /// Local Lipschitz bound `L(||c||) = 5/3 zmax C_e (||c||^(2/3) + ||c_true||^(2/3) + ||c_ref||^(2/3))`.
    pub fn lipschitz(&self, norm_c: f64, norm_c_true: f64, norm_c_ref: f64) -> f64 {
        5.0 / 3.0
            * self.z_upper
            * self.embedding_constant
            * (norm_c.powf(2.0 / 3.0) + norm_c_true.powf(2.0 / 3.0) + norm_c_ref.powf(2.0 / 3.0))
    }
}

/// Scalar factor `C_{c_n}` of the stabilizer `C_{c_n} (-lap)`:
/// `scale * (L^2 / (2 zmin) + M)` with the configured bound for `||c_true||`.
pub fn stabilizer_constant(norm_c_n: f64, cfg: &StabilizerConfig, norm_c_ref: f64) -> f64 {
    let l = cfg.lipschitz(norm_c_n, cfg.true_param_norm_bound, norm_c_ref);
    cfg.scale * (l * l / (2.0 * cfg.z_lower) + cfg.m)
}

/// Which data snapshot enters the lagged `|c|^(2/3)` and stabilizer terms.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum DataIndexing {
    /// `z_n` in the lagged terms, as in the published weak forms.
    #[default]
    AsPrinted,
    /// `z_{n+1}` everywhere.
    UniformNext,
}

#[derive(Clone, Debug)]
pub struct ProblemSpec {
    pub kind: BenchmarkKind,
    pub sigma: f64,
    /// Linearization point for the adjoint term (potential problems).
    pub c_ref: CellField,
    pub boundary_mode: BoundaryMode,
    pub stabilizer: StabilizerConfig,
    pub indexing: DataIndexing,
}

impl ProblemSpec {
    pub fn new(kind: BenchmarkKind, mesh: &Mesh, stabilizer: StabilizerConfig) -> Self {
        ProblemSpec {
            kind,
            sigma: kind.sigma(),
            c_ref: CellField::zeros(mesh),
            boundary_mode: kind.boundary_mode(),
            stabilizer,
            indexing: DataIndexing::default(),
        }
    }
}

/// Mesh plus the matrices every step reuses.
#[derive(Clone, Debug)]
pub struct Operators {
    pub mesh: Arc<Mesh>,
    pub mass: CsrMatrix,
    pub stiffness: CsrMatrix,
    pub cg: CgOptions,
}

impl Operators {
    pub fn new(mesh: Arc<Mesh>) -> Self {
        let mass = assemble_mass(&mesh);
        let stiffness = assemble_stiffness(&mesh, None).expect("unit coefficient");
        Operators {
            mesh,
            mass,
            stiffness,
            cg: CgOptions::default(),
        }
    }

    fn solve(&self, matrix: &CsrMatrix, rhs: &[f64], boundary: &[f64], guess: &[f64]) -> Result<Vec<f64>> {
        let sys = apply_dirichlet(matrix, rhs, self.mesh.boundary_flags(), boundary)?;
        let x0 = sys.restrict(guess);
        let x = cg_solve_checked(&sys.matrix, &sys.rhs, &x0, &self.cg)?;
        Ok(sys.expand(&x))
    }
}

fn check_nodal(mesh: &Mesh, fields: &[&NodalField]) -> Result<()> {
    fields.iter().try_for_each(|f| f.check(mesh))
}

/// Darcy / Fisher-KPP parameter step, element by element:
/// `a_{n+1} = a_n + dt * grad z_n . grad (u_n - z_n)`.
pub fn darcy_q_update(mesh: &Mesh, a_n: &CellField, u_n: &NodalField, z_n: &NodalField, dt: f64) -> Result<CellField> {
    a_n.check(mesh)?;
    let drive = elementwise_gradient_dot(mesh, z_n, &u_n.sub(z_n))?;
    Ok(a_n.add_scaled(dt, &drive))
}

pub fn fisher_q_update(mesh: &Mesh, a_n: &CellField, u_n: &NodalField, z_n: &NodalField, dt: f64) -> Result<CellField> {
    darcy_q_update(mesh, a_n, u_n, z_n, dt)
}

/// Darcy state step with homogeneous Dirichlet data:
/// `(M + dt K) u_{n+1} = M u_n + dt M g + dt K z - dt G(z) a_{n+1}`.
pub fn darcy_u_system(
    ops: &Operators,
    a_np1: &CellField,
    u_n: &NodalField,
    z_np1: &NodalField,
    g_np1: &NodalField,
    dt: f64,
) -> Result<NodalField> {
    diffusion_state_solve(ops, a_np1, u_n, z_np1, g_np1, dt, false)
}

/// Fisher-KPP state step: the Darcy system with source `g - z + z^2`.
pub fn fisher_u_system(
    ops: &Operators,
    a_np1: &CellField,
    u_n: &NodalField,
    z_np1: &NodalField,
    g_np1: &NodalField,
    dt: f64,
) -> Result<NodalField> {
    diffusion_state_solve(ops, a_np1, u_n, z_np1, g_np1, dt, true)
}

fn diffusion_state_solve(
    ops: &Operators,
    a_np1: &CellField,
    u_n: &NodalField,
    z_np1: &NodalField,
    g_np1: &NodalField,
    dt: f64,
    reaction: bool,
) -> Result<NodalField> {
    let mesh = &*ops.mesh;
    check_nodal(mesh, &[u_n, z_np1, g_np1])?;
    let mu = ops.mass.spmv(u_n);
    let mg = load_vector(mesh, g_np1)?;
    let kz = ops.stiffness.spmv(z_np1);
    let gz = grad_coupling_apply(mesh, z_np1, a_np1)?;
    let mut rhs: Vec<f64> = (0..mesh.n_vertices())
        .map(|i| mu[i] + dt * (mg[i] + kz[i] - gz[i]))
        .collect();
    if reaction {
        let mz = ops.mass.spmv(z_np1);
        let z2 = quadrature_load(mesh, |t, lam| z_np1.eval(mesh, t, lam).powi(2));
        for i in 0..rhs.len() {
            rhs[i] += dt * (z2[i] - mz[i]);
        }
    }
    let matrix = ops.mass.linear_combination(1.0, &ops.stiffness, dt)?;
    let zero = vec![0.0; mesh.n_vertices()];
    Ok(NodalField(ops.solve(&matrix, &rhs, &zero, u_n)?))
}

/// Inputs of a potential-type parameter or state step.
#[derive(Clone, Copy)]
pub struct PotentialStep<'a> {
    pub c_n: &'a CellField,
    pub u_n: &'a NodalField,
    pub z_n: &'a NodalField,
    pub z_np1: &'a NodalField,
    pub dz_dt: &'a NodalField,
    pub g_np1: &'a NodalField,
    /// Overrides `int_E g_{n+1}` in the parameter equation.
    pub g_cell: Option<&'a CellField>,
    pub dt: f64,
}

/// Parameter step of the nonlinear potential (`power = 1`) and modified
/// Allen-Cahn (`power = 3`) problems. With P0 test functions the system is
/// diagonal; per element `e`:
///
/// ```text
/// dc_e [|E| + s dt (int z1^p + |c|^(2/3) int zl)]
///   = dt (1 + 5/3 |c_ref|^(2/3)) int z0 (u0 - z0)
///   + s dt flux_e(z1)
///   - s dt int (dz + c z1^p + |c|^(2/3) c zl - g)
/// ```
///
/// with `z0 = z_n`, `z1 = z_{n+1}` and `zl` the lagged snapshot (`z_n` as
/// printed, or `z_{n+1}`). The volume term `int grad z . grad s` vanishes for
/// element-constant `s`.
pub fn potential_q_update(mesh: &Mesh, step: &PotentialStep<'_>, spec: &ProblemSpec) -> Result<CellField> {
    potential_like_q_update(mesh, step, spec, 1)
}

pub fn allen_cahn_q_update(mesh: &Mesh, step: &PotentialStep<'_>, spec: &ProblemSpec) -> Result<CellField> {
    potential_like_q_update(mesh, step, spec, 3)
}

fn potential_like_q_update(mesh: &Mesh, s: &PotentialStep<'_>, spec: &ProblemSpec, power: u32) -> Result<CellField> {
    s.c_n.check(mesh)?;
    spec.c_ref.check(mesh)?;
    check_nodal(mesh, &[s.u_n, s.z_n, s.z_np1, s.dz_dt, s.g_np1])?;
    let dt = s.dt;
    let sigma = spec.sigma;
    let z_lag = match spec.indexing {
        DataIndexing::AsPrinted => s.z_n,
        DataIndexing::UniformNext => s.z_np1,
    };
    let int_zp = cell_integrals(mesh, |t, lam| s.z_np1.eval(mesh, t, lam).powi(power as i32));
    let int_lag = cell_integrals(mesh, |t, lam| z_lag.eval(mesh, t, lam));
    let int_fb = cell_integrals(mesh, |t, lam| s.z_n.eval(mesh, t, lam) * (s.u_n.eval(mesh, t, lam) - s.z_n.eval(mesh, t, lam)));
    let flux = boundary_flux_form(mesh, s.z_np1)?;
    let dz_mean = s.dz_dt.cell_means(mesh);
    let g_int: Vec<f64> = match s.g_cell {
        Some(g) => {
            g.check(mesh)?;
            g.to_vec()
        }
        None => {
            let m = s.g_np1.cell_means(mesh);
            m.iter().zip(mesh.areas()).map(|(g, a)| g * a).collect()
        }
    };

    let mut out = Vec::with_capacity(mesh.n_triangles());
    for e in 0..mesh.n_triangles() {
        let area = mesh.areas()[e];
        let c = s.c_n[e];
        let ac = c.abs().powf(2.0 / 3.0);
        let act = spec.c_ref[e].abs().powf(2.0 / 3.0);
        let diag = area + sigma * dt * (int_zp[e] + ac * int_lag[e]);
        if !(diag > 0.0) {
            return Err(Error::Positivity { element: e, value: diag });
        }
        let residual = dz_mean[e] * area + c * int_zp[e] + ac * c * int_lag[e] - g_int[e];
        let rhs = dt * (1.0 + 5.0 / 3.0 * act) * int_fb[e] + sigma * dt * flux[e] - sigma * dt * residual;
        out.push(c + rhs / diag);
    }
    Ok(CellField(out))
}

/// State step of the potential problems in increments `du = u_{n+1} - u_n`:
///
/// ```text
/// (M + dt C K) du = -dt int (c1 z1^p + |c|^(2/3) c1 z1 - g) v
///                   - dt K z1 + dt C K (zl - u_n)
/// ```
///
/// where `c1 = c_{n+1}` and `C = C_{c_n}`, with `du = z_{n+1} - u_n` imposed on
/// the boundary so that `u_{n+1} = z_{n+1}` there.
pub fn potential_u_system(
    ops: &Operators,
    step: &PotentialStep<'_>,
    c_np1: &CellField,
    stabilizer: f64,
    spec: &ProblemSpec,
) -> Result<NodalField> {
    potential_like_u_system(ops, step, c_np1, stabilizer, spec, 1)
}

pub fn allen_cahn_u_system(
    ops: &Operators,
    step: &PotentialStep<'_>,
    c_np1: &CellField,
    stabilizer: f64,
    spec: &ProblemSpec,
) -> Result<NodalField> {
    potential_like_u_system(ops, step, c_np1, stabilizer, spec, 3)
}

fn potential_like_u_system(
    ops: &Operators,
    s: &PotentialStep<'_>,
    c_np1: &CellField,
    stabilizer: f64,
    spec: &ProblemSpec,
    power: u32,
) -> Result<NodalField> {
    let mesh = &*ops.mesh;
    s.c_n.check(mesh)?;
    c_np1.check(mesh)?;
    check_nodal(mesh, &[s.u_n, s.z_n, s.z_np1, s.g_np1])?;
    let dt = s.dt;
    let z_ref = match spec.indexing {
        DataIndexing::AsPrinted => s.z_n,
        DataIndexing::UniformNext => s.z_np1,
    };
    let reaction = quadrature_load(mesh, |t, lam| {
        let z = s.z_np1.eval(mesh, t, lam);
        let ac = s.c_n[t].abs().powf(2.0 / 3.0);
        c_np1[t] * z.powi(power as i32) + ac * c_np1[t] * z
    });
    let mg = load_vector(mesh, s.g_np1)?;
    let kz = ops.stiffness.spmv(s.z_np1);
    let kfb = ops.stiffness.spmv(&z_ref.sub(s.u_n));
    let rhs: Vec<f64> = (0..mesh.n_vertices())
        .map(|i| -dt * (reaction[i] - mg[i]) - dt * kz[i] + dt * stabilizer * kfb[i])
        .collect();
    let matrix = ops.mass.linear_combination(1.0, &ops.stiffness, dt * stabilizer)?;
    let boundary = s.z_np1.sub(s.u_n);
    let zero = vec![0.0; mesh.n_vertices()];
    let du = ops.solve(&matrix, &rhs, &boundary, &zero)?;
    Ok(NodalField(s.u_n.iter().zip(&du).map(|(u, d)| u + d).collect()))
}

/// A benchmark bound to its discretization.
#[derive(Clone, Debug)]
pub struct Problem {
    pub spec: ProblemSpec,
    pub ops: Operators,
}

impl Problem {
    pub fn new(spec: ProblemSpec, mesh: Arc<Mesh>) -> Result<Self> {
        spec.c_ref.check(&mesh)?;
        if spec.kind.is_potential() {
            spec.stabilizer.validate()?;
        }
        Ok(Problem {
            spec,
            ops: Operators::new(mesh),
        })
    }

    pub fn kind(&self) -> BenchmarkKind {
        self.spec.kind
    }

    /// `C_{c_n}` for the current parameter; 1 for the diffusion problems,
    /// whose stabilizer is the plain Laplacian.
    pub fn stabilizer_for(&self, c_n: &CellField) -> f64 {
        if self.spec.kind.is_potential() {
            let mesh = &*self.ops.mesh;
            stabilizer_constant(c_n.l2_norm(mesh), &self.spec.stabilizer, self.spec.c_ref.l2_norm(mesh))
        } else {
            1.0
        }
    }

    fn potential_step<'a>(&self, state: &'a MrasState, inputs: &StepInputs<'a>, dt: f64) -> PotentialStep<'a> {
        PotentialStep {
            c_n: &state.q,
            u_n: &state.u,
            z_n: inputs.z_n,
            z_np1: inputs.z_np1,
            dz_dt: inputs.dz_dt,
            g_np1: inputs.g_np1,
            g_cell: inputs.g_cell,
            dt,
        }
    }

    /// Sources that make `(q_true, z)` an exact fixed point of the discrete
    /// update law: the nodal source for the state equation and, for the
    /// potential problems, the element integrals for the parameter equation.
    pub fn consistent_source(
        &self,
        q_true: &CellField,
        z_n: &NodalField,
        z_np1: &NodalField,
        dt: f64,
    ) -> Result<(NodalField, Option<CellField>)> {
        let ops = &self.ops;
        let mesh = &*ops.mesh;
        q_true.check(mesh)?;
        check_nodal(mesh, &[z_n, z_np1])?;
        let n = mesh.n_vertices();
        let dz = z_np1.sub(z_n);
        let mdz = ops.mass.spmv(&dz);
        let kz = ops.stiffness.spmv(z_np1);
        let mut target: Vec<f64>;
        let mut cell = None;
        match self.spec.kind {
            BenchmarkKind::Darcy | BenchmarkKind::FisherKpp => {
                let ga = grad_coupling_apply(mesh, z_np1, q_true)?;
                target = (0..n).map(|i| mdz[i] / dt + ga[i]).collect();
                if self.spec.kind == BenchmarkKind::FisherKpp {
                    let mz = ops.mass.spmv(z_np1);
                    let z2 = quadrature_load(mesh, |t, lam| z_np1.eval(mesh, t, lam).powi(2));
                    for i in 0..n {
                        target[i] += mz[i] - z2[i];
                    }
                }
            }
            BenchmarkKind::NonlinearPotential | BenchmarkKind::AllenCahn => {
                let p = self.spec.kind.reaction_power() as i32;
                let stab = self.stabilizer_for(q_true);
                let z_lag = match self.spec.indexing {
                    DataIndexing::AsPrinted => z_n,
                    DataIndexing::UniformNext => z_np1,
                };
                // u_n = z_n, so the stabilizer feedback on (z_lag - u_n) is
                // nonzero only with uniform indexing
                let kfb = ops.stiffness.spmv(&z_lag.sub(z_n));
                let kdz = ops.stiffness.spmv(&dz);
                let reaction = quadrature_load(mesh, |t, lam| {
                    let z = z_np1.eval(mesh, t, lam);
                    let c = q_true[t];
                    c * z.powi(p) + c.abs().powf(2.0 / 3.0) * c * z
                });
                target = (0..n)
                    .map(|i| mdz[i] / dt + stab * (kdz[i] - kfb[i]) + reaction[i] + kz[i])
                    .collect();

                let dz_dt = NodalField(dz.iter().map(|d| d / dt).collect());
                let dz_mean = dz_dt.cell_means(mesh);
                let int_zp = cell_integrals(mesh, |t, lam| z_np1.eval(mesh, t, lam).powi(p));
                let int_lag = cell_integrals(mesh, |t, lam| z_lag.eval(mesh, t, lam));
                let flux = boundary_flux_form(mesh, z_np1)?;
                cell = Some(CellField(
                    (0..mesh.n_triangles())
                        .map(|e| {
                            let c = q_true[e];
                            dz_mean[e] * mesh.areas()[e] + c * int_zp[e] + c.abs().powf(2.0 / 3.0) * c * int_lag[e]
                                - flux[e]
                        })
                        .collect(),
                ));
            }
        }
        let g = cg_solve_checked(&ops.mass, &target, &vec![0.0; n], &ops.cg)?;
        Ok((NodalField(g), cell))
    }
}

impl UpdateLaw for Problem {
    fn mesh(&self) -> &Mesh {
        &self.ops.mesh
    }

    fn sigma(&self) -> f64 {
        self.spec.sigma
    }

    fn parameter_update(&self, state: &MrasState, inputs: &StepInputs<'_>, dt: f64) -> Result<CellField> {
        let mesh = &*self.ops.mesh;
        match self.spec.kind {
            BenchmarkKind::Darcy => darcy_q_update(mesh, &state.q, &state.u, inputs.z_n, dt),
            BenchmarkKind::FisherKpp => fisher_q_update(mesh, &state.q, &state.u, inputs.z_n, dt),
            BenchmarkKind::NonlinearPotential => potential_q_update(mesh, &self.potential_step(state, inputs, dt), &self.spec),
            BenchmarkKind::AllenCahn => allen_cahn_q_update(mesh, &self.potential_step(state, inputs, dt), &self.spec),
        }
    }

    fn state_update(&self, state: &MrasState, q_next: &CellField, inputs: &StepInputs<'_>, dt: f64) -> Result<NodalField> {
        let ops = &self.ops;
        match self.spec.kind {
            BenchmarkKind::Darcy => darcy_u_system(ops, q_next, &state.u, inputs.z_np1, inputs.g_np1, dt),
            BenchmarkKind::FisherKpp => fisher_u_system(ops, q_next, &state.u, inputs.z_np1, inputs.g_np1, dt),
            BenchmarkKind::NonlinearPotential => {
                let stab = self.stabilizer_for(&state.q);
                potential_u_system(ops, &self.potential_step(state, inputs, dt), q_next, stab, &self.spec)
            }
            BenchmarkKind::AllenCahn => {
                let stab = self.stabilizer_for(&state.q);
                allen_cahn_u_system(ops, &self.potential_step(state, inputs, dt), q_next, stab, &self.spec)
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct CoercivityReport {
    pub samples: usize,
    pub min_ratio: f64,
    pub failures: usize,
    pub coercivity_constant: f64,
}

impl CoercivityReport {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

/// Samples `<f(c,z) - f(c_true,z), c - c_true>` for random `c` (uniform in
/// `[-5, 5]` per element) and compares it with `zmin^p ||c - c_true||^2`.
/// The Laplacian part of `f` cancels in the difference.
pub fn coercivity_check(
    mesh: &Mesh,
    z: &NodalField,
    c_true: &CellField,
    power: u32,
    z_lower: f64,
    n_samples: usize,
    seed: u64,
) -> Result<CoercivityReport> {
    z.check(mesh)?;
    c_true.check(mesh)?;
    let int_zp = cell_integrals(mesh, |t, lam| z.eval(mesh, t, lam).powi(power as i32));
    let int_z = cell_integrals(mesh, |t, lam| z.eval(mesh, t, lam));
    let coe = z_lower.powi(power as i32);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut min_ratio = f64::INFINITY;
    let mut failures = 0;
    for _ in 0..n_samples {
        let mut lhs = 0.0;
        let mut dist2 = 0.0;
        for e in 0..mesh.n_triangles() {
            let c: f64 = rng.random_range(-5.0..=5.0);
            let ct = c_true[e];
            let d = c - ct;
            let mono = c * c.abs().powf(2.0 / 3.0) - ct * ct.abs().powf(2.0 / 3.0);
            lhs += d * (d * int_zp[e] + mono * int_z[e]);
            dist2 += mesh.areas()[e] * d * d;
        }
        if lhs < coe * dist2 - 1e-10 {
            failures += 1;
        }
        if dist2 > 0.0 {
            min_ratio = min_ratio.min(lhs / (coe * dist2));
        }
    }
    Ok(CoercivityReport {
        samples: n_samples,
        min_ratio,
        failures,
        coercivity_constant: coe,
    })
}

/// Ratio `||f(c,z) - f(c_true,z) - f'_c(c_ref,z)(c - c_true)||_{(H^1)^*} / (L ||c - c_true||)`
/// with the dual norm evaluated exactly on the discrete space through the
/// Riesz representer of the residual in `H^1` (Gram matrix `K + M`).
pub fn lipschitz_ratio(
    mesh: &Mesh,
    z: &NodalField,
    c: &CellField,
    c_true: &CellField,
    c_ref: &CellField,
    cfg: &StabilizerConfig,
) -> Result<f64> {
    z.check(mesh)?;
    for f in [c, c_true, c_ref] {
        f.check(mesh)?;
    }
    let residual = quadrature_load(mesh, |t, lam| {
        let (a, b, r) = (c[t], c_true[t], c_ref[t]);
        let nonlinear = a * a.abs().powf(2.0 / 3.0) - b * b.abs().powf(2.0 / 3.0) - 5.0 / 3.0 * r.abs().powf(2.0 / 3.0) * (a - b);
        nonlinear * z.eval(mesh, t, lam)
    });
    let gram = fem::assemble_mass(mesh).linear_combination(1.0, &assemble_stiffness(mesh, None)?, 1.0)?;
    let riesz = cg_solve_checked(&gram, &residual, &vec![0.0; mesh.n_vertices()], &CgOptions::default())?;
    let dual: f64 = residual.iter().zip(&riesz).map(|(a, b)| a * b).sum::<f64>().max(0.0).sqrt();
    let l = cfg.lipschitz(c.l2_norm(mesh), c_true.l2_norm(mesh), c_ref.l2_norm(mesh));
    let dist = c.sub(c_true).l2_norm(mesh);
    if !(dist > 0.0) {
        return Err(Error::invalid("lipschitz ratio needs c != c_true"));
    }
    Ok(dual / (l * dist))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{disk_mesh, rect_mesh};

    fn two_triangles() -> Arc<Mesh> {
        Arc::new(Mesh::new(vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]], vec![[0, 1, 2], [0, 2, 3]]).unwrap())
    }

    #[test]
    fn kind_names_roundtrip() {
        for k in BenchmarkKind::ALL {
            assert_eq!(k.name().parse::<BenchmarkKind>().unwrap(), k);
        }
        assert!("heat".parse::<BenchmarkKind>().is_err());
    }

    #[test]
    fn darcy_update_trivial_cases() {
        let mesh = rect_mesh(0.0, 1.0, 0.0, 1.0, 0.3).unwrap();
        let a = CellField::from_fn(&mesh, |p| p[0] + 0.2);
        let z = NodalField::from_fn(&mesh, |p| p[0] * p[1]);
        assert_eq!(darcy_q_update(&mesh, &a, &z, &z, 0.1).unwrap(), a);
        let u = NodalField::from_fn(&mesh, |p| p[1].sin());
        assert_eq!(darcy_q_update(&mesh, &a, &u, &z, 0.0).unwrap(), a);
    }

    #[test]
    fn darcy_update_single_triangle() {
        // z = x, u - z = 2x on the reference triangle
        let mesh = Mesh::new(vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]], vec![[0, 1, 2]]).unwrap();
        let z = NodalField(vec![0.0, 1.0, 0.0]);
        let u = NodalField(vec![0.0, 3.0, 0.0]);
        let a = darcy_q_update(&mesh, &CellField(vec![1.0]), &u, &z, 0.1).unwrap();
        assert!((a[0] - 1.2).abs() < 1e-15);
        assert_eq!(fisher_q_update(&mesh, &CellField(vec![1.0]), &u, &z, 0.1).unwrap(), a);
    }

    #[test]
    fn stabilizer_closed_forms() {
        let cfg = StabilizerConfig::new(0.5, 2.0, 0.0);
        assert!((stabilizer_constant(0.0, &cfg, 0.0) - 1.0).abs() < 1e-15);
        let cfg = StabilizerConfig::new(0.5, 2.0, 3.0);
        let base = stabilizer_constant(1.7, &cfg, 0.4) - 1.0;
        let doubled = StabilizerConfig { z_upper: 4.0, ..cfg.clone() };
        let quad = stabilizer_constant(1.7, &doubled, 0.4) - 1.0;
        assert!((quad - 4.0 * base).abs() < 1e-12 * quad);
        let mut last = 0.0;
        for k in 0..50 {
            let c = stabilizer_constant(k as f64 * 0.3, &cfg, 0.4);
            assert!(c >= last && c >= 1.0);
            last = c;
        }
    }

    #[test]
    fn stabilizer_reevaluation() {
        // C_e^2 (2 zmax^2 / zmin) (|c_n|^(2/3) + |c_true|^(2/3) + |c_ref|^(2/3))^2 + 1
        let cfg = StabilizerConfig {
            embedding_constant: 0.7,
            ..StabilizerConfig::new(1.0, 1.5, 3.0)
        };
        let (n, t, r): (f64, f64, f64) = (2.2, 3.0, 0.0);
        let s = n.cbrt().powi(2) + t.cbrt().powi(2) + r.cbrt().powi(2);
        let expected = 0.49 * (2.0 * 2.25 / 1.0) * s * s + 1.0;
        assert!((stabilizer_constant(n, &cfg, r) - expected).abs() < 1e-12 * expected);
    }

    #[test]
    fn potential_q_hand_evaluated() {
        // c_n = c_ref = 0, z = 1, u - z = alpha, dz_dt = g
        let mesh = rect_mesh(0.0, 1.0, 0.0, 1.0, 0.5).unwrap();
        let nv = mesh.n_vertices();
        let spec = ProblemSpec::new(BenchmarkKind::NonlinearPotential, &mesh, StabilizerConfig::new(1.0, 1.0, 1.0));
        let one = NodalField::constant(nv, 1.0);
        let alpha = 0.3;
        let u = NodalField::constant(nv, 1.0 + alpha);
        let g = NodalField::from_fn(&mesh, |p| p[0] - p[1]);
        let c0 = CellField::zeros(&mesh);
        for dt in [0.1, 0.0] {
            let step = PotentialStep { c_n: &c0, u_n: &u, z_n: &one, z_np1: &one, dz_dt: &g, g_np1: &g, g_cell: None, dt };
            let c1 = potential_q_update(&mesh, &step, &spec).unwrap();
            for v in c1.iter() {
                assert!((v - dt * alpha / (1.0 + dt)).abs() < 1e-14);
            }
            // z = 1 makes the Allen-Cahn law identical
            assert_eq!(allen_cahn_q_update(&mesh, &step, &spec).unwrap(), c1);
        }
    }

    #[test]
    fn nonpositive_diagonal_reported() {
        let mesh = two_triangles();
        let spec = ProblemSpec::new(BenchmarkKind::NonlinearPotential, &mesh, StabilizerConfig::new(1.0, 1.0, 1.0));
        let z = NodalField::constant(4, -20.0);
        let c = CellField::zeros(&mesh);
        let step = PotentialStep { c_n: &c, u_n: &z, z_n: &z, z_np1: &z, dz_dt: &z, g_np1: &z, g_cell: None, dt: 0.1 };
        assert!(matches!(potential_q_update(&mesh, &step, &spec), Err(Error::Positivity { .. })));
    }

    #[test]
    fn coercivity_scalar_brute_force() {
        // (c - ct)^2 + (c|c|^(2/3) - ct|ct|^(2/3)) (c - ct) >= (c - ct)^2 on a grid
        let f = |c: f64| c * c.abs().powf(2.0 / 3.0);
        for i in -50..=50 {
            for j in -50..=50 {
                let (c, ct) = (i as f64 * 0.1, j as f64 * 0.1);
                let lhs = (c - ct).powi(2) + (f(c) - f(ct)) * (c - ct);
                assert!(lhs >= (c - ct).powi(2) - 1e-12);
            }
        }
        let mesh = Mesh::new(vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]], vec![[0, 1, 2]]).unwrap();
        let rep = coercivity_check(&mesh, &NodalField::constant(3, 1.0), &CellField(vec![0.7]), 1, 1.0, 200, 3).unwrap();
        assert!(rep.passed() && rep.min_ratio >= 1.0);
        let same = coercivity_check(&mesh, &NodalField::constant(3, 1.0), &CellField(vec![0.7]), 1, 1.0, 0, 3).unwrap();
        assert_eq!(same.failures, 0);
    }

    #[test]
    fn lipschitz_bound_holds_on_disk() {
        let mesh = disk_mesh(std::f64::consts::PI, 0.6).unwrap();
        let z = NodalField::from_fn(&mesh, |p| 1.2 + 0.3 * (p[0] * 0.7).sin());
        let cfg = StabilizerConfig::new(0.9, 1.5, 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..5 {
            let mut rand_field = || CellField((0..mesh.n_triangles()).map(|_| rng.random_range(-4.0..4.0)).collect());
            let (c, ct, cr) = (rand_field(), rand_field(), rand_field());
            let r = lipschitz_ratio(&mesh, &z, &c, &ct, &cr, &cfg).unwrap();
            assert!(r <= 1.0, "ratio {r}");
        }
    }
}
