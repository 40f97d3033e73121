//! P1 (state) and P0 (parameter) finite elements on triangle meshes.

use std::ops::{Deref, DerefMut};

use crate::error::{check_len, Error, Result};
use crate::mesh::{Mesh, Point, PointLocator};
use crate::sparse::CsrMatrix;

/// Continuous piecewise linear field: one value per mesh vertex.
#[derive(Clone, Debug, PartialEq)]
pub struct NodalField(pub Vec<f64>);

/// Piecewise constant field: one value per triangle.
#[derive(Clone, Debug, PartialEq)]
pub struct CellField(pub Vec<f64>);

macro_rules! field_impls {
    ($ty:ident) => {
        impl Deref for $ty {
            type Target = [f64];
            fn deref(&self) -> &[f64] {
                &self.0
            }
        }

        impl DerefMut for $ty {
            fn deref_mut(&mut self) -> &mut [f64] {
                &mut self.0
            }
        }

        impl From<Vec<f64>> for $ty {
            fn from(v: Vec<f64>) -> Self {
                $ty(v)
            }
        }

        impl $ty {
            pub fn constant(n: usize, value: f64) -> Self {
                $ty(vec![value; n])
            }

            pub fn is_finite(&self) -> bool {
                self.0.iter().all(|v| v.is_finite())
            }

            pub fn sub(&self, other: &$ty) -> $ty {
                $ty(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
            }

            pub fn add_scaled(&self, alpha: f64, other: &$ty) -> $ty {
                $ty(self.0.iter().zip(&other.0).map(|(a, b)| a + alpha * b).collect())
            }
        }
    };
}

field_impls!(NodalField);
field_impls!(CellField);

impl NodalField {
    pub fn zeros(mesh: &Mesh) -> Self {
        NodalField(vec![0.0; mesh.n_vertices()])
    }

    pub fn from_fn(mesh: &Mesh, f: impl Fn(Point) -> f64) -> Self {
        NodalField(mesh.vertices().iter().map(|&p| f(p)).collect())
    }

    pub fn check(&self, mesh: &Mesh) -> Result<()> {
        check_len("nodal field", mesh.n_vertices(), self.len())
    }

    /// Value at barycentric coordinates `lam` inside triangle `t`.
    pub fn eval(&self, mesh: &Mesh, t: usize, lam: [f64; 3]) -> f64 {
        let tri = mesh.triangles()[t];
        lam[0] * self.0[tri[0]] + lam[1] * self.0[tri[1]] + lam[2] * self.0[tri[2]]
    }

    /// `sqrt(v^T M v)` with the consistent P1 mass matrix.
    pub fn l2_norm(&self, mesh: &Mesh) -> f64 {
        let mut s = 0.0;
        for (t, tri) in mesh.triangles().iter().enumerate() {
            let [a, b, c] = tri.map(|i| self.0[i]);
            s += mesh.areas()[t] / 6.0 * (a * a + b * b + c * c + a * b + b * c + c * a);
        }
        s.max(0.0).sqrt()
    }

    /// Element-wise mean, i.e. the L2 projection onto P0.
    pub fn cell_means(&self, mesh: &Mesh) -> CellField {
        CellField(
            mesh.triangles()
                .iter()
                .map(|t| (self.0[t[0]] + self.0[t[1]] + self.0[t[2]]) / 3.0)
                .collect(),
        )
    }
}

impl CellField {
    pub fn zeros(mesh: &Mesh) -> Self {
        CellField(vec![0.0; mesh.n_triangles()])
    }

    /// Samples `f` at triangle centroids.
    pub fn from_fn(mesh: &Mesh, f: impl Fn(Point) -> f64) -> Self {
        CellField((0..mesh.n_triangles()).map(|t| f(mesh.centroid(t))).collect())
    }

    pub fn check(&self, mesh: &Mesh) -> Result<()> {
        check_len("cell field", mesh.n_triangles(), self.len())
    }

    pub fn l2_norm(&self, mesh: &Mesh) -> f64 {
        self.0
            .iter()
            .zip(mesh.areas())
            .map(|(v, a)| a * v * v)
            .sum::<f64>()
            .sqrt()
    }
}

/// Symmetric 7-point rule of degree 5 in barycentric coordinates; weights are
/// fractions of the element area. Integrates `z^3 phi_i phi_j` exactly for P1 `z`.
pub const QUADRATURE: [([f64; 3], f64); 7] = {
    const A1: f64 = 0.059_715_871_789_769_820; // (9 - 2 sqrt 15) / 21
    const B1: f64 = 0.470_142_064_105_115_09; // (6 + sqrt 15) / 21
    const A2: f64 = 0.797_426_985_353_087_32; // (9 + 2 sqrt 15) / 21
    const B2: f64 = 0.101_286_507_323_456_34; // (6 - sqrt 15) / 21
    const W0: f64 = 0.225;
    const W1: f64 = 0.132_394_152_788_506_18; // (155 + sqrt 15) / 1200
    const W2: f64 = 0.125_939_180_544_827_15; // (155 - sqrt 15) / 1200
    [
        ([1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0], W0),
        ([A1, B1, B1], W1),
        ([B1, A1, B1], W1),
        ([B1, B1, A1], W1),
        ([A2, B2, B2], W2),
        ([B2, A2, B2], W2),
        ([B2, B2, A2], W2),
    ]
};

/// Gradients of the three barycentric basis functions of triangle `t`.
pub fn basis_gradients(mesh: &Mesh, t: usize) -> [[f64; 2]; 3] {
    let [p0, p1, p2] = mesh.corners(t);
    let two_a = 2.0 * mesh.areas()[t];
    [
        [(p1[1] - p2[1]) / two_a, (p2[0] - p1[0]) / two_a],
        [(p2[1] - p0[1]) / two_a, (p0[0] - p2[0]) / two_a],
        [(p0[1] - p1[1]) / two_a, (p1[0] - p0[0]) / two_a],
    ]
}

/// Constant gradient of a P1 field on triangle `t`.
pub fn field_gradient(mesh: &Mesh, t: usize, z: &[f64]) -> [f64; 2] {
    let g = basis_gradients(mesh, t);
    let tri = mesh.triangles()[t];
    let mut out = [0.0; 2];
    for k in 0..3 {
        out[0] += z[tri[k]] * g[k][0];
        out[1] += z[tri[k]] * g[k][1];
    }
    out
}

fn dot2(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

fn assemble_local(mesh: &Mesh, mut local: impl FnMut(usize) -> [[f64; 3]; 3]) -> CsrMatrix {
    let n = mesh.n_vertices();
    let mut triplets = Vec::with_capacity(9 * mesh.n_triangles());
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let m = local(t);
        for a in 0..3 {
            for b in 0..3 {
                triplets.push((tri[a], tri[b], m[a][b]));
            }
        }
    }
    CsrMatrix::from_triplets(n, n, &triplets).expect("mesh indices are in range")
}

/// Consistent P1 mass matrix `M_ij = int phi_i phi_j`.
pub fn assemble_mass(mesh: &Mesh) -> CsrMatrix {
    assemble_local(mesh, |t| {
        let d = mesh.areas()[t] / 6.0;
        let o = mesh.areas()[t] / 12.0;
        [[d, o, o], [o, d, o], [o, o, d]]
    })
}

/// `K_ij = int coeff grad phi_i . grad phi_j` with a P0 coefficient (1 if `None`).
pub fn assemble_stiffness(mesh: &Mesh, coeff: Option<&CellField>) -> Result<CsrMatrix> {
    if let Some(c) = coeff {
        c.check(mesh)?;
        if !c.is_finite() {
            return Err(Error::invalid("non-finite stiffness coefficient"));
        }
        if cfg!(debug_assertions) && c.iter().any(|&v| v < 0.0) {
            log::warn!("stiffness assembled with a negative coefficient");
        }
    }
    Ok(assemble_local(mesh, |t| {
        let g = basis_gradients(mesh, t);
        let s = mesh.areas()[t] * coeff.map_or(1.0, |c| c[t]);
        let mut m = [[0.0; 3]; 3];
        for a in 0..3 {
            for b in 0..3 {
                m[a][b] = s * dot2(g[a], g[b]);
            }
        }
        m
    }))
}

/// `int w^p phi_i phi_j` for a P1 weight `w` and `p` in 1..=3.
pub fn assemble_weighted_mass(mesh: &Mesh, w: &NodalField, power: u32) -> Result<CsrMatrix> {
    w.check(mesh)?;
    if !(1..=3).contains(&power) {
        return Err(Error::invalid(format!("unsupported weight power {power}")));
    }
    Ok(assemble_local(mesh, |t| {
        let area = mesh.areas()[t];
        let mut m = [[0.0; 3]; 3];
        for (lam, wq) in QUADRATURE {
            let wv = w.eval(mesh, t, lam).powi(power as i32) * wq * area;
            for a in 0..3 {
                for b in 0..3 {
                    m[a][b] += wv * lam[a] * lam[b];
                }
            }
        }
        m
    }))
}

/// Rectangular operator `G` (vertices x triangles) with
/// `G_ie = int_{E_e} grad z . grad phi_i`, so `G a` is the weak form of
/// `-div(a grad z)` tested with P1 functions.
pub fn grad_coupling(mesh: &Mesh, z: &NodalField) -> Result<CsrMatrix> {
    z.check(mesh)?;
    let mut triplets = Vec::with_capacity(3 * mesh.n_triangles());
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let g = basis_gradients(mesh, t);
        let gz = field_gradient(mesh, t, z);
        for k in 0..3 {
            triplets.push((tri[k], t, mesh.areas()[t] * dot2(gz, g[k])));
        }
    }
    CsrMatrix::from_triplets(mesh.n_vertices(), mesh.n_triangles(), &triplets)
}

/// `G(z) a` without forming `G`.
pub fn grad_coupling_apply(mesh: &Mesh, z: &NodalField, a: &CellField) -> Result<Vec<f64>> {
    z.check(mesh)?;
    a.check(mesh)?;
    let mut out = vec![0.0; mesh.n_vertices()];
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let g = basis_gradients(mesh, t);
        let gz = field_gradient(mesh, t, z);
        let s = a[t] * mesh.areas()[t];
        for k in 0..3 {
            out[tri[k]] += s * dot2(gz, g[k]);
        }
    }
    Ok(out)
}

/// Per-element `grad z . grad w` (both gradients are element constants).
pub fn elementwise_gradient_dot(mesh: &Mesh, z: &NodalField, w: &NodalField) -> Result<CellField> {
    z.check(mesh)?;
    w.check(mesh)?;
    Ok(CellField(
        (0..mesh.n_triangles())
            .map(|t| dot2(field_gradient(mesh, t, z), field_gradient(mesh, t, w)))
            .collect(),
    ))
}

/// Outward flux `int_{dOmega cap dE} grad z . n ds` per element, using the
/// element's own constant gradient. Zero on elements without a boundary edge.
pub fn boundary_flux_form(mesh: &Mesh, z: &NodalField) -> Result<CellField> {
    z.check(mesh)?;
    let mut out = vec![0.0; mesh.n_triangles()];
    for e in mesh.boundary_edges() {
        let [a, b] = e.vertices.map(|i| mesh.vertices()[i]);
        // counterclockwise edge: outward normal times length is (dy, -dx)
        let n_len = [b[1] - a[1], -(b[0] - a[0])];
        out[e.triangle] += dot2(field_gradient(mesh, e.triangle, z), n_len);
    }
    Ok(CellField(out))
}

/// `M f`: the consistent load of a nodally interpolated source.
pub fn load_vector(mesh: &Mesh, f: &NodalField) -> Result<Vec<f64>> {
    f.check(mesh)?;
    let mut out = vec![0.0; mesh.n_vertices()];
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let [a, b, c] = tri.map(|i| f[i]);
        let s = mesh.areas()[t] / 12.0;
        out[tri[0]] += s * (2.0 * a + b + c);
        out[tri[1]] += s * (a + 2.0 * b + c);
        out[tri[2]] += s * (a + b + 2.0 * c);
    }
    Ok(out)
}

/// `int F phi_i` by quadrature, with `F(t, lam)` evaluated at the quadrature
/// points of triangle `t`.
pub fn quadrature_load(mesh: &Mesh, f: impl Fn(usize, [f64; 3]) -> f64) -> Vec<f64> {
    let mut out = vec![0.0; mesh.n_vertices()];
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let area = mesh.areas()[t];
        for (lam, wq) in QUADRATURE {
            let v = f(t, lam) * wq * area;
            for k in 0..3 {
                out[tri[k]] += v * lam[k];
            }
        }
    }
    out
}

/// `int_{E_t} F` for every triangle, by quadrature.
pub fn cell_integrals(mesh: &Mesh, f: impl Fn(usize, [f64; 3]) -> f64) -> Vec<f64> {
    (0..mesh.n_triangles())
        .map(|t| {
            mesh.areas()[t] * QUADRATURE.iter().map(|&(lam, wq)| wq * f(t, lam)).sum::<f64>()
        })
        .collect()
}

/// P1 interpolation of a field given on `source` at the vertices of `target`.
pub fn transfer(source: &Mesh, field: &NodalField, target: &Mesh) -> Result<NodalField> {
    field.check(source)?;
    let locator = PointLocator::new(source);
    let mut out = Vec::with_capacity(target.n_vertices());
    for &p in target.vertices() {
        let (t, lam) = locator
            .locate(p, 1e-10)
            .ok_or(Error::OutsideMesh { x: p[0], y: p[1] })?;
        out.push(field.eval(source, t, lam));
    }
    Ok(NodalField(out))
}

/// Interpolation plan from one mesh to another, reusable across snapshots.
pub struct Transfer {
    weights: Vec<([usize; 3], [f64; 3])>,
}

impl Transfer {
    pub fn new(source: &Mesh, target: &Mesh) -> Result<Self> {
        let locator = PointLocator::new(source);
        let weights = target
            .vertices()
            .iter()
            .map(|&p| {
                locator
                    .locate(p, 1e-10)
                    .map(|(t, lam)| (source.triangles()[t], lam))
                    .ok_or(Error::OutsideMesh { x: p[0], y: p[1] })
            })
            .collect::<Result<_>>()?;
        Ok(Transfer { weights })
    }

    pub fn apply(&self, field: &NodalField) -> NodalField {
        NodalField(
            self.weights
                .iter()
                .map(|(tri, lam)| lam[0] * field[tri[0]] + lam[1] * field[tri[1]] + lam[2] * field[tri[2]])
                .collect(),
        )
    }
}

/// A linear system with prescribed values eliminated.
pub struct ReducedSystem {
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
    free: Vec<usize>,
    template: Vec<f64>,
}

impl ReducedSystem {
    pub fn free_dofs(&self) -> &[usize] {
        &self.free
    }

    /// Restriction of a full vector to the free unknowns.
    pub fn restrict(&self, full: &[f64]) -> Vec<f64> {
        self.free.iter().map(|&i| full[i]).collect()
    }

    /// Full vector with the prescribed values reinstated.
    pub fn expand(&self, free_values: &[f64]) -> Vec<f64> {
        let mut x = self.template.clone();
        for (&i, &v) in self.free.iter().zip(free_values) {
            x[i] = v;
        }
        x
    }
}

/// Eliminates the rows and columns flagged in `fixed`, moving
/// `A_{free,fixed} * values_fixed` to the right-hand side.
pub fn apply_dirichlet(matrix: &CsrMatrix, rhs: &[f64], fixed: &[bool], values: &[f64]) -> Result<ReducedSystem> {
    let n = matrix.nrows();
    check_len("dirichlet: matrix columns", n, matrix.ncols())?;
    check_len("dirichlet: rhs", n, rhs.len())?;
    check_len("dirichlet: flags", n, fixed.len())?;
    check_len("dirichlet: values", n, values.len())?;
    let free: Vec<usize> = (0..n).filter(|&i| !fixed[i]).collect();
    let reduced_rhs = free
        .iter()
        .map(|&i| {
            rhs[i]
                - matrix
                    .row(i)
                    .filter(|&(j, _)| fixed[j])
                    .map(|(j, v)| v * values[j])
                    .sum::<f64>()
        })
        .collect();
    let template = (0..n).map(|i| if fixed[i] { values[i] } else { 0.0 }).collect();
    Ok(ReducedSystem {
        matrix: matrix.submatrix(&free, &free),
        rhs: reduced_rhs,
        free,
        template,
    })
}
