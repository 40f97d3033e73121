//! Dense, independently assembled reference computations.
#![allow(dead_code)]

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector, Matrix3};

use mras::mesh::Mesh;

/// `int_T l1^a l2^b l3^c = 2 |T| a! b! c! / (a + b + c + 2)!`.
pub fn monomial(area: f64, e: [usize; 3]) -> f64 {
    let fact = |n: usize| (1..=n).map(|k| k as f64).product::<f64>();
    2.0 * area * fact(e[0]) * fact(e[1]) * fact(e[2]) / fact(e[0] + e[1] + e[2] + 2)
}

/// Exact integral over triangle `t` of `prod_k f_k` with each `f_k` linear,
/// given by its three vertex values, times the listed barycentric factors.
pub fn integrate_product(mesh: &Mesh, t: usize, linear: &[[f64; 3]], basis: &[usize]) -> f64 {
    let area = mesh.areas()[t];
    let mut total = 0.0;
    let m = linear.len();
    let combos = 3usize.pow(m as u32);
    for code in 0..combos {
        let mut exps = [0usize; 3];
        let mut coeff = 1.0;
        let mut c = code;
        for f in linear {
            let k = c % 3;
            c /= 3;
            coeff *= f[k];
            exps[k] += 1;
        }
        if coeff == 0.0 {
            continue;
        }
        for &b in basis {
            exps[b] += 1;
        }
        total += coeff * monomial(area, exps);
    }
    total
}

pub fn local(mesh: &Mesh, t: usize, v: &[f64]) -> [f64; 3] {
    mesh.triangles()[t].map(|i| v[i])
}

/// Gradients of the barycentric coordinates from the inverse of `[1 x y]`.
pub fn grads(mesh: &Mesh, t: usize) -> [[f64; 2]; 3] {
    let c = mesh.corners(t);
    let a = Matrix3::new(1.0, c[0][0], c[0][1], 1.0, c[1][0], c[1][1], 1.0, c[2][0], c[2][1]);
    let inv = a.try_inverse().expect("nondegenerate");
    [0, 1, 2].map(|k| [inv[(1, k)], inv[(2, k)]])
}

pub fn grad_of(mesh: &Mesh, t: usize, v: &[f64]) -> [f64; 2] {
    let g = grads(mesh, t);
    let l = local(mesh, t, v);
    [
        g[0][0] * l[0] + g[1][0] * l[1] + g[2][0] * l[2],
        g[0][1] * l[0] + g[1][1] * l[1] + g[2][1] * l[2],
    ]
}

pub fn dense_mass(mesh: &Mesh) -> DMatrix<f64> {
    let n = mesh.n_vertices();
    let mut m = DMatrix::zeros(n, n);
    for (t, tri) in mesh.triangles().iter().enumerate() {
        for a in 0..3 {
            for b in 0..3 {
                m[(tri[a], tri[b])] += integrate_product(mesh, t, &[], &[a, b]);
            }
        }
    }
    m
}

pub fn dense_stiffness(mesh: &Mesh, coeff: Option<&[f64]>) -> DMatrix<f64> {
    let n = mesh.n_vertices();
    let mut k = DMatrix::zeros(n, n);
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let g = grads(mesh, t);
        let w = coeff.map_or(1.0, |c| c[t]) * mesh.areas()[t];
        for a in 0..3 {
            for b in 0..3 {
                k[(tri[a], tri[b])] += w * (g[a][0] * g[b][0] + g[a][1] * g[b][1]);
            }
        }
    }
    k
}

/// `int (sum_e w_e prod linear) phi_i` for all `i`; each element has its own
/// constant weight and the linear factors are global nodal vectors.
pub fn dense_load(mesh: &Mesh, terms: &[(Vec<f64>, Vec<&[f64]>)]) -> DVector<f64> {
    let mut out = DVector::zeros(mesh.n_vertices());
    for (t, tri) in mesh.triangles().iter().enumerate() {
        for (w, fields) in terms {
            let lin: Vec<[f64; 3]> = fields.iter().map(|f| local(mesh, t, f)).collect();
            for a in 0..3 {
                out[tri[a]] += w[t] * integrate_product(mesh, t, &lin, &[a]);
            }
        }
    }
    out
}

/// `int_T prod linear` per element.
pub fn dense_cell_integral(mesh: &Mesh, fields: &[&[f64]]) -> Vec<f64> {
    (0..mesh.n_triangles())
        .map(|t| {
            let lin: Vec<[f64; 3]> = fields.iter().map(|f| local(mesh, t, f)).collect();
            integrate_product(mesh, t, &lin, &[])
        })
        .collect()
}

/// Sum over the boundary edges of each element of `grad v . n |e|`, with the
/// outward normal chosen to point away from the opposite vertex.
pub fn dense_boundary_flux(mesh: &Mesh, v: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; mesh.n_triangles()];
    for (t, [a, b]) in edges_once(mesh) {
        let p = mesh.vertices()[a];
        let q = mesh.vertices()[b];
        let tri = mesh.triangles()[t];
        let opp = tri.iter().find(|&&i| i != a && i != b).unwrap();
        let o = mesh.vertices()[*opp];
        let mut n = [q[1] - p[1], p[0] - q[0]];
        let mid = [(p[0] + q[0]) / 2.0, (p[1] + q[1]) / 2.0];
        if n[0] * (mid[0] - o[0]) + n[1] * (mid[1] - o[1]) < 0.0 {
            n = [-n[0], -n[1]];
        }
        let g = grad_of(mesh, t, v);
        out[t] += g[0] * n[0] + g[1] * n[1];
    }
    out
}

/// Edges that belong to exactly one triangle, with that triangle.
pub fn edges_once(mesh: &Mesh) -> Vec<(usize, [usize; 2])> {
    let mut seen: HashMap<[usize; 2], Vec<usize>> = HashMap::new();
    for (t, tri) in mesh.triangles().iter().enumerate() {
        for k in 0..3 {
            let (a, b) = (tri[k], tri[(k + 1) % 3]);
            seen.entry([a.min(b), a.max(b)]).or_default().push(t);
        }
    }
    let mut out: Vec<_> = seen.into_iter().filter(|(_, ts)| ts.len() == 1).map(|(e, ts)| (ts[0], e)).collect();
    out.sort_unstable();
    out
}

pub fn boundary_vertices(mesh: &Mesh) -> Vec<bool> {
    let mut flags = vec![false; mesh.n_vertices()];
    for (_, [a, b]) in edges_once(mesh) {
        flags[a] = true;
        flags[b] = true;
    }
    flags
}

/// Solves `A x = b` with `x` fixed to `values` on flagged vertices.
pub fn dense_dirichlet_solve(a: &DMatrix<f64>, b: &DVector<f64>, fixed: &[bool], values: &[f64]) -> Vec<f64> {
    let free: Vec<usize> = (0..fixed.len()).filter(|&i| !fixed[i]).collect();
    let mut x: Vec<f64> = (0..fixed.len()).map(|i| if fixed[i] { values[i] } else { 0.0 }).collect();
    if free.is_empty() {
        return x;
    }
    let nf = free.len();
    let mut af = DMatrix::zeros(nf, nf);
    let mut bf = DVector::zeros(nf);
    for (r, &i) in free.iter().enumerate() {
        bf[r] = b[i];
        for j in 0..fixed.len() {
            if fixed[j] {
                bf[r] -= a[(i, j)] * values[j];
            }
        }
        for (c, &j) in free.iter().enumerate() {
            af[(r, c)] = a[(i, j)];
        }
    }
    let sol = af.lu().solve(&bf).expect("nonsingular");
    for (r, &i) in free.iter().enumerate() {
        x[i] = sol[r];
    }
    x
}

pub fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn two_triangles() -> Mesh {
    Mesh::new(vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]], vec![[0, 1, 2], [0, 2, 3]]).unwrap()
}

/// Four triangles around one interior vertex.
pub fn fan() -> Mesh {
    Mesh::new(
        vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0], [0.45, 0.55]],
        vec![[0, 1, 4], [1, 2, 4], [2, 3, 4], [3, 0, 4]],
    )
    .unwrap()
}

fn matvec(a: &DMatrix<f64>, v: &[f64]) -> DVector<f64> {
    a * DVector::from_column_slice(v)
}

/// One Darcy (`reaction = false`) or Fisher-KPP step from the printed weak
/// forms, assembled densely. Returns `(q_{n+1}, u_{n+1})`.
pub fn dense_diffusion_step(
    mesh: &Mesh,
    q: &[f64],
    u: &[f64],
    z0: &[f64],
    z1: &[f64],
    g1: &[f64],
    dt: f64,
    reaction: bool,
) -> (Vec<f64>, Vec<f64>) {
    let diff: Vec<f64> = u.iter().zip(z0).map(|(a, b)| a - b).collect();
    let q1: Vec<f64> = (0..mesh.n_triangles())
        .map(|t| {
            let gz = grad_of(mesh, t, z0);
            let gd = grad_of(mesh, t, &diff);
            q[t] + dt * (gz[0] * gd[0] + gz[1] * gd[1])
        })
        .collect();
    let m = dense_mass(mesh);
    let k = dense_stiffness(mesh, None);
    let kq = dense_stiffness(mesh, Some(&q1));
    let mut b = matvec(&m, u) + dt * (matvec(&m, g1) + matvec(&k, z1) - matvec(&kq, z1));
    if reaction {
        let ones = vec![1.0; mesh.n_triangles()];
        let z2 = dense_load(mesh, &[(ones, vec![z1, z1])]);
        b += dt * (z2 - matvec(&m, z1));
    }
    let a = &m + dt * &k;
    let fixed = boundary_vertices(mesh);
    let zero = vec![0.0; mesh.n_vertices()];
    (q1, dense_dirichlet_solve(&a, &b, &fixed, &zero))
}

/// Stabilizer factor recomputed from its closed form.
pub fn stabilizer_oracle(norm_c: f64, norm_true: f64, norm_ref: f64, zl: f64, zu: f64, ce: f64, m: f64, scale: f64) -> f64 {
    let l = 5.0 / 3.0 * zu * ce * (norm_c.cbrt().powi(2) + norm_true.cbrt().powi(2) + norm_ref.cbrt().powi(2));
    scale * (l * l / (2.0 * zl) + m)
}

pub fn cell_l2(mesh: &Mesh, c: &[f64]) -> f64 {
    c.iter().zip(mesh.areas()).map(|(v, a)| a * v * v).sum::<f64>().sqrt()
}

pub struct PotentialInputs<'a> {
    pub power: usize,
    pub sigma: f64,
    pub c: &'a [f64],
    pub c_ref: &'a [f64],
    pub u: &'a [f64],
    pub z0: &'a [f64],
    pub z1: &'a [f64],
    pub g1: &'a [f64],
    pub dt: f64,
    /// Stabilizer factor `C_{c_n}`.
    pub stab: f64,
}

/// One potential (`power = 1`) or Allen-Cahn (`power = 3`) step in
/// incremental form, with the lagged terms on `z_n`.
pub fn dense_potential_step(s: &PotentialInputs<'_>, mesh: &Mesh) -> (Vec<f64>, Vec<f64>) {
    let dt = s.dt;
    let zp: Vec<&[f64]> = vec![s.z1; s.power];
    let int_zp = dense_cell_integral(mesh, &zp);
    let int_z0 = dense_cell_integral(mesh, &[s.z0]);
    let diff: Vec<f64> = s.u.iter().zip(s.z0).map(|(a, b)| a - b).collect();
    let int_fb = dense_cell_integral(mesh, &[s.z0, &diff]);
    let dz: Vec<f64> = s.z1.iter().zip(s.z0).map(|(a, b)| (a - b) / dt).collect();
    let int_dz = dense_cell_integral(mesh, &[&dz]);
    let int_g = dense_cell_integral(mesh, &[s.g1]);
    let flux = dense_boundary_flux(mesh, s.z1);
    let c1: Vec<f64> = (0..mesh.n_triangles())
        .map(|e| {
            let c = s.c[e];
            let ac = c.abs().cbrt().powi(2);
            let act = s.c_ref[e].abs().cbrt().powi(2);
            let diag = mesh.areas()[e] + s.sigma * dt * (int_zp[e] + ac * int_z0[e]);
            let rhs = dt * (1.0 + 5.0 / 3.0 * act) * int_fb[e] + s.sigma * dt * flux[e]
                - s.sigma * dt * (int_dz[e] + c * int_zp[e] + ac * c * int_z0[e] - int_g[e]);
            c + rhs / diag
        })
        .collect();

    let m = dense_mass(mesh);
    let k = dense_stiffness(mesh, None);
    let w: Vec<f64> = (0..mesh.n_triangles()).map(|e| s.c[e].abs().cbrt().powi(2) * c1[e]).collect();
    let reaction = dense_load(mesh, &[(c1.clone(), zp.clone()), (w, vec![s.z1])]);
    let fb: Vec<f64> = s.z0.iter().zip(s.u).map(|(a, b)| a - b).collect();
    let b = -dt * (reaction - matvec(&m, s.g1)) - dt * matvec(&k, s.z1) + dt * s.stab * matvec(&k, &fb);
    let a = &m + dt * s.stab * &k;
    let fixed = boundary_vertices(mesh);
    let bc: Vec<f64> = s.z1.iter().zip(s.u).map(|(a, b)| a - b).collect();
    let du = dense_dirichlet_solve(&a, &b, &fixed, &bc);
    (c1, s.u.iter().zip(&du).map(|(a, b)| a + b).collect())
}

/// Realised mesh size and L2 error of the P1 solution of
/// `-lap u = 2 pi^2 u` with `u = sin(pi x) sin(pi y)` on the unit square.
pub fn poisson_l2_error(h: f64) -> (f64, f64) {
    use mras::fem::{apply_dirichlet, assemble_stiffness, cell_integrals, quadrature_load};
    use mras::sparse::{cg_solve_checked, CgOptions};
    use std::f64::consts::PI;

    let mesh = mras::mesh::rect_mesh(0.0, 1.0, 0.0, 1.0, h).unwrap();
    let exact = |p: [f64; 2]| (PI * p[0]).sin() * (PI * p[1]).sin();
    let at = |t: usize, lam: [f64; 3]| {
        let c = mesh.corners(t);
        [
            lam[0] * c[0][0] + lam[1] * c[1][0] + lam[2] * c[2][0],
            lam[0] * c[0][1] + lam[1] * c[1][1] + lam[2] * c[2][1],
        ]
    };
    let f = quadrature_load(&mesh, |t, lam| 2.0 * PI * PI * exact(at(t, lam)));
    let k = assemble_stiffness(&mesh, None).unwrap();
    let zero = vec![0.0; mesh.n_vertices()];
    let sys = apply_dirichlet(&k, &f, mesh.boundary_flags(), &zero).unwrap();
    let opts = CgOptions {
        tol: 1e-12,
        ..CgOptions::default()
    };
    let x = cg_solve_checked(&sys.matrix, &sys.rhs, &sys.restrict(&zero), &opts).unwrap();
    let u = sys.expand(&x);
    let err = cell_integrals(&mesh, |t, lam| {
        let tri = mesh.triangles()[t];
        let uh = lam[0] * u[tri[0]] + lam[1] * u[tri[1]] + lam[2] * u[tri[2]];
        (uh - exact(at(t, lam))).powi(2)
    });
    (mesh.h_max(), err.iter().sum::<f64>().sqrt())
}

/// Observed orders between consecutive `(h, error)` pairs.
pub fn observed_orders(runs: &[(f64, f64)]) -> Vec<f64> {
    runs.windows(2).map(|w| (w[0].1 / w[1].1).ln() / (w[0].0 / w[1].0).ln()).collect()
}
