//! Compressed sparse row storage and the Jacobi-preconditioned conjugate
//! gradient solver used for every implicit solve.

use crate::error::{check_len, Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Assembles from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        for &(i, j, v) in triplets {
            if i >= nrows || j >= ncols {
                return Err(Error::invalid(format!(
                    "triplet ({i}, {j}) outside a {nrows}x{ncols} matrix"
                )));
            }
            if v.is_nan() {
                return Err(Error::invalid(format!("NaN entry at ({i}, {j})")));
            }
        }
        let mut sorted: Vec<(usize, usize, f64)> = triplets.to_vec();
        // stable: duplicates are summed in input order
        sorted.sort_by_key(|&(i, j, _)| (i, j));

        let mut row_offsets = vec![0usize; nrows + 1];
        let mut col_indices = Vec::with_capacity(sorted.len());
        let mut values: Vec<f64> = Vec::with_capacity(sorted.len());
        let mut last: Option<(usize, usize)> = None;
        for (i, j, v) in sorted {
            if last == Some((i, j)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_indices.push(j);
                values.push(v);
                row_offsets[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..nrows {
            row_offsets[i + 1] += row_offsets[i];
        }
        Ok(CsrMatrix {
            nrows,
            ncols,
            row_offsets,
            col_indices,
            values,
        })
    }

    pub fn identity(n: usize) -> Self {
        CsrMatrix {
            nrows: n,
            ncols: n,
            row_offsets: (0..=n).collect(),
            col_indices: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col_indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Entries `(col, value)` of row `i`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_offsets[i]..self.row_offsets[i + 1];
        self.col_indices[r.clone()].iter().copied().zip(self.values[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let r = self.row_offsets[i]..self.row_offsets[i + 1];
        match self.col_indices[r.clone()].binary_search(&j) {
            Ok(k) => self.values[r.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.nrows.min(self.ncols)).map(|i| self.get(i, i)).collect()
    }

    pub fn spmv(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows];
        self.spmv_into(x, &mut y);
        y
    }

    pub fn spmv_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.ncols, "spmv: vector length");
        assert_eq!(y.len(), self.nrows, "spmv: output length");
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = self.row(i).map(|(j, v)| v * x[j]).sum();
        }
    }

    pub fn transpose_spmv(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.nrows, "transpose spmv: vector length");
        let mut y = vec![0.0; self.ncols];
        for (i, &xi) in x.iter().enumerate() {
            for (j, v) in self.row(i) {
                y[j] += v * xi;
            }
        }
        y
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        let mut m = self.clone();
        m.values.iter_mut().for_each(|v| *v *= alpha);
        m
    }

    /// `alpha * self + beta * other`, merging sparsity patterns.
    pub fn linear_combination(&self, alpha: f64, other: &CsrMatrix, beta: f64) -> Result<Self> {
        check_len("matrix rows", self.nrows, other.nrows)?;
        check_len("matrix cols", self.ncols, other.ncols)?;
        let mut row_offsets = Vec::with_capacity(self.nrows + 1);
        let mut col_indices = Vec::with_capacity(self.nnz().max(other.nnz()));
        let mut values = Vec::with_capacity(self.nnz().max(other.nnz()));
        row_offsets.push(0);
        for i in 0..self.nrows {
            let mut a = self.row(i).peekable();
            let mut b = other.row(i).peekable();
            loop {
                let (j, v) = match (a.peek(), b.peek()) {
                    (Some(&(ja, va)), Some(&(jb, vb))) if ja == jb => {
                        a.next();
                        b.next();
                        (ja, alpha * va + beta * vb)
                    }
                    (Some(&(ja, va)), Some(&(jb, _))) if ja < jb => {
                        a.next();
                        (ja, alpha * va)
                    }
                    (_, Some(&(jb, vb))) => {
                        b.next();
                        (jb, beta * vb)
                    }
                    (Some(&(ja, va)), None) => {
                        a.next();
                        (ja, alpha * va)
                    }
                    (None, None) => break,
                };
                col_indices.push(j);
                values.push(v);
            }
            row_offsets.push(col_indices.len());
        }
        Ok(CsrMatrix {
            nrows: self.nrows,
            ncols: self.ncols,
            row_offsets,
            col_indices,
            values,
        })
    }

    /// Largest `|a_ij - a_ji|` relative to the largest `|a_ij|`.
    pub fn symmetry_defect(&self) -> f64 {
        if self.nrows != self.ncols {
            return f64::INFINITY;
        }
        let scale = self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if scale == 0.0 {
            return 0.0;
        }
        let mut worst: f64 = 0.0;
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                worst = worst.max((v - self.get(j, i)).abs());
            }
        }
        worst / scale
    }

    /// Submatrix on the given rows and columns (both as index lists).
    pub fn submatrix(&self, rows: &[usize], cols: &[usize]) -> Self {
        let mut col_map = vec![usize::MAX; self.ncols];
        for (k, &c) in cols.iter().enumerate() {
            col_map[c] = k;
        }
        let mut row_offsets = Vec::with_capacity(rows.len() + 1);
        let mut col_indices = Vec::new();
        let mut values = Vec::new();
        row_offsets.push(0);
        for &r in rows {
            for (j, v) in self.row(r) {
                if col_map[j] != usize::MAX {
                    col_indices.push(col_map[j]);
                    values.push(v);
                }
            }
            row_offsets.push(col_indices.len());
        }
        CsrMatrix {
            nrows: rows.len(),
            ncols: cols.len(),
            row_offsets,
            col_indices,
            values,
        }
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.ncols]; self.nrows];
        for (i, row) in d.iter_mut().enumerate() {
            for (j, v) in self.row(i) {
                row[j] = v;
            }
        }
        d
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Preconditioner {
    None,
    Jacobi,
}

#[derive(Clone, Copy, Debug)]
pub struct CgOptions {
    pub tol: f64,
    /// `None` means ten times the system size.
    pub max_iter: Option<usize>,
    pub preconditioner: Preconditioner,
    pub record_history: bool,
}

impl Default for CgOptions {
    fn default() -> Self {
        CgOptions {
            tol: 1e-10,
            max_iter: None,
            preconditioner: Preconditioner::Jacobi,
            record_history: false,
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct SolveReport {
    pub iterations: usize,
    pub final_residual_norm: f64,
    pub converged: bool,
    /// Relative preconditioned residual after each iteration, when requested.
    pub residual_history: Vec<f64>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Preconditioned conjugate gradients for symmetric positive definite `a`.
///
/// Stops when `||P^{-1} r|| <= tol * ||P^{-1} b||`, i.e. on the relative
/// residual of the left-preconditioned system `P^{-1} A x = P^{-1} b` with
/// `P = diag(A)` (or `P = I`). A non-converged solve is returned with
/// `converged == false`; callers decide whether that is an error.
pub fn cg_solve(a: &CsrMatrix, b: &[f64], x0: &[f64], opts: &CgOptions) -> Result<(Vec<f64>, SolveReport)> {
    let n = a.nrows();
    check_len("cg: matrix columns", n, a.ncols())?;
    check_len("cg: right-hand side", n, b.len())?;
    check_len("cg: initial guess", n, x0.len())?;
    if !(opts.tol > 0.0) {
        return Err(Error::invalid("cg tolerance must be positive"));
    }
    debug_assert!(a.symmetry_defect() < 1e-10, "cg_solve called with a nonsymmetric matrix");

    let inv_diag: Vec<f64> = match opts.preconditioner {
        Preconditioner::Jacobi => {
            let d = a.diagonal();
            if let Some(row) = d.iter().position(|&v| v == 0.0) {
                return Err(Error::ZeroDiagonal { row });
            }
            d.iter().map(|v| 1.0 / v).collect()
        }
        Preconditioner::None => vec![1.0; n],
    };
    let precondition = |r: &[f64]| -> Vec<f64> { r.iter().zip(&inv_diag).map(|(r, d)| r * d).collect() };

    let max_iter = opts.max_iter.unwrap_or(10 * n.max(1));
    let mut report = SolveReport::default();
    let mut x = x0.to_vec();
    let b_scale = norm(&precondition(b));
    if b_scale == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        report.converged = true;
        return Ok((x, report));
    }

    let ax = a.spmv(&x);
    let mut r: Vec<f64> = b.iter().zip(&ax).map(|(b, ax)| b - ax).collect();
    let mut z = precondition(&r);
    let mut rel = norm(&z) / b_scale;
    let mut rz = dot(&r, &z);
    if opts.record_history {
        report.residual_history.push(rel);
    }
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut it = 0;
    while rel > opts.tol && it < max_iter {
        a.spmv_into(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            // breakdown: A is not positive definite along p
            break;
        }
        let alpha = rz / pap;
        for k in 0..n {
            x[k] += alpha * p[k];
            r[k] -= alpha * ap[k];
        }
        z = precondition(&r);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for k in 0..n {
            p[k] = z[k] + beta * p[k];
        }
        rel = norm(&z) / b_scale;
        it += 1;
        if opts.record_history {
            report.residual_history.push(rel);
        }
    }
    report.iterations = it;
    report.final_residual_norm = rel;
    report.converged = rel <= opts.tol;
    Ok((x, report))
}

/// Like [`cg_solve`] but treats non-convergence as an error.
pub fn cg_solve_checked(a: &CsrMatrix, b: &[f64], x0: &[f64], opts: &CgOptions) -> Result<Vec<f64>> {
    let (x, report) = cg_solve(a, b, x0, opts)?;
    if !report.converged {
        return Err(Error::NotConverged {
            iterations: report.iterations,
            residual: report.final_residual_norm,
        });
    }
    Ok(x)
}
