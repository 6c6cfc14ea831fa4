//! Compressed sparse row matrices and a direct solver backed by faer's
//! sparse LU.

use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, Triplet};
use faer::Mat;

use crate::error::{Error, Result};

/// Square sparse matrix in CSR layout with sorted, duplicate-free columns.
#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl CsrMatrix {
    /// Builds a matrix from per-row `(column, value)` lists. Entries with the
    /// same column are summed.
    pub fn from_rows(n: usize, rows: Vec<Vec<(usize, f64)>>) -> Result<Self> {
        if rows.len() != n {
            return Err(Error::InvalidArgument(format!("expected {n} rows, got {}", rows.len())));
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        row_ptr.push(0);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        for mut row in rows {
            row.sort_unstable_by_key(|&(c, _)| c);
            let start = cols.len();
            for (c, v) in row {
                if c >= n {
                    return Err(Error::InvalidArgument(format!("column {c} out of range")));
                }
                if cols.len() > start && *cols.last().unwrap() == c {
                    *vals.last_mut().unwrap() += v;
                } else {
                    cols.push(c);
                    vals.push(v);
                }
            }
            row_ptr.push(cols.len());
        }
        Ok(CsrMatrix { n, row_ptr, cols, vals })
    }

    pub fn identity(n: usize) -> Self {
        CsrMatrix {
            n,
            row_ptr: (0..=n).collect(),
            cols: (0..n).collect(),
            vals: vec![1.0; n],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// Columns and values of row `i`.
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.cols[r.clone()], &self.vals[r])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        cols.binary_search(&j).map_or(0.0, |k| vals[k])
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n);
        (0..self.n)
            .map(|i| {
                let (cols, vals) = self.row(i);
                cols.iter().zip(vals).map(|(&c, &v)| v * x[c]).sum()
            })
            .collect()
    }

    /// `A x - rhs`.
    pub fn residual(&self, x: &[f64], rhs: &[f64]) -> Vec<f64> {
        let mut r = self.mul_vec(x);
        for (ri, bi) in r.iter_mut().zip(rhs) {
            *ri -= bi;
        }
        r
    }

    /// Checks the Z-matrix sign pattern with a positive diagonal.
    pub fn has_m_matrix_signs(&self) -> bool {
        (0..self.n).all(|i| {
            let (cols, vals) = self.row(i);
            cols.iter().zip(vals).all(|(&c, &v)| if c == i { v > 0.0 } else { v <= 0.0 })
                && cols.binary_search(&i).is_ok()
        })
    }

    fn to_faer(&self) -> Result<SparseColMat<usize, f64>> {
        let triplets: Vec<_> = (0..self.n)
            .flat_map(|i| {
                let (cols, vals) = self.row(i);
                cols.iter().zip(vals).map(move |(&c, &v)| Triplet::new(i, c, v))
            })
            .collect();
        SparseColMat::try_new_from_triplets(self.n, self.n, &triplets)
            .map_err(|e| Error::LinearSolver(format!("{e:?}")))
    }
}

/// Maximum number of iterative refinement sweeps after the direct solve.
const REFINEMENT_STEPS: usize = 3;

/// LU factorization of a [`CsrMatrix`].
pub struct SparseLu<'a> {
    matrix: &'a CsrMatrix,
    lu: faer::sparse::linalg::solvers::Lu<usize, f64>,
}

impl<'a> SparseLu<'a> {
    pub fn new(matrix: &'a CsrMatrix) -> Result<Self> {
        let lu = matrix
            .to_faer()?
            .sp_lu()
            .map_err(|e| Error::LinearSolver(format!("LU factorization failed: {e:?}")))?;
        Ok(SparseLu { matrix, lu })
    }

    fn apply(&self, rhs: &[f64]) -> Vec<f64> {
        let mut b = Mat::from_fn(rhs.len(), 1, |i, _| rhs[i]);
        self.lu.solve_in_place(b.as_mut());
        (0..rhs.len()).map(|i| b[(i, 0)]).collect()
    }

    /// Solves `A x = rhs`, refining until the row-scaled residual
    /// `max_i |(A x - rhs)_i| / |A_ii|` is at most `tol`. Returns the solution
    /// and the achieved scaled residual.
    pub fn solve(&self, rhs: &[f64], tol: f64) -> Result<(Vec<f64>, f64)> {
        let diag = self.matrix.diagonal();
        let scaled = |r: &[f64]| {
            r.iter()
                .zip(&diag)
                .map(|(ri, d)| ri.abs() / d.abs().max(f64::MIN_POSITIVE))
                .fold(0.0, f64::max)
        };
        let mut x = self.apply(rhs);
        let mut r = self.matrix.residual(&x, rhs);
        let mut res = scaled(&r);
        for _ in 0..REFINEMENT_STEPS {
            if res <= tol {
                break;
            }
            let dx = self.apply(&r);
            let trial: Vec<f64> = x.iter().zip(&dx).map(|(xi, di)| xi - di).collect();
            let tr = self.matrix.residual(&trial, rhs);
            let tres = scaled(&tr);
            if tres >= res {
                break;
            }
            x = trial;
            r = tr;
            res = tres;
        }
        if !res.is_finite() || x.iter().any(|v| !v.is_finite()) {
            return Err(Error::LinearSolver("non-finite solution".into()));
        }
        Ok((x, res))
    }
}

/// One-shot convenience wrapper around [`SparseLu`].
pub fn solve(matrix: &CsrMatrix, rhs: &[f64], tol: f64) -> Result<(Vec<f64>, f64)> {
    SparseLu::new(matrix)?.solve(rhs, tol)
}

/// Incomplete LU factorization with the sparsity pattern of the matrix.
///
/// Pivots stay positive for M-matrices, which is the only use here.
pub struct Ilu0 {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
    diag_pos: Vec<usize>,
}

impl Ilu0 {
    pub fn new(a: &CsrMatrix) -> Result<Self> {
        let n = a.n;
        let mut vals = a.vals.clone();
        let mut diag_pos = vec![usize::MAX; n];
        for i in 0..n {
            let (cols, _) = a.row(i);
            match cols.binary_search(&i) {
                Ok(k) => diag_pos[i] = a.row_ptr[i] + k,
                Err(_) => return Err(Error::LinearSolver(format!("row {i} has no diagonal entry"))),
            }
        }
        let mut pos = vec![usize::MAX; n];
        for i in 0..n {
            let (start, end) = (a.row_ptr[i], a.row_ptr[i + 1]);
            for p in start..end {
                pos[a.cols[p]] = p;
            }
            for p in start..end {
                let k = a.cols[p];
                if k >= i {
                    break;
                }
                let pivot = vals[diag_pos[k]];
                let lik = vals[p] / pivot;
                vals[p] = lik;
                for q in diag_pos[k] + 1..a.row_ptr[k + 1] {
                    let j = a.cols[q];
                    if pos[j] != usize::MAX {
                        vals[pos[j]] -= lik * vals[q];
                    }
                }
            }
            for p in start..end {
                pos[a.cols[p]] = usize::MAX;
            }
            let d = vals[diag_pos[i]];
            if !(d.abs() > 0.0) || !d.is_finite() {
                return Err(Error::LinearSolver(format!("zero pivot in row {i}")));
            }
        }
        Ok(Ilu0 {
            n,
            row_ptr: a.row_ptr.clone(),
            cols: a.cols.clone(),
            vals,
            diag_pos,
        })
    }

    /// Overwrites `x` with `(LU)⁻¹ x`.
    pub fn apply(&self, x: &mut [f64]) {
        for i in 0..self.n {
            let mut s = x[i];
            for p in self.row_ptr[i]..self.diag_pos[i] {
                s -= self.vals[p] * x[self.cols[p]];
            }
            x[i] = s;
        }
        for i in (0..self.n).rev() {
            let mut s = x[i];
            for p in self.diag_pos[i] + 1..self.row_ptr[i + 1] {
                s -= self.vals[p] * x[self.cols[p]];
            }
            x[i] = s / self.vals[self.diag_pos[i]];
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, x| x.abs().max(m))
}

/// Outcome of an iterative solve.
#[derive(Clone, Debug)]
pub struct KrylovOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// `‖b - A x‖_∞` of the returned iterate.
    pub residual: f64,
    pub converged: bool,
}

/// Restarted GMRES with right preconditioning. Stops once the true residual
/// satisfies `‖b - A x‖_∞ ≤ tol`.
pub fn gmres(
    a: &CsrMatrix,
    b: &[f64],
    x0: Vec<f64>,
    precond: &Ilu0,
    tol: f64,
    restart: usize,
    max_iter: usize,
) -> KrylovOutcome {
    let n = a.n;
    let mut x = x0;
    let mut iterations = 0;
    let mut r: Vec<f64> = a.residual(&x, b).iter().map(|v| -v).collect();
    let mut res = norm_inf(&r);
    while res > tol && iterations < max_iter {
        let beta = dot(&r, &r).sqrt();
        let mut basis: Vec<Vec<f64>> = vec![r.iter().map(|v| v / beta).collect()];
        let mut h: Vec<Vec<f64>> = Vec::new();
        let (mut cs, mut sn): (Vec<f64>, Vec<f64>) = (Vec::new(), Vec::new());
        let mut gvec = vec![beta];
        for j in 0..restart {
            let mut z = basis[j].clone();
            precond.apply(&mut z);
            let mut w = a.mul_vec(&z);
            let mut col = Vec::with_capacity(j + 2);
            // modified Gram-Schmidt
            for v in &basis {
                let hij = dot(&w, v);
                for (wk, vk) in w.iter_mut().zip(v) {
                    *wk -= hij * vk;
                }
                col.push(hij);
            }
            let hnext = dot(&w, &w).sqrt();
            col.push(hnext);
            for k in 0..j {
                let t = cs[k] * col[k] + sn[k] * col[k + 1];
                col[k + 1] = -sn[k] * col[k] + cs[k] * col[k + 1];
                col[k] = t;
            }
            let rho = col[j].hypot(col[j + 1]);
            let (c, s) = if rho == 0.0 { (1.0, 0.0) } else { (col[j] / rho, col[j + 1] / rho) };
            col[j] = rho;
            col[j + 1] = 0.0;
            cs.push(c);
            sn.push(s);
            gvec.push(-s * gvec[j]);
            gvec[j] *= c;
            h.push(col);
            iterations += 1;
            let estimate = gvec[j + 1].abs();
            if hnext == 0.0 || estimate <= 0.1 * tol || iterations >= max_iter {
                break;
            }
            basis.push(w.iter().map(|v| v / hnext).collect());
        }
        // back substitution for the least-squares coefficients
        let m = h.len();
        let mut y = vec![0.0; m];
        for i in (0..m).rev() {
            let mut s = gvec[i];
            for k in i + 1..m {
                s -= h[k][i] * y[k];
            }
            y[i] = s / h[i][i];
        }
        let mut update = vec![0.0; n];
        for (yk, v) in y.iter().zip(&basis) {
            for (u, vk) in update.iter_mut().zip(v) {
                *u += yk * vk;
            }
        }
        precond.apply(&mut update);
        for (xi, ui) in x.iter_mut().zip(&update) {
            *xi += ui;
        }
        r = a.residual(&x, b).iter().map(|v| -v).collect();
        let new_res = norm_inf(&r);
        if !(new_res < res) && new_res > tol {
            res = new_res;
            break;
        }
        res = new_res;
    }
    KrylovOutcome {
        converged: res <= tol && x.iter().all(|v| v.is_finite()),
        x,
        iterations,
        residual: res,
    }
}

/// Dimension from which [`solve_scaled`] prefers GMRES over the direct
/// factorization.
pub const ITERATIVE_MIN_DIM: usize = 2000;

const GMRES_RESTART: usize = 60;
const GMRES_MAX_ITER: usize = 3000;

/// Solves `A x = rhs` to `max_i |(A x - rhs)_i| / |A_ii| ≤ tol`.
///
/// Large systems are row-scaled and handed to ILU(0)-preconditioned GMRES
/// starting from `guess`; the sparse LU is the fallback and the method for
/// small systems. Returns the solution and the achieved scaled residual.
pub fn solve_scaled(a: &CsrMatrix, rhs: &[f64], guess: Option<&[f64]>, tol: f64) -> Result<(Vec<f64>, f64)> {
    if a.n >= ITERATIVE_MIN_DIM {
        let diag = a.diagonal();
        if diag.iter().all(|&d| d > 0.0) {
            let mut scaled = a.clone();
            for i in 0..a.n {
                for p in scaled.row_ptr[i]..scaled.row_ptr[i + 1] {
                    scaled.vals[p] /= diag[i];
                }
            }
            let b: Vec<f64> = rhs.iter().zip(&diag).map(|(r, d)| r / d).collect();
            if let Ok(ilu) = Ilu0::new(&scaled) {
                let x0 = guess.map_or_else(|| vec![0.0; a.n], <[f64]>::to_vec);
                let out = gmres(&scaled, &b, x0, &ilu, tol, GMRES_RESTART, GMRES_MAX_ITER);
                if out.converged {
                    return Ok((out.x, out.residual));
                }
            }
        }
    }
    SparseLu::new(a)?.solve(rhs, tol)
}
