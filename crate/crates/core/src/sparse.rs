//! Compressed sparse rows and (preconditioned) CGLS for least-squares
//! problems.

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::Llt;
use faer::sparse::{SparseColMat, Triplet};
use faer::Side;

use crate::par;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct CsrMatrix {
    pub ncols: usize,
    pub row_ptr: Vec<usize>,
    pub cols: Vec<usize>,
    pub vals: Vec<f64>,
}

impl CsrMatrix {
    pub fn new(ncols: usize) -> Self {
        Self {
            ncols,
            row_ptr: vec![0],
            cols: Vec::new(),
            vals: Vec::new(),
        }
    }

    pub fn nrows(&self) -> usize {
        self.row_ptr.len() - 1
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// Appends a row scaled by `scale`; zero entries are dropped.
    pub fn push_row(&mut self, entries: &[(usize, f64)], scale: f64) {
        for &(c, v) in entries {
            debug_assert!(c < self.ncols);
            let v = v * scale;
            if v != 0.0 {
                self.cols.push(c);
                self.vals.push(v);
            }
        }
        self.row_ptr.push(self.cols.len());
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (a, b) = (self.row_ptr[r], self.row_ptr[r + 1]);
        self.cols[a..b].iter().cloned().zip(self.vals[a..b].iter().cloned())
    }

    pub fn mul(&self, x: &[f64]) -> Vec<f64> {
        par::map_range(self.nrows(), |r| self.row(r).map(|(c, v)| v * x[c]).sum())
    }

    pub fn transpose(&self) -> CsrMatrix {
        let mut count = vec![0usize; self.ncols + 1];
        for &c in &self.cols {
            count[c + 1] += 1;
        }
        for c in 0..self.ncols {
            count[c + 1] += count[c];
        }
        let row_ptr = count.clone();
        let mut next = count;
        let mut cols = vec![0; self.nnz()];
        let mut vals = vec![0.0; self.nnz()];
        for r in 0..self.nrows() {
            for (c, v) in self.row(r) {
                let slot = next[c];
                cols[slot] = r;
                vals[slot] = v;
                next[c] += 1;
            }
        }
        CsrMatrix {
            ncols: self.nrows(),
            row_ptr,
            cols,
            vals,
        }
    }

    pub fn column_norms(&self) -> Vec<f64> {
        let mut n = vec![0.0; self.ncols];
        for (c, v) in self.cols.iter().zip(&self.vals) {
            n[*c] += v * v;
        }
        n.iter_mut().for_each(|v| *v = v.sqrt());
        n
    }

    pub fn scale_columns(&mut self, d: &[f64]) {
        for (c, v) in self.cols.iter().zip(self.vals.iter_mut()) {
            *v *= d[*c];
        }
    }
}

/// Sparse Cholesky factor of `A^T A`, used as a preconditioner.
pub struct NormalCholesky {
    llt: Llt<usize, f64>,
}

impl NormalCholesky {
    /// Factors `A^T A + shift I`; `None` if the factorization breaks down.
    pub fn new(a: &CsrMatrix, shift: f64) -> Option<Self> {
        let n = a.ncols;
        let at = a.transpose();
        let mut acc = vec![0.0; n];
        let mut seen = vec![false; n];
        let mut touched: Vec<usize> = Vec::new();
        let mut triplets = Vec::new();
        for c in 0..n {
            for (r, v) in at.row(c) {
                for (c2, v2) in a.row(r) {
                    if c2 >= c {
                        if !seen[c2] {
                            seen[c2] = true;
                            touched.push(c2);
                        }
                        acc[c2] += v * v2;
                    }
                }
            }
            touched.sort_unstable();
            for &c2 in &touched {
                let mut v = acc[c2];
                if c2 == c {
                    v += shift;
                }
                triplets.push(Triplet::new(c2, c, v));
                acc[c2] = 0.0;
                seen[c2] = false;
            }
            touched.clear();
        }
        let m = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &triplets).ok()?;
        let llt = m.sp_cholesky(Side::Lower).ok()?;
        Some(Self { llt })
    }

    pub fn apply(&self, v: &mut [f64]) {
        let mut m = faer::Mat::<f64>::from_fn(v.len(), 1, |i, _| v[i]);
        self.llt.solve_in_place(m.as_mut());
        for (i, x) in v.iter_mut().enumerate() {
            *x = m[(i, 0)];
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Clone, Debug)]
pub struct CglsResult {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// `||A^T (b - A x)|| / ||A^T b||` at the returned iterate.
    pub relative_residual: f64,
    pub converged: bool,
}

/// Conjugate gradients on `A^T A x = A^T b`, started from zero. Returns the
/// iterate with the smallest normal-equation residual seen.
pub fn cgls(a: &CsrMatrix, b: &[f64], tol: f64, max_iter: usize) -> CglsResult {
    pcgls(a, b, tol, max_iter, None)
}

/// [`cgls`] with an optional preconditioner `M ~ A^T A`.
pub fn pcgls(
    a: &CsrMatrix,
    b: &[f64],
    tol: f64,
    max_iter: usize,
    precond: Option<&NormalCholesky>,
) -> CglsResult {
    let apply = |v: &[f64]| -> Vec<f64> {
        let mut z = v.to_vec();
        if let Some(m) = precond {
            m.apply(&mut z);
        }
        z
    };
    let at = a.transpose();
    let n = a.ncols;
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut s = at.mul(&r);
    let norm0 = dot(&s, &s).sqrt();
    if norm0 == 0.0 {
        return CglsResult {
            x,
            iterations: 0,
            relative_residual: 0.0,
            converged: true,
        };
    }
    let mut z = apply(&s);
    let mut p = z.clone();
    let mut gamma = dot(&s, &z);
    let mut best = (1.0, x.clone(), 0);
    for it in 1..=max_iter {
        let q = a.mul(&p);
        let qq = dot(&q, &q);
        if qq == 0.0 {
            break;
        }
        let alpha = gamma / qq;
        x.iter_mut().zip(&p).for_each(|(xi, pi)| *xi += alpha * pi);
        r.iter_mut().zip(&q).for_each(|(ri, qi)| *ri -= alpha * qi);
        s = at.mul(&r);
        let rel = dot(&s, &s).sqrt() / norm0;
        if rel < best.0 {
            best = (rel, x.clone(), it);
            if rel <= tol {
                return CglsResult {
                    x,
                    iterations: it,
                    relative_residual: rel,
                    converged: true,
                };
            }
        }
        z = apply(&s);
        let gamma_new = dot(&s, &z);
        let beta = gamma_new / gamma;
        gamma = gamma_new;
        p.iter_mut().zip(&z).for_each(|(pi, zi)| *pi = zi + beta * *pi);
    }
    CglsResult {
        x: best.1,
        iterations: max_iter,
        relative_residual: best.0,
        converged: false,
    }
}
