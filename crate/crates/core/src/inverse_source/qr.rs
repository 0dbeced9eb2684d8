//! Carleman-weighted quasi-reversibility: least squares over nodal `(u, f)`
//! of the weighted PDE residual plus lateral and initial misfits.

use serde::Serialize;

use crate::error::{LabError, Result};
use crate::forward::{CauchyData, SourceSpec};
use crate::geometry::boundary::{check_geometric_condition, BoundaryMask};
use crate::geometry::field::SpaceTimeField;
use crate::geometry::weight::WeightField;
use crate::grid::{GridFunction, SpaceTimeGrid};
use crate::sparse::{pcgls, CsrMatrix, NormalCholesky};

#[derive(Clone, Debug)]
pub struct ReconstructionProblem {
    pub field: SpaceTimeField,
    pub src: SourceSpec,
    pub weight: WeightField,
    pub grid: SpaceTimeGrid,
    pub eps_star: f64,
    pub eps: f64,
    pub sigma: BoundaryMask,
    pub data: CauchyData,
    pub alpha_b: f64,
    pub alpha_0: f64,
    /// `None` picks `1e-8` times the PDE block's column scale.
    pub alpha_r: Option<f64>,
    pub s: f64,
    pub tol: f64,
    pub max_iter: usize,
    /// Precondition CG with a sparse Cholesky factor of the scaled normal
    /// matrix (plain column scaling otherwise).
    pub precondition: bool,
}

impl ReconstructionProblem {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps > self.eps_star) {
            return Err(LabError::Config(format!(
                "eps = {} must exceed eps* = {}",
                self.eps, self.eps_star
            )));
        }
        if !(self.src.m0 > 0.0) {
            return Err(LabError::ViolatesR0 {
                min: self.src.min_abs_r0(&self.grid.space),
                m0: self.src.m0,
            });
        }
        self.src.check_m0(&self.grid.space)?;
        let report = check_geometric_condition(&self.weight, self.eps_star, &self.sigma, &self.grid);
        if !report.holds {
            let reason = if !report.nonempty {
                "no boundary point has phi > eps*".to_string()
            } else {
                let v = &report.violations[0];
                format!(
                    "{} unobserved boundary point(s) with phi > eps*, e.g. x = {:?}, t = {}",
                    report.violations.len(),
                    v.point,
                    v.t
                )
            };
            return Err(LabError::GeometricConditionViolated { reason });
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct JDecomposition {
    pub pde: f64,
    pub boundary: f64,
    pub initial: f64,
    pub regularization: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct QrDiagnostics {
    pub iterations: usize,
    pub relative_residual: f64,
    pub converged: bool,
    pub preconditioned: bool,
    pub alpha_r: f64,
    /// Terms of the objective with the common factor `exp(-2 s max phi)`.
    pub j: JDecomposition,
    pub unknowns: usize,
    pub rows: usize,
}

#[derive(Clone, Debug)]
pub struct QrReconstruction {
    pub u: GridFunction,
    pub f: Vec<f64>,
    pub diagnostics: QrDiagnostics,
}

/// Second-order one-sided stencil reaching towards the upwind side
/// (`sign > 0`: indices `j, j-1, j-2`), switched to the other side where
/// the lattice ends.
fn upwind2(j: usize, n: usize, h: f64, sign: f64) -> [(usize, f64); 3] {
    let c = 1.0 / (2.0 * h);
    let back = |j: usize| [(j, 3.0 * c), (j - 1, -4.0 * c), (j - 2, c)];
    let fwd = |j: usize| [(j, -3.0 * c), (j + 1, 4.0 * c), (j + 2, -c)];
    if sign > 0.0 {
        if j >= 2 {
            back(j)
        } else {
            fwd(j)
        }
    } else if j + 2 < n {
        fwd(j)
    } else {
        back(j)
    }
}

/// Stencil of [`crate::grid::diff1`].
fn diff1_stencil(j: usize, n: usize, h: f64) -> Vec<(usize, f64)> {
    let c = 1.0 / (2.0 * h);
    if j == 0 {
        vec![(0, -3.0 * c), (1, 4.0 * c), (2, -c)]
    } else if j == n - 1 {
        vec![(n - 1, 3.0 * c), (n - 2, -4.0 * c), (n - 3, c)]
    } else {
        vec![(j + 1, c), (j - 1, -c)]
    }
}

struct Group {
    rows: std::ops::Range<usize>,
}

pub fn reconstruct_qr(problem: &ReconstructionProblem) -> Result<QrReconstruction> {
    problem.validate()?;
    let grid = &problem.grid;
    let d = &grid.space;
    let ns = d.len();
    let nt = grid.nt;
    let nu = ns * nt;
    let n = nu + ns;
    let [nx, ny] = d.nodes_per_axis();
    let h = d.spacing();
    let ht = grid.dt();
    let ws = d.quadrature_weights();
    let wt = grid.time_weights();
    let nodes = d.nodes();
    let w = &problem.weight;
    let phi_max = w.max_phi0();
    let s = problem.s;
    let carleman = |i: usize, t: f64| (s * (w.phi_node(i, t) - phi_max)).exp();

    let mut a = CsrMatrix::new(n);
    let mut b = Vec::new();
    let mut entries: Vec<(usize, f64)> = Vec::with_capacity(12);

    // weighted residual of A0 u_t + A . grad u + p u - R f
    let start = a.nrows();
    for k in 0..nt {
        let t = grid.time(k);
        for i in 0..ns {
            let x = nodes[i];
            let (ix, iy) = d.coords(i);
            entries.clear();
            let a0 = problem.field.a0(x, t);
            for (kk, c) in upwind2(k, nt, ht, 1.0) {
                entries.push((kk * ns + i, a0 * c));
            }
            let av = problem.field.a(x, t);
            if av[0] != 0.0 {
                for (jj, c) in upwind2(ix, nx, h[0], av[0]) {
                    entries.push((k * ns + d.index(jj, iy), av[0] * c));
                }
            }
            if d.dim() == 2 && av[1] != 0.0 {
                for (jj, c) in upwind2(iy, ny, h[1], av[1]) {
                    entries.push((k * ns + d.index(ix, jj), av[1] * c));
                }
            }
            entries.push((k * ns + i, (problem.src.p)(x, t)));
            entries.push((nu + i, -(problem.src.r)(x, t)));
            a.push_row(&entries, (ws[i] * wt[k]).sqrt() * carleman(i, t));
            b.push(0.0);
        }
    }
    let pde = Group { rows: start..a.nrows() };

    let alpha_r = match problem.alpha_r {
        Some(v) => v,
        None => {
            let norms = a.column_norms();
            let pde_scale = norms[..nu].iter().map(|v| v * v).sum::<f64>() / nu as f64;
            // mean squared column norm of the regularization rows at unit alpha
            let mut reg_scale = 0.0;
            for k in 0..nt {
                for i in 0..ns {
                    let mut sq = 0.0;
                    for hh in h.iter().take(d.dim()) {
                        sq += 2.0 * ws[i] * wt[k] / (hh * hh);
                    }
                    reg_scale += sq * carleman(i, grid.time(k)).powi(2);
                }
            }
            1e-8 * pde_scale / (reg_scale / nu as f64)
        }
    };

    // lateral misfits: u - g and d_t (u - g) on the observed part
    let start = a.nrows();
    let data = &problem.data;
    let nb = data.mask.nb();
    for k in 0..nt {
        let t = grid.time(k);
        for (bi, p) in problem.sigma.points.iter().enumerate() {
            if !problem.sigma.get(bi, k) {
                continue;
            }
            let scale = (problem.alpha_b * p.weight * wt[k]).sqrt() * carleman(p.node, t);
            a.push_row(&[(k * ns + p.node, 1.0)], scale);
            b.push(scale * data.g[k * nb + bi]);
            let st: Vec<(usize, f64)> = diff1_stencil(k, nt, ht)
                .into_iter()
                .map(|(kk, c)| (kk * ns + p.node, c))
                .collect();
            a.push_row(&st, scale);
            b.push(scale * data.dg_dt[k * nb + bi]);
        }
    }
    let boundary = Group { rows: start..a.nrows() };

    // initial slice and its gradient on Omega_eps*
    let start = a.nrows();
    let grad_u0 = d.gradient(&data.u0);
    for i in 0..ns {
        if !data.u0_mask[i] {
            continue;
        }
        let scale = (problem.alpha_0 * ws[i]).sqrt() * carleman(i, 0.0);
        a.push_row(&[(i, 1.0)], scale);
        b.push(scale * data.u0[i]);
        let (ix, iy) = d.coords(i);
        let st: Vec<(usize, f64)> = diff1_stencil(ix, nx, h[0])
            .into_iter()
            .map(|(j, c)| (d.index(j, iy), c))
            .collect();
        a.push_row(&st, scale);
        b.push(scale * grad_u0[i][0]);
        if d.dim() == 2 {
            let st: Vec<(usize, f64)> = diff1_stencil(iy, ny, h[1])
                .into_iter()
                .map(|(j, c)| (d.index(ix, j), c))
                .collect();
            a.push_row(&st, scale);
            b.push(scale * grad_u0[i][1]);
        }
    }
    let initial = Group { rows: start..a.nrows() };

    // regularization: weighted forward differences of u and weighted f
    let start = a.nrows();
    for k in 0..nt {
        let t = grid.time(k);
        for i in 0..ns {
            let (ix, iy) = d.coords(i);
            let scale = (alpha_r * ws[i] * wt[k]).sqrt() * carleman(i, t);
            if ix + 1 < nx {
                let j = d.index(ix + 1, iy);
                a.push_row(&[(k * ns + j, 1.0 / h[0]), (k * ns + i, -1.0 / h[0])], scale);
                b.push(0.0);
            }
            if d.dim() == 2 && iy + 1 < ny {
                let j = d.index(ix, iy + 1);
                a.push_row(&[(k * ns + j, 1.0 / h[1]), (k * ns + i, -1.0 / h[1])], scale);
                b.push(0.0);
            }
        }
    }
    for i in 0..ns {
        let scale = (alpha_r * ws[i]).sqrt() * carleman(i, 0.0);
        a.push_row(&[(nu + i, 1.0)], scale);
        b.push(0.0);
    }
    let reg = Group { rows: start..a.nrows() };

    let norms = a.column_norms();
    let dscale: Vec<f64> = norms.iter().map(|v| if *v > 0.0 { 1.0 / v } else { 1.0 }).collect();
    let mut scaled = a.clone();
    scaled.scale_columns(&dscale);
    let chol = if problem.precondition {
        // columns have unit norm after scaling; a tiny shift rescues
        // factorizations that lose definiteness to rounding
        NormalCholesky::new(&scaled, 0.0).or_else(|| NormalCholesky::new(&scaled, 1e-12))
    } else {
        None
    };
    let sol = pcgls(&scaled, &b, problem.tol, problem.max_iter, chol.as_ref());
    let x: Vec<f64> = sol.x.iter().zip(&dscale).map(|(y, c)| y * c).collect();

    let ax = a.mul(&x);
    let part = |g: &Group| -> f64 { g.rows.clone().map(|r| (ax[r] - b[r]).powi(2)).sum() };
    let j = JDecomposition {
        pde: part(&pde),
        boundary: part(&boundary),
        initial: part(&initial),
        regularization: part(&reg),
    };
    let diagnostics = QrDiagnostics {
        iterations: sol.iterations,
        relative_residual: sol.relative_residual,
        converged: sol.converged,
        preconditioned: chol.is_some(),
        alpha_r,
        j,
        unknowns: n,
        rows: a.nrows(),
    };
    Ok(QrReconstruction {
        u: GridFunction::from_values(grid, x[..nu].to_vec())?,
        f: x[nu..].to_vec(),
        diagnostics,
    })
}
