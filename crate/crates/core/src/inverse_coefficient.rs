//! Recovering the time-independent principal coefficients `(A0, A)` near
//! the observed boundary: membership in the admissible set, the `d+1`
//! solution ensemble, the determinant condition and the stability sweep.

use std::sync::Arc;

use serde::Serialize;

use crate::error::{LabError, Result};
use crate::forward::{extract_trace, solve_characteristics, CauchyData, Inflow, Profile, SourceSpec, SpatialFn};
use crate::geometry::boundary::{check_geometric_condition, BoundaryMask};
use crate::geometry::curve::TraceSettings;
use crate::geometry::field::{ScalarFn, SpaceTimeField};
use crate::geometry::weight::{check_dissipative, compute_phi0, make_weight, WeightField};
use crate::grid::{dot, l2_masked, norm, GridFunction, Point, SpaceTimeGrid, SpatialDomain};
use crate::inverse_source::stability::{balance_s, fit_samples, StabilityFit, StabilityMode, StabilitySample};
use crate::par;

pub type SpatialVecFn = Arc<dyn Fn(Point) -> Point + Send + Sync>;

const FD1: f64 = 1e-5;
const FD2: f64 = 1e-3;

/// Time-independent `(A0, A)` with declared `M`, `rho` and observed part
/// `Gamma` of the boundary (flags over `domain.boundary_mesh()`).
#[derive(Clone)]
pub struct CoefficientPair {
    pub domain: SpatialDomain,
    pub a0: SpatialFn,
    pub a: SpatialVecFn,
    pub m_bound: f64,
    pub rho: f64,
    pub gamma: Vec<bool>,
}

impl std::fmt::Debug for CoefficientPair {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CoefficientPair")
            .field("m_bound", &self.m_bound)
            .field("rho", &self.rho)
            .finish_non_exhaustive()
    }
}

/// A direction `(d A0, d A)` for perturbing a pair.
#[derive(Clone)]
pub struct Direction {
    pub a0: SpatialFn,
    pub a: SpatialVecFn,
}

impl CoefficientPair {
    pub fn new(
        domain: SpatialDomain,
        a0: impl Fn(Point) -> f64 + Send + Sync + 'static,
        a: impl Fn(Point) -> Point + Send + Sync + 'static,
        m_bound: f64,
        rho: f64,
        gamma: impl Fn(Point, Point) -> bool,
    ) -> Self {
        let gamma = domain
            .boundary_mesh()
            .iter()
            .map(|b| gamma(b.position, b.normal))
            .collect();
        Self {
            domain,
            a0: Arc::new(a0),
            a: Arc::new(a),
            m_bound,
            rho,
            gamma,
        }
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn field(&self, t_final: f64) -> SpaceTimeField {
        let (a0, a) = (self.a0.clone(), self.a.clone());
        SpaceTimeField::new(self.dim(), move |x, _| a0(x), move |x, _| a(x), self.rho, self.m_bound, t_final)
            .time_independent()
    }

    /// `(A0 + delta dA0, A + delta dA)`, same constants and `Gamma`.
    pub fn perturbed(&self, delta: f64, dir: &Direction) -> Self {
        let (a0, a, d0, da) = (self.a0.clone(), self.a.clone(), dir.a0.clone(), dir.a.clone());
        Self {
            a0: Arc::new(move |x| a0(x) + delta * d0(x)),
            a: Arc::new(move |x| {
                let (v, w) = (a(x), da(x));
                [v[0] + delta * w[0], v[1] + delta * w[1]]
            }),
            ..self.clone()
        }
    }

    /// `Gamma x (0, T)` on every level of `grid`.
    pub fn gamma_mask(&self, grid: &SpaceTimeGrid) -> BoundaryMask {
        let points = grid.space.boundary_mesh();
        let mask = (0..grid.nt).flat_map(|_| self.gamma.iter().cloned()).collect();
        BoundaryMask {
            points,
            nt: grid.nt,
            mask,
        }
    }

    fn a_vec(&self, x: Point) -> Point {
        let v = (self.a)(x);
        if self.dim() == 1 {
            [v[0], 0.0]
        } else {
            v
        }
    }

    /// `||A0||_{C^1} + ||A||_{C^2}` as sums over multi-indices of lattice
    /// sups, derivatives by central differences of the evaluators.
    pub fn norm_estimate(&self) -> f64 {
        let dim = self.dim();
        let unit = |i: usize, h: f64| if i == 0 { [h, 0.0] } else { [0.0, h] };
        let add = |x: Point, v: Point| [x[0] + v[0], x[1] + v[1]];
        let sub = |x: Point, v: Point| [x[0] - v[0], x[1] - v[1]];
        let vdiff = |p: Point, m: Point, s: f64| [(p[0] - m[0]) / s, (p[1] - m[1]) / s];
        let mut sups = vec![0.0_f64; 2 + 2 * dim + dim * dim];
        for x in self.domain.nodes() {
            let mut slot = 0;
            let mut put = |v: f64| {
                sups[slot] = sups[slot].max(v.abs());
                slot += 1;
            };
            put((self.a0)(x));
            put(norm(self.a_vec(x)));
            for i in 0..dim {
                let e = unit(i, FD1);
                put(((self.a0)(add(x, e)) - (self.a0)(sub(x, e))) / (2.0 * FD1));
                put(norm(vdiff(self.a_vec(add(x, e)), self.a_vec(sub(x, e)), 2.0 * FD1)));
            }
            for i in 0..dim {
                for j in 0..dim {
                    let (ei, ej) = (unit(i, FD2), unit(j, FD2));
                    let v = |dx: Point| self.a_vec(add(x, dx));
                    let pp = v(add(ei, ej));
                    let pm = v(sub(ei, ej));
                    let mp = v(sub(ej, ei));
                    let mm = v([-ei[0] - ej[0], -ei[1] - ej[1]]);
                    let c = 4.0 * FD2 * FD2;
                    put(norm([
                        (pp[0] - pm[0] - mp[0] + mm[0]) / c,
                        (pp[1] - pm[1] - mp[1] + mm[1]) / c,
                    ]));
                }
            }
        }
        sups.iter().sum()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Clause {
    pub name: &'static str,
    pub holds: bool,
    pub value: f64,
    pub bound: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct MembershipReport {
    pub member: bool,
    pub clauses: Vec<Clause>,
}

impl MembershipReport {
    pub fn failed(&self) -> Vec<&'static str> {
        self.clauses.iter().filter(|c| !c.holds).map(|c| c.name).collect()
    }
}

/// Evaluates every clause of the admissible set separately.
pub fn check_membership(pair: &CoefficientPair) -> MembershipReport {
    let nodes = pair.domain.nodes();
    let norm_est = pair.norm_estimate();
    let min_a0 = nodes.iter().map(|&x| (pair.a0)(x)).fold(f64::INFINITY, f64::min);
    let min_a = nodes.iter().map(|&x| norm(pair.a_vec(x))).fold(f64::INFINITY, f64::min);
    let field = pair.field(1.0);
    let settings = TraceSettings::for_field(&field, &pair.domain);
    let failures = match check_dissipative(&field, &pair.domain, &settings) {
        Ok(r) => r.failures.len() as f64,
        Err(_) => f64::INFINITY,
    };
    let min_flux = pair
        .domain
        .boundary_mesh()
        .iter()
        .zip(&pair.gamma)
        .filter(|(_, g)| **g)
        .map(|(b, _)| dot(pair.a_vec(b.position), b.normal))
        .fold(f64::INFINITY, f64::min);
    let clauses = vec![
        Clause {
            name: "norm <= M",
            holds: norm_est <= pair.m_bound + 1e-8,
            value: norm_est,
            bound: pair.m_bound,
        },
        Clause {
            name: "min A0 >= rho",
            holds: min_a0 >= pair.rho - 1e-12,
            value: min_a0,
            bound: pair.rho,
        },
        Clause {
            name: "min |A| >= rho",
            holds: min_a >= pair.rho - 1e-12,
            value: min_a,
            bound: pair.rho,
        },
        Clause {
            name: "dissipative",
            holds: failures == 0.0,
            value: failures,
            bound: 0.0,
        },
        Clause {
            name: "Gamma in Gamma+",
            holds: min_flux > 0.0,
            value: min_flux,
            bound: 0.0,
        },
    ];
    MembershipReport {
        member: clauses.iter().all(|c| c.holds),
        clauses,
    }
}

/// `d + 1` solutions of one pair's homogeneous problem and their data.
#[derive(Clone, Debug)]
pub struct SolutionEnsemble {
    pub dim: usize,
    pub solutions: Vec<GridFunction>,
    pub data: Vec<CauchyData>,
}

impl SolutionEnsemble {
    pub fn new(dim: usize, solutions: Vec<GridFunction>, data: Vec<CauchyData>) -> Result<Self> {
        if solutions.len() != dim + 1 {
            return Err(LabError::EnsembleSizeMismatch {
                got: solutions.len(),
                expected: dim + 1,
            });
        }
        Ok(Self { dim, solutions, data })
    }

    /// Solves `P u + p u = 0` from the initial slices `1, x^1, ..., x^d`
    /// with continued inflow; data on `Gamma x (0,T)` and `Omega_{eps*}`.
    pub fn manufacture(
        pair: &CoefficientPair,
        p: &ScalarFn,
        grid: &SpaceTimeGrid,
        u0_mask: &[bool],
    ) -> Result<Self> {
        let dim = pair.dim();
        let field = pair.field(grid.t_final);
        let pp = p.clone();
        let src = SourceSpec::new(move |x, t| pp(x, t), |_, _| 1.0, Profile::zero(), 1.0);
        let gamma = pair.gamma_mask(grid);
        let slices: Vec<Profile> = (0..=dim)
            .map(|m| {
                if m == 0 {
                    Profile::function(|_| 1.0)
                } else {
                    Profile::function(move |x| x[m - 1])
                }
            })
            .collect();
        let solutions = par::map(&slices, |init| {
            solve_characteristics(&field, &src, init, &Inflow::Extended, grid, 1)
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
        let data = solutions
            .iter()
            .map(|u| extract_trace(u, &gamma, u0_mask))
            .collect::<Result<Vec<_>>>()?;
        Self::new(dim, solutions, data)
    }

    /// `max|u| + max|d_t u| + max|grad u|` over the lattice, per member.
    pub fn sup_bounds(&self) -> Vec<f64> {
        self.solutions
            .iter()
            .map(|u| {
                let dt = u.d_dt();
                let g = u.gradient();
                u.max_abs()
                    + dt.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
                    + g.iter().fold(0.0_f64, |m, v| m.max(norm(*v)))
            })
            .collect()
    }

    /// Largest lattice value of `|A0 d_t u + A . grad u + p u|` per member.
    pub fn residuals(&self, field: &SpaceTimeField, p: &ScalarFn) -> Vec<f64> {
        self.solutions
            .iter()
            .map(|u| operator_residual(u, field, p, |_| 0.0))
            .collect()
    }
}

/// Largest lattice value of `|A0 d_t u + A . grad u + p u - rhs(idx)|`.
fn operator_residual(u: &GridFunction, field: &SpaceTimeField, p: &ScalarFn, rhs: impl Fn(usize) -> f64) -> f64 {
    let grid = &u.grid;
    let ns = grid.space.len();
    let nodes = grid.space.nodes();
    let dt = u.d_dt();
    let g = u.gradient();
    (0..grid.len())
        .map(|idx| {
            let (x, t) = (nodes[idx % ns], grid.time(idx / ns));
            (field.a0(x, t) * dt[idx] + dot(field.a(x, t), g[idx]) + p(x, t) * u.values[idx] - rhs(idx)).abs()
        })
        .fold(0.0, f64::max)
}

/// Rows `R_m = (-d_t u_m, -grad u_m)` at every lattice node.
#[derive(Clone, Debug)]
pub struct RMatrix {
    pub dim: usize,
    /// `rows[m][idx]`, `d + 1` entries each.
    pub rows: Vec<Vec<Vec<f64>>>,
}

impl RMatrix {
    /// `R_m(idx) . F(node)`.
    pub fn apply(&self, m: usize, idx: usize, f: &[f64]) -> f64 {
        self.rows[m][idx].iter().zip(f).map(|(a, b)| a * b).sum()
    }
}

pub fn build_r_matrix(ensemble: &SolutionEnsemble) -> Result<RMatrix> {
    let d = ensemble.dim;
    if ensemble.solutions.len() != d + 1 {
        return Err(LabError::EnsembleSizeMismatch {
            got: ensemble.solutions.len(),
            expected: d + 1,
        });
    }
    let rows = ensemble
        .solutions
        .iter()
        .map(|u| {
            let dt = u.d_dt();
            let g = u.gradient();
            (0..u.values.len())
                .map(|idx| {
                    let mut r = vec![-dt[idx]];
                    r.extend((0..d).map(|j| -g[idx][j]));
                    r
                })
                .collect()
        })
        .collect();
    Ok(RMatrix { dim: d, rows })
}

/// `F = (A0_1 - A0_2, A_1 - A_2)` at the lattice nodes.
#[derive(Clone, Debug, PartialEq)]
pub struct CoefficientDifference {
    pub dim: usize,
    /// `values[i]` has `d + 1` entries.
    pub values: Vec<Vec<f64>>,
}

impl CoefficientDifference {
    pub fn new(pair1: &CoefficientPair, pair2: &CoefficientPair) -> Self {
        let d = pair1.dim();
        let values = pair1
            .domain
            .nodes()
            .into_iter()
            .map(|x| {
                let (a1, a2) = (pair1.a_vec(x), pair2.a_vec(x));
                let mut v = vec![(pair1.a0)(x) - (pair2.a0)(x)];
                v.extend((0..d).map(|j| a1[j] - a2[j]));
                v
            })
            .collect();
        Self { dim: d, values }
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|v| v.iter().all(|c| *c == 0.0))
    }

    /// `sum_mu ||F^mu||_{L^2}` over the masked part of the lattice.
    pub fn norm(&self, domain: &SpatialDomain, mask: Option<&[bool]>) -> f64 {
        (0..=self.dim)
            .map(|mu| {
                let c: Vec<f64> = self.values.iter().map(|v| v[mu]).collect();
                l2_masked(domain, &c, mask)
            })
            .sum()
    }
}

/// Largest lattice value of `|P_1 v + p v - R F|` for `v = u_1 - u_2`.
pub fn difference_residual(
    v: &GridFunction,
    field1: &SpaceTimeField,
    p: &ScalarFn,
    r: &RMatrix,
    m: usize,
    f: &CoefficientDifference,
) -> f64 {
    let ns = v.grid.space.len();
    operator_residual(v, field1, p, |idx| r.apply(m, idx, &f.values[idx % ns]))
}

fn det(mut a: Vec<Vec<f64>>) -> f64 {
    let n = a.len();
    let mut d = 1.0;
    for c in 0..n {
        let piv = (c..n)
            .max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs()))
            .unwrap_or(c);
        if a[piv][c] == 0.0 {
            return 0.0;
        }
        if piv != c {
            a.swap(piv, c);
            d = -d;
        }
        d *= a[c][c];
        for r in c + 1..n {
            let f = a[r][c] / a[c][c];
            for k in c..n {
                a[r][k] -= f * a[c][k];
            }
        }
    }
    d
}

#[derive(Clone, Debug, Serialize)]
pub struct DeterminantReport {
    pub holds: bool,
    /// Lattice minimum of `|p(x,0)| |det(u; grad u)(x,0)|`.
    pub min_value: f64,
    pub m0: f64,
    /// Lattice minimum of `|det R(x,0)|`.
    pub min_det_r: f64,
    /// `c = 1 / sup A0_2`.
    pub comparability_c: f64,
    /// `|det R(x,0)| >= c |p(x,0)| |det(u; grad u)(x,0)| - tol` at every node.
    pub comparability_holds: bool,
    pub comparability_tol: f64,
}

/// Condition on the `t = 0` slices of the ensemble, plus the comparison of
/// `|det R(x,0)|` with `c |p| |det(u; grad u)|`.
pub fn check_determinant_condition(
    ensemble: &SolutionEnsemble,
    pair2: &CoefficientPair,
    p: &ScalarFn,
    m0: f64,
) -> Result<DeterminantReport> {
    let r = build_r_matrix(ensemble)?;
    let d = ensemble.dim;
    let grid = &ensemble.solutions[0].grid;
    let domain = &grid.space;
    let nodes = domain.nodes();
    let grads: Vec<Vec<Point>> = ensemble
        .solutions
        .iter()
        .map(|u| domain.gradient(u.slice(0)))
        .collect();
    let sup_a0 = nodes.iter().map(|&x| (pair2.a0)(x)).fold(f64::NEG_INFINITY, f64::max);
    let c = 1.0 / sup_a0;
    let tol = 5.0 * (domain.h() + grid.dt());
    let (mut min_value, mut min_det_r, mut comparable) = (f64::INFINITY, f64::INFINITY, true);
    for (i, &x) in nodes.iter().enumerate() {
        let mut v = vec![ensemble.solutions.iter().map(|u| u.values[i]).collect::<Vec<f64>>()];
        for j in 0..d {
            v.push(grads.iter().map(|g| g[i][j]).collect());
        }
        let value = p(x, 0.0).abs() * det(v).abs();
        let rm: Vec<Vec<f64>> = (0..=d).map(|row| (0..=d).map(|m| r.rows[m][i][row]).collect()).collect();
        let dr = det(rm).abs();
        min_value = min_value.min(value);
        min_det_r = min_det_r.min(dr);
        comparable &= dr >= c * value - tol;
    }
    Ok(DeterminantReport {
        holds: min_value >= m0,
        min_value,
        m0,
        min_det_r,
        comparability_c: c,
        comparability_holds: comparable,
        comparability_tol: tol,
    })
}

/// Inputs of the coefficient sweep. `pair1 = pair2 + delta * direction`.
#[derive(Clone)]
pub struct CoefficientSetup {
    pub pair2: CoefficientPair,
    pub direction: Direction,
    pub p: ScalarFn,
    pub grid: SpaceTimeGrid,
    pub beta: f64,
    pub eps_star: f64,
    pub eps: f64,
    pub m0: f64,
    pub holder_c: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct CoefficientExperiment {
    pub fit: StabilityFit,
    /// Perturbation sizes after projection into the admissible set.
    pub effective_deltas: Vec<f64>,
    pub membership2: MembershipReport,
    pub memberships1: Vec<MembershipReport>,
    pub determinant: DeterminantReport,
    /// Largest `|F|` and largest data difference for `delta = 0`, if swept.
    pub zero_delta: Option<(f64, f64)>,
}

/// Halves `delta` until the perturbed pair is admissible (at most 30 times).
pub fn project_delta(pair2: &CoefficientPair, dir: &Direction, delta: f64) -> (f64, CoefficientPair, MembershipReport) {
    let mut d = delta;
    for _ in 0..30 {
        let pair = pair2.perturbed(d, dir);
        let report = check_membership(&pair);
        if report.member || d == 0.0 {
            return (d, pair, report);
        }
        d *= 0.5;
    }
    let pair = pair2.perturbed(d, dir);
    let report = check_membership(&pair);
    (d, pair, report)
}

fn weight_of(pair: &CoefficientPair, grid: &SpaceTimeGrid, beta: f64) -> Result<WeightField> {
    let field = pair.field(grid.t_final);
    let settings = TraceSettings::for_field(&field, &pair.domain);
    make_weight(compute_phi0(&field, &pair.domain, &settings)?, &field, beta)
}

pub fn coefficient_stability_experiment(setup: &CoefficientSetup, deltas: &[f64]) -> Result<CoefficientExperiment> {
    let grid = &setup.grid;
    let domain = &grid.space;
    let membership2 = check_membership(&setup.pair2);
    if !membership2.member {
        return Err(LabError::MembershipViolated {
            clauses: membership2.failed().join(", "),
        });
    }
    let weight2 = weight_of(&setup.pair2, grid, setup.beta)?;
    let u0_mask = weight2.omega_mask(setup.eps_star);
    let ens2 = SolutionEnsemble::manufacture(&setup.pair2, &setup.p, grid, &u0_mask)?;
    let determinant = check_determinant_condition(&ens2, &setup.pair2, &setup.p, setup.m0)?;
    if !determinant.holds {
        return Err(LabError::DeterminantConditionViolated {
            min: determinant.min_value,
            m0: setup.m0,
        });
    }

    let mut samples = Vec::new();
    let mut effective = Vec::new();
    let mut memberships1 = Vec::new();
    let mut zero_delta = None;
    for &delta in deltas {
        let (d_eff, pair1, report) = project_delta(&setup.pair2, &setup.direction, delta);
        if !report.member {
            return Err(LabError::MembershipViolated {
                clauses: report.failed().join(", "),
            });
        }
        // the weight follows the first pair
        let weight1 = weight_of(&pair1, grid, setup.beta)?;
        let geo = check_geometric_condition(&weight1, setup.eps_star, &pair1.gamma_mask(grid), grid);
        if !geo.holds {
            return Err(LabError::GeometricConditionViolated {
                reason: format!("{} unobserved boundary point(s) with phi > eps*", geo.violations.len()),
            });
        }
        let ens1 = SolutionEnsemble::manufacture(&pair1, &setup.p, grid, &u0_mask)?;
        let diff = CoefficientDifference::new(&pair1, &setup.pair2);
        let mut dd = 0.0;
        let mut ff = diff.norm(domain, None);
        for m in 0..ens1.solutions.len() {
            dd += ens1.data[m].difference(&ens2.data[m]).d_norm(grid);
            let v: Vec<f64> = ens1.solutions[m]
                .values
                .iter()
                .zip(&ens2.solutions[m].values)
                .map(|(a, b)| a - b)
                .collect();
            ff += GridFunction::from_values(grid, v)?.h1_time_norm();
        }
        let left = diff.norm(domain, Some(&weight1.omega_mask(setup.eps)));
        if delta == 0.0 {
            let fmax = diff.values.iter().flatten().fold(0.0_f64, |m, v| m.max(v.abs()));
            zero_delta = Some((fmax, dd));
        }
        let (s_used, branch) = if dd > 0.0 && ff > 0.0 {
            let (s, b) = balance_s(dd, ff, setup.holder_c, setup.eps)?;
            (s, Some(b))
        } else {
            (0.0, None)
        };
        samples.push(StabilitySample {
            noise: delta,
            seed: 0,
            d: dd,
            f: ff,
            err: left,
            s_used,
            branch,
        });
        effective.push(d_eff);
        memberships1.push(report);
    }
    let fit = fit_samples(StabilityMode::Perturbation, samples, 0.0, setup.holder_c, setup.eps)?;
    Ok(CoefficientExperiment {
        fit,
        effective_deltas: effective,
        membership2,
        memberships1,
        determinant,
        zero_delta,
    })
}

/// `(1 - r^2)^3` for `r = (x - c) / w` in the unit ball, zero outside;
/// `C^2` across the edge.
pub fn bump(center: Point, width: f64, dim: usize) -> impl Fn(Point) -> f64 + Send + Sync + Clone + 'static {
    move |x: Point| {
        let mut r2 = ((x[0] - center[0]) / width).powi(2);
        if dim == 2 {
            r2 += ((x[1] - center[1]) / width).powi(2);
        }
        if r2 < 1.0 {
            (1.0 - r2).powi(3)
        } else {
            0.0
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_pair(rho: f64) -> CoefficientPair {
        let d = SpatialDomain::interval(0.0, 1.0, 41).unwrap();
        CoefficientPair::new(d, |_| 1.0, |_| [1.0, 0.0], 3.0, rho, |x, _| x[0] > 0.5)
    }

    #[test]
    fn membership_examples() {
        let r = check_membership(&unit_pair(1.0));
        assert!(r.member, "{:?}", r);
        assert!((r.clauses[0].value - 2.0).abs() < 1e-9);
        let r = check_membership(&unit_pair(2.0));
        assert!(!r.member && r.failed().contains(&"min |A| >= rho"));
    }

    #[test]
    fn determinant_of_small_matrices() {
        assert_eq!(det(vec![vec![1.0, 0.5], vec![0.0, 1.0]]), 1.0);
        assert!((det(vec![vec![0.0, 1.0, 2.0], vec![1.0, 0.0, 3.0], vec![4.0, -3.0, 8.0]]) + 2.0).abs() < 1e-12);
        assert_eq!(det(vec![vec![1.0, 1.0], vec![2.0, 2.0]]), 0.0);
    }

    #[test]
    fn r_rows_of_trivial_ensemble() {
        let d = SpatialDomain::interval(0.0, 1.0, 11).unwrap();
        let g = SpaceTimeGrid::new(d, 11, 1.0).unwrap();
        let sols = vec![GridFunction::from_fn(&g, |_, _| 1.0), GridFunction::from_fn(&g, |x, _| x[0])];
        let ens = SolutionEnsemble::new(1, sols.clone(), Vec::new()).unwrap();
        let r = build_r_matrix(&ens).unwrap();
        for idx in 0..g.len() {
            assert!(r.rows[0][idx].iter().all(|v| v.abs() < 1e-12));
            assert!(r.rows[1][idx][0].abs() < 1e-12 && (r.rows[1][idx][1] + 1.0).abs() < 1e-12);
        }
        assert!(matches!(
            SolutionEnsemble::new(1, sols[..1].to_vec(), Vec::new()),
            Err(LabError::EnsembleSizeMismatch { got: 1, expected: 2 })
        ));
    }

    #[test]
    fn bump_norm_grows_with_delta() {
        let pair = unit_pair(1.0);
        let dir = Direction {
            a0: Arc::new(bump([0.5, 0.0], 0.5, 1)),
            a: Arc::new(|_| [0.0, 0.0]),
        };
        let n0 = pair.norm_estimate();
        let n1 = pair.perturbed(0.1, &dir).norm_estimate();
        // sup b = 1, sup |b'| = 96 / (25 sqrt 5) / width
        let expect = 0.1 * (1.0 + 12.0 * 16.0 / (25.0 * 5f64.sqrt()));
        assert!((n1 - n0 - expect).abs() < 1e-3, "{} vs {}", n1 - n0, expect);
        let (d, _, rep) = project_delta(&pair, &dir, 1.0);
        assert!(rep.member && d < 1.0);
    }
}
