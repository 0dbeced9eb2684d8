//! Both sides of the weighted estimate
//! `s^2 int_Q e^{2s phi}|u|^2 + s int_Omega e^{2s phi(.,0)}|u(.,0)|^2
//!  <= C int_Q e^{2s phi}|(P+p)u|^2 + C s int_{Sigma+} e^{2s phi}|u|^2`
//! evaluated by quadrature, swept over `s`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{LabError, Result};
use crate::geometry::boundary::BoundaryMask;
use crate::geometry::field::{ScalarFn, SpaceTimeField};
use crate::geometry::weight::WeightField;
use crate::grid::{dot, GridFunction, Point, SpaceTimeGrid};
use crate::par;

const SUP_LEVELS: usize = 129;

/// The four integrals at one `s`, each multiplied by `exp(-log_shift)` with
/// `log_shift = 2 s max(phi)`. Ratios do not depend on the shift.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CarlemanTerms {
    pub s: f64,
    pub lhs1: f64,
    pub lhs2: f64,
    pub rhs1: f64,
    pub rhs2: f64,
    pub log_shift: f64,
}

impl CarlemanTerms {
    pub fn ratio(&self) -> f64 {
        let rhs = self.rhs1 + self.rhs2;
        if rhs > 0.0 {
            (self.lhs1 + self.lhs2) / rhs
        } else {
            f64::NAN
        }
    }

    /// The integrals without the shift.
    pub fn unshifted(&self) -> [f64; 4] {
        let f = self.log_shift.exp();
        [self.lhs1 * f, self.lhs2 * f, self.rhs1 * f, self.rhs2 * f]
    }
}

/// Rejects weights outside `0 < beta < rho / sup A0`.
pub fn check_admissible(weight: &WeightField, field: &SpaceTimeField) -> Result<f64> {
    let bound = weight
        .beta_bound
        .unwrap_or_else(|| field.rho / field.sup_a0(&weight.domain, SUP_LEVELS));
    let beta = weight.beta();
    if !(beta > 0.0 && beta < bound) {
        return Err(LabError::InadmissibleWeight { beta, bound });
    }
    Ok(bound)
}

/// `s`-independent pieces of the integrals for one test function.
struct Integrands {
    u2: Vec<f64>,
    res2: Vec<f64>,
}

struct Quadrature {
    ws: Vec<f64>,
    wt: Vec<f64>,
    phi: Vec<f64>,
    phi_max: f64,
    /// `(node, weight)` of Sigma+ per level.
    sigma: Vec<Vec<(usize, f64)>>,
}

impl Quadrature {
    fn new(grid: &SpaceTimeGrid, weight: &WeightField, sigma_plus: &BoundaryMask) -> Self {
        let ns = grid.space.len();
        let mut phi = Vec::with_capacity(grid.len());
        for k in 0..grid.nt {
            let t = grid.time(k);
            phi.extend((0..ns).map(|i| weight.phi_node(i, t)));
        }
        let phi_max = phi.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let sigma = (0..grid.nt)
            .map(|k| {
                sigma_plus
                    .points
                    .iter()
                    .enumerate()
                    .filter(|(b, _)| sigma_plus.get(*b, k))
                    .map(|(_, p)| (p.node, p.weight))
                    .collect()
            })
            .collect();
        Self {
            ws: grid.space.quadrature_weights(),
            wt: grid.time_weights(),
            phi,
            phi_max,
            sigma,
        }
    }

    fn terms(&self, it: &Integrands, s: f64, ew: &[f64]) -> CarlemanTerms {
        let ns = self.ws.len();
        let (mut l1, mut r1, mut r2) = (0.0, 0.0, 0.0);
        for (k, wk) in self.wt.iter().enumerate() {
            let (mut a, mut b) = (0.0, 0.0);
            for i in 0..ns {
                let idx = k * ns + i;
                let w = self.ws[i] * ew[idx];
                a += w * it.u2[idx];
                b += w * it.res2[idx];
            }
            l1 += wk * a;
            r1 += wk * b;
            let c: f64 = self.sigma[k]
                .iter()
                .map(|&(node, wb)| wb * ew[k * ns + node] * it.u2[k * ns + node])
                .sum();
            r2 += wk * c;
        }
        let l2: f64 = (0..ns).map(|i| self.ws[i] * ew[i] * it.u2[i]).sum();
        CarlemanTerms {
            s,
            lhs1: s * s * l1,
            lhs2: s * l2,
            rhs1: r1,
            rhs2: s * r2,
            log_shift: 2.0 * s * self.phi_max,
        }
    }

    fn exp_weights(&self, s: f64) -> Vec<f64> {
        self.phi
            .iter()
            .map(|p| (2.0 * s * (p - self.phi_max)).exp())
            .collect()
    }
}

fn integrands(u: &GridFunction, field: &SpaceTimeField, p: &ScalarFn) -> Result<Integrands> {
    let grid = &u.grid;
    let ns = grid.space.len();
    let last = grid.nt - 1;
    let max_abs = u.slice(last).iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if max_abs > 1e-12 {
        return Err(LabError::FinalTimeNotZero { max_abs });
    }
    let dt = u.d_dt();
    let grad = u.gradient();
    let nodes = grid.space.nodes();
    let res2 = (0..grid.len())
        .map(|idx| {
            let (i, k) = (idx % ns, idx / ns);
            let (x, t) = (nodes[i], grid.time(k));
            let r = field.a0(x, t) * dt[idx] + dot(field.a(x, t), grad[idx]) + p(x, t) * u.values[idx];
            r * r
        })
        .collect();
    Ok(Integrands {
        u2: u.values.iter().map(|v| v * v).collect(),
        res2,
    })
}

/// The four (shifted) integrals for one function and one `s`.
pub fn evaluate_carleman(
    u: &GridFunction,
    field: &SpaceTimeField,
    p: &ScalarFn,
    weight: &WeightField,
    sigma_plus: &BoundaryMask,
    s: f64,
) -> Result<CarlemanTerms> {
    check_admissible(weight, field)?;
    let it = integrands(u, field, p)?;
    let q = Quadrature::new(&u.grid, weight, sigma_plus);
    Ok(q.terms(&it, s, &q.exp_weights(s)))
}

/// `u = psi(t) w(x)` with `psi(T) = 0`; coefficients drawn from a seeded
/// generator.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TestFunction {
    pub psi: [f64; 3],
    pub wx: [f64; 3],
    pub wy: [f64; 3],
    pub kx: u32,
    pub ky: u32,
}

impl TestFunction {
    fn factor(c: &[f64; 3], k: u32, xi: f64) -> f64 {
        c[0] + c[1] * xi + c[2] * (std::f64::consts::PI * k as f64 * xi).cos()
    }

    pub fn eval(&self, x: Point, t: f64, lo: Point, hi: Point, dim: usize, t_final: f64) -> f64 {
        let tau = t / t_final;
        let psi = (1.0 - tau) * (self.psi[0] + self.psi[1] * tau + self.psi[2] * (std::f64::consts::PI * tau).sin());
        let mut w = Self::factor(&self.wx, self.kx, (x[0] - lo[0]) / (hi[0] - lo[0]));
        if dim == 2 {
            w *= Self::factor(&self.wy, self.ky, (x[1] - lo[1]) / (hi[1] - lo[1]));
        }
        psi * w
    }

    pub fn sample(&self, grid: &SpaceTimeGrid) -> GridFunction {
        let (lo, hi, dim) = (grid.space.lo(), grid.space.hi(), grid.space.dim());
        let mut u = GridFunction::from_fn(grid, |x, t| self.eval(x, t, lo, hi, dim, grid.t_final));
        let ns = grid.space.len();
        let last = grid.nt - 1;
        u.values[last * ns..].fill(0.0);
        u
    }
}

pub fn test_family(count: usize, seed: u64) -> Vec<TestFunction> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coeffs = |rng: &mut ChaCha8Rng| -> [f64; 3] {
        [
            rng.random_range(0.5..1.5),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        ]
    };
    (0..count)
        .map(|_| TestFunction {
            psi: coeffs(&mut rng),
            wx: coeffs(&mut rng),
            wy: coeffs(&mut rng),
            kx: rng.random_range(1..=3),
            ky: rng.random_range(1..=3),
        })
        .collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct CarlemanReport {
    pub s_grid: Vec<f64>,
    /// `terms[member][j]` at `s_grid[j]`.
    pub terms: Vec<Vec<CarlemanTerms>>,
    pub c_est: f64,
    pub s_star_est: f64,
    /// Running max of the ratio at the last `s` over its value at the
    /// previous one, minus one.
    pub top_octave_growth: f64,
    pub all_finite: bool,
    /// Every member has `RHS = 0` at every `s`.
    pub degenerate: bool,
    pub pass: bool,
}

impl CarlemanReport {
    pub fn ratios(&self, member: usize) -> Vec<f64> {
        self.terms[member].iter().map(|t| t.ratio()).collect()
    }
}

/// Evaluates the estimate for every member and every `s`, then estimates
/// `s*` (smallest `s` after which no ratio grows by more than 1% between
/// consecutive grid values) and `C` (largest ratio for `s >= s*`, or over
/// the upper half of the grid if that is larger).
pub fn sweep_s(
    family: &[GridFunction],
    field: &SpaceTimeField,
    p: &ScalarFn,
    weight: &WeightField,
    sigma_plus: &BoundaryMask,
    s_grid: &[f64],
) -> Result<CarlemanReport> {
    if s_grid.is_empty() || s_grid.windows(2).any(|w| w[1] <= w[0]) || s_grid[0] <= 0.0 {
        return Err(LabError::Config("s grid must be positive and increasing".into()));
    }
    check_admissible(weight, field)?;
    let Some(first) = family.first() else {
        return Err(LabError::Config("empty test family".into()));
    };
    let q = Quadrature::new(&first.grid, weight, sigma_plus);
    let its = family
        .iter()
        .map(|u| integrands(u, field, p))
        .collect::<Result<Vec<_>>>()?;
    let weights: Vec<Vec<f64>> = par::map(s_grid, |&s| q.exp_weights(s));
    let terms: Vec<Vec<CarlemanTerms>> = par::map(&its, |it| {
        s_grid
            .iter()
            .zip(&weights)
            .map(|(&s, ew)| q.terms(it, s, ew))
            .collect()
    });
    Ok(summarize(s_grid, terms))
}

fn summarize(s_grid: &[f64], terms: Vec<Vec<CarlemanTerms>>) -> CarlemanReport {
    let n = s_grid.len();
    let ratios: Vec<Vec<f64>> = terms
        .iter()
        .map(|row| row.iter().map(|t| t.ratio()).collect())
        .collect();
    let degenerate = ratios.iter().all(|r| r.iter().all(|v| v.is_nan()));
    let all_finite = !degenerate && ratios.iter().all(|r| r.iter().all(|v| v.is_finite()));

    let mut star = n - 1;
    while star > 0
        && ratios
            .iter()
            .all(|r| !(r[star] > 1.01 * r[star - 1]))
    {
        star -= 1;
    }
    let from = star.min(n / 2);
    let c_est = ratios
        .iter()
        .flat_map(|r| r[from..].iter().cloned())
        .filter(|v| v.is_finite())
        .fold(f64::NAN, f64::max);

    let running_max = |j: usize| {
        ratios
            .iter()
            .flat_map(|r| r[..=j].iter().cloned())
            .filter(|v| v.is_finite())
            .fold(f64::NAN, f64::max)
    };
    let top_octave_growth = if n >= 2 {
        running_max(n - 1) / running_max(n - 2) - 1.0
    } else {
        f64::NAN
    };
    CarlemanReport {
        s_grid: s_grid.to_vec(),
        pass: all_finite && top_octave_growth <= 0.01,
        terms,
        c_est,
        s_star_est: s_grid[star],
        top_octave_growth,
        all_finite,
        degenerate,
    }
}

/// `int_{Q_eps} e^{2s phi} / int_Q e^{2s phi}`.
pub fn mass_fraction(weight: &WeightField, grid: &SpaceTimeGrid, eps: f64, s: f64) -> f64 {
    let ns = grid.space.len();
    let ws = grid.space.quadrature_weights();
    let wt = grid.time_weights();
    let phi_max = weight.max_phi0();
    let (mut inside, mut total) = (0.0, 0.0);
    for (k, wk) in wt.iter().enumerate() {
        let t = grid.time(k);
        for (i, wi) in ws.iter().enumerate().take(ns) {
            let phi = weight.phi_node(i, t);
            let m = wk * wi * (2.0 * s * (phi - phi_max)).exp();
            total += m;
            if phi > eps {
                inside += m;
            }
        }
    }
    inside / total
}
