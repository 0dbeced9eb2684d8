use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::grid::{dot, norm, Point, SpaceTimeGrid, SpatialDomain};

pub type ScalarFn = Arc<dyn Fn(Point, f64) -> f64 + Send + Sync>;
pub type VectorFn = Arc<dyn Fn(Point, f64) -> Point + Send + Sync>;

/// Finite-difference step used whenever an analytic derivative is missing.
pub const FD_STEP: f64 = 1e-5;

/// The principal part `A0 d_t + A . grad` of the operator, with the declared
/// constants `rho` (lower bound of `A0` and `|A|`) and `M` (norm bound).
#[derive(Clone)]
pub struct SpaceTimeField {
    dim: usize,
    a0: ScalarFn,
    a: VectorFn,
    dt_a: Option<VectorFn>,
    time_independent: bool,
    pub rho: f64,
    pub m_bound: f64,
    pub t_final: f64,
}

impl fmt::Debug for SpaceTimeField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SpaceTimeField")
            .field("dim", &self.dim)
            .field("time_independent", &self.time_independent)
            .field("rho", &self.rho)
            .field("m_bound", &self.m_bound)
            .field("t_final", &self.t_final)
            .finish_non_exhaustive()
    }
}

impl SpaceTimeField {
    pub fn new(
        dim: usize,
        a0: impl Fn(Point, f64) -> f64 + Send + Sync + 'static,
        a: impl Fn(Point, f64) -> Point + Send + Sync + 'static,
        rho: f64,
        m_bound: f64,
        t_final: f64,
    ) -> Self {
        Self {
            dim,
            a0: Arc::new(a0),
            a: Arc::new(a),
            dt_a: None,
            time_independent: false,
            rho,
            m_bound,
            t_final,
        }
    }

    /// Declares that neither `A0` nor `A` depend on time; `d_t A` then
    /// evaluates to exactly zero.
    pub fn time_independent(mut self) -> Self {
        self.time_independent = true;
        self
    }

    pub fn with_time_derivative(
        mut self,
        dt_a: impl Fn(Point, f64) -> Point + Send + Sync + 'static,
    ) -> Self {
        self.dt_a = Some(Arc::new(dt_a));
        self
    }

    /// Constant coefficients `A0 = a0`, `A = a`.
    pub fn constant(dim: usize, a0: f64, a: Point, rho: f64, m_bound: f64, t_final: f64) -> Self {
        Self::new(dim, move |_, _| a0, move |_, _| a, rho, m_bound, t_final).time_independent()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_time_independent(&self) -> bool {
        self.time_independent
    }

    #[inline]
    pub fn a0(&self, x: Point, t: f64) -> f64 {
        (self.a0)(x, t)
    }

    #[inline]
    pub fn a(&self, x: Point, t: f64) -> Point {
        let v = (self.a)(x, t);
        if self.dim == 1 {
            [v[0], 0.0]
        } else {
            v
        }
    }

    pub fn a0_fn(&self) -> ScalarFn {
        self.a0.clone()
    }

    pub fn a_fn(&self) -> VectorFn {
        self.a.clone()
    }

    pub fn dt_a(&self, x: Point, t: f64) -> Point {
        if self.time_independent {
            return [0.0, 0.0];
        }
        if let Some(d) = &self.dt_a {
            let v = d(x, t);
            return if self.dim == 1 { [v[0], 0.0] } else { v };
        }
        let p = self.a(x, t + FD_STEP);
        let m = self.a(x, t - FD_STEP);
        [(p[0] - m[0]) / (2.0 * FD_STEP), (p[1] - m[1]) / (2.0 * FD_STEP)]
    }

    pub fn dt_a0(&self, x: Point, t: f64) -> f64 {
        if self.time_independent {
            return 0.0;
        }
        (self.a0(x, t + FD_STEP) - self.a0(x, t - FD_STEP)) / (2.0 * FD_STEP)
    }

    /// Largest characteristic speed `|A| / A0` over the grid.
    pub fn max_speed(&self, grid: &SpaceTimeGrid) -> f64 {
        let mut s = 0.0_f64;
        for k in 0..grid.nt {
            let t = grid.time(k);
            for x in grid.space.nodes() {
                s = s.max(norm(self.a(x, t)) / self.a0(x, t));
            }
        }
        s
    }

    pub fn sup_a0(&self, domain: &SpatialDomain, levels: usize) -> f64 {
        let mut s = f64::NEG_INFINITY;
        for k in 0..levels.max(2) {
            let t = self.t_final * k as f64 / (levels.max(2) - 1) as f64;
            for x in domain.nodes() {
                s = s.max(self.a0(x, t));
            }
        }
        s
    }

    /// Grid check of the positivity constants.
    pub fn validate(&self, grid: &SpaceTimeGrid) -> FieldBounds {
        let mut min_a0 = f64::INFINITY;
        let mut min_abs_a = f64::INFINITY;
        let mut max_a0 = f64::NEG_INFINITY;
        for k in 0..grid.nt {
            let t = grid.time(k);
            for x in grid.space.nodes() {
                let a0 = self.a0(x, t);
                min_a0 = min_a0.min(a0);
                max_a0 = max_a0.max(a0);
                min_abs_a = min_abs_a.min(norm(self.a(x, t)));
            }
        }
        FieldBounds {
            min_a0,
            max_a0,
            min_abs_a,
            satisfies_rho: min_a0 >= self.rho - 1e-10 && min_abs_a >= self.rho - 1e-10,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FieldBounds {
    pub min_a0: f64,
    pub max_a0: f64,
    pub min_abs_a: f64,
    pub satisfies_rho: bool,
}

/// Outcome of probing `|d_t A . xi| <= C |A . xi|`.
#[derive(Clone, Debug, PartialEq)]
pub struct SpdReport {
    pub holds: bool,
    /// Largest observed ratio; the empirical constant `C`.
    pub constant: f64,
    /// `(x, t, xi)` where `A . xi` vanishes but `d_t A . xi` does not.
    pub witness: Option<(Point, f64, Point)>,
}

/// Probes the time-derivative domination condition with the axis directions
/// plus `probe_count - d` seeded random unit vectors at every node of `grid`.
pub fn check_spd_condition(
    field: &SpaceTimeField,
    grid: &SpaceTimeGrid,
    probe_count: usize,
    seed: u64,
) -> SpdReport {
    let d = field.dim();
    let mut probes: Vec<Point> = (0..d)
        .map(|k| if k == 0 { [1.0, 0.0] } else { [0.0, 1.0] })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    while probes.len() < probe_count.max(d + 1) {
        let xi = if d == 1 {
            [if rng.random::<bool>() { 1.0 } else { -1.0 }, 0.0]
        } else {
            let th = rng.random_range(0.0..std::f64::consts::TAU);
            [th.cos(), th.sin()]
        };
        probes.push(xi);
    }

    let mut constant = 0.0_f64;
    for k in 0..grid.nt {
        let t = grid.time(k);
        for x in grid.space.nodes() {
            let a = field.a(x, t);
            let da = field.dt_a(x, t);
            for &xi in &probes {
                let lhs = dot(da, xi).abs();
                let rhs = dot(a, xi).abs();
                if rhs < 1e-12 {
                    if lhs > 1e-10 {
                        return SpdReport {
                            holds: false,
                            constant: f64::INFINITY,
                            witness: Some((x, t, xi)),
                        };
                    }
                } else {
                    constant = constant.max(lhs / rhs);
                }
            }
        }
    }
    SpdReport {
        holds: true,
        constant,
        witness: None,
    }
}

/// Largest relative mismatch between `A(x,t)` and `A(x,0) exp(int_0^t g)`
/// with the growth rate `g = d_t A . A / |A|^2`, integrated by the
/// trapezoid rule on the time levels of `grid`.
pub fn growth_representation_error(field: &SpaceTimeField, grid: &SpaceTimeGrid) -> f64 {
    let dt = grid.dt();
    let mut worst = 0.0_f64;
    for x in grid.space.nodes() {
        let a_init = field.a(x, 0.0);
        let rate = |t: f64| {
            let a = field.a(x, t);
            dot(field.dt_a(x, t), a) / dot(a, a)
        };
        let mut integral = 0.0;
        let mut prev = rate(0.0);
        for k in 1..grid.nt {
            let t = grid.time(k);
            let cur = rate(t);
            integral += 0.5 * dt * (prev + cur);
            prev = cur;
            let g = integral.exp();
            let a = field.a(x, t);
            let diff = [a[0] - a_init[0] * g, a[1] - a_init[1] * g];
            worst = worst.max(norm(diff) / norm(a));
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid_1d() -> SpaceTimeGrid {
        SpaceTimeGrid::new(SpatialDomain::interval(0.0, 1.0, 21).unwrap(), 21, 1.0).unwrap()
    }

    #[test]
    fn time_independent_field_has_zero_time_derivative() {
        let f = SpaceTimeField::new(1, |_, _| 1.0, |x, _| [1.0 + x[0], 0.0], 1.0, 4.0, 1.0)
            .time_independent();
        assert_eq!(f.dt_a([0.3, 0.0], 0.7), [0.0, 0.0]);
        let r = check_spd_condition(&f, &grid_1d(), 4, 1);
        assert!(r.holds);
        assert_eq!(r.constant, 0.0);
    }

    #[test]
    fn exponential_growth_has_unit_constant() {
        let f = SpaceTimeField::new(
            1,
            |_, _| 1.0,
            |x, t| [(1.0 + x[0]) * t.exp(), 0.0],
            1.0,
            10.0,
            1.0,
        );
        let r = check_spd_condition(&f, &grid_1d(), 4, 3);
        assert!(r.holds);
        assert!((r.constant - 1.0).abs() < 1e-6, "{}", r.constant);
        assert!(growth_representation_error(&f, &grid_1d()) < 1e-8);
    }

    #[test]
    fn orthogonal_time_derivative_yields_witness() {
        let f = SpaceTimeField::new(2, |_, _| 1.0, |_, t| [1.0, t], 1.0, 3.0, 1.0)
            .with_time_derivative(|_, _| [0.0, 1.0]);
        let grid = SpaceTimeGrid::new(
            SpatialDomain::rectangle([0.0, 0.0], [1.0, 1.0], [3, 3]).unwrap(),
            5,
            1.0,
        )
        .unwrap();
        let r = check_spd_condition(&f, &grid, 3, 0);
        assert!(!r.holds);
        let (_, t, xi) = r.witness.unwrap();
        assert_eq!(t, 0.0);
        assert_eq!(xi, [0.0, 1.0]);
    }

    #[test]
    fn validate_reports_rho() {
        let f = SpaceTimeField::constant(1, 1.0, [1.0, 0.0], 1.0, 3.0, 1.0);
        assert!(f.validate(&grid_1d()).satisfies_rho);
        let g = SpaceTimeField::constant(1, 1.0, [1.0, 0.0], 2.0, 3.0, 1.0);
        assert!(!g.validate(&grid_1d()).satisfies_rho);
    }
}
