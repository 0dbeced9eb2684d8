//! Forward solves of `A0 u_t + A . grad u + p u = R f` from initial and
//! inflow data, by characteristics (primary) and first-order upwind
//! differences (cross-check), plus extraction of lateral Cauchy data.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{LabError, Result};
use crate::geometry::boundary::BoundaryMask;
use crate::geometry::field::{ScalarFn, SpaceTimeField};
use crate::grid::{diff1, dot, h1_masked, GridFunction, Point, SpaceTimeGrid, SpatialDomain};
use crate::par;

pub type SpatialFn = Arc<dyn Fn(Point) -> f64 + Send + Sync>;

const EXIT_TOL: f64 = 1e-13;

/// A function of `x` either in closed form or as lattice values
/// (multilinear interpolation, clamped outside the box).
#[derive(Clone)]
pub enum Profile {
    Function(SpatialFn),
    Grid(Vec<f64>),
}

impl Profile {
    pub fn function(f: impl Fn(Point) -> f64 + Send + Sync + 'static) -> Self {
        Profile::Function(Arc::new(f))
    }

    pub fn zero() -> Self {
        Profile::function(|_| 0.0)
    }

    #[inline]
    pub fn eval(&self, domain: &SpatialDomain, x: Point) -> f64 {
        match self {
            Profile::Function(f) => f(x),
            Profile::Grid(v) => domain.interpolate(v, x),
        }
    }

    pub fn sample(&self, domain: &SpatialDomain) -> Vec<f64> {
        match self {
            Profile::Function(f) => domain.nodes().into_iter().map(|x| f(x)).collect(),
            Profile::Grid(v) => v.clone(),
        }
    }
}

impl std::fmt::Debug for Profile {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Profile::Function(_) => f.write_str("Profile::Function"),
            Profile::Grid(v) => write!(f, "Profile::Grid({} values)", v.len()),
        }
    }
}

/// Lower-order terms: `p(x,t)`, `R(x,t)` and the source `f(x)`.
#[derive(Clone)]
pub struct SourceSpec {
    pub p: ScalarFn,
    pub r: ScalarFn,
    pub f: Profile,
    /// Declared lower bound of `|R(., 0)|`.
    pub m0: f64,
}

impl SourceSpec {
    pub fn new(
        p: impl Fn(Point, f64) -> f64 + Send + Sync + 'static,
        r: impl Fn(Point, f64) -> f64 + Send + Sync + 'static,
        f: Profile,
        m0: f64,
    ) -> Self {
        Self {
            p: Arc::new(p),
            r: Arc::new(r),
            f,
            m0,
        }
    }

    /// `p = 0`, `R = 1`.
    pub fn pure_source(f: Profile) -> Self {
        Self::new(|_, _| 0.0, |_, _| 1.0, f, 1.0)
    }

    pub fn with_f(&self, f: Profile) -> Self {
        Self { f, ..self.clone() }
    }

    pub fn min_abs_r0(&self, domain: &SpatialDomain) -> f64 {
        domain
            .nodes()
            .into_iter()
            .map(|x| (self.r)(x, 0.0).abs())
            .fold(f64::INFINITY, f64::min)
    }

    /// Checks `|R(., 0)| >= m0` on the lattice.
    pub fn check_m0(&self, domain: &SpatialDomain) -> Result<f64> {
        let min = self.min_abs_r0(domain);
        if min < self.m0 - 1e-10 {
            return Err(LabError::ViolatesR0 { min, m0: self.m0 });
        }
        Ok(min)
    }

    #[inline]
    fn rhs(&self, domain: &SpatialDomain, x: Point, t: f64) -> f64 {
        (self.r)(x, t) * self.f.eval(domain, x)
    }
}

impl std::fmt::Debug for SourceSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SourceSpec")
            .field("f", &self.f)
            .field("m0", &self.m0)
            .finish_non_exhaustive()
    }
}

/// Data on the inflow part of the lateral boundary.
#[derive(Clone)]
pub enum Inflow {
    Function(ScalarFn),
    /// Continue every characteristic outside the domain down to `t = 0` and
    /// read the initial profile there. Requires closed-form coefficients and
    /// a closed-form initial profile; produces the restriction of a smooth
    /// solution posed on the whole plane.
    Extended,
}

impl Inflow {
    pub fn function(g: impl Fn(Point, f64) -> f64 + Send + Sync + 'static) -> Self {
        Inflow::Function(Arc::new(g))
    }

    pub fn zero() -> Self {
        Inflow::function(|_, _| 0.0)
    }
}

#[derive(Clone, Debug)]
pub struct ForwardSolution {
    pub characteristics: GridFunction,
    pub upwind: GridFunction,
    /// Max-norm difference of the two paths.
    pub discrepancy: f64,
    pub cfl: f64,
}

struct Problem<'a> {
    field: &'a SpaceTimeField,
    src: &'a SourceSpec,
    init: &'a Profile,
    inflow: &'a Inflow,
    domain: &'a SpatialDomain,
    step: f64,
}

type State = [f64; 4];

impl Problem<'_> {
    /// `d/ds` of (X, a, b) along `dX/ds = A / A0`, where `u(t0) = a u(X(s), s) + b`.
    #[inline]
    fn rhs(&self, y: State, s: f64) -> State {
        let x = [y[0], y[1]];
        let a0 = self.field.a0(x, s);
        let a = self.field.a(x, s);
        let p = (self.src.p)(x, s);
        let rf = self.src.rhs(self.domain, x, s);
        [a[0] / a0, a[1] / a0, y[2] * p / a0, -y[2] * rf / a0]
    }

    #[inline]
    fn rk4(&self, y: State, s: f64, h: f64) -> State {
        let add = |y: State, k: State, c: f64| [y[0] + c * k[0], y[1] + c * k[1], y[2] + c * k[2], y[3] + c * k[3]];
        let k1 = self.rhs(y, s);
        let k2 = self.rhs(add(y, k1, 0.5 * h), s + 0.5 * h);
        let k3 = self.rhs(add(y, k2, 0.5 * h), s + 0.5 * h);
        let k4 = self.rhs(add(y, k3, h), s + h);
        let mut out = y;
        for j in 0..4 {
            out[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
        }
        out
    }

    /// Value at `(x, t)` by tracing the characteristic back to its foot.
    fn value(&self, x: Point, t: f64) -> Result<f64> {
        let extended = matches!(self.inflow, Inflow::Extended);
        let mut y: State = [x[0], x[1], 1.0, 0.0];
        let mut s = t;
        while s > 0.0 {
            let tau = self.step.min(s);
            let next = self.rk4(y, s, -tau);
            let s_next = if tau == s { 0.0 } else { s - tau };
            if !extended && !self.domain.contains([next[0], next[1]]) {
                let (mut lo, mut hi) = (0.0, tau);
                while hi - lo > EXIT_TOL {
                    let mid = 0.5 * (lo + hi);
                    let trial = self.rk4(y, s, -mid);
                    if self.domain.contains([trial[0], trial[1]]) {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                let foot = if lo > 0.0 { self.rk4(y, s, -lo) } else { y };
                let (xf, sf) = ([foot[0], foot[1]], s - lo);
                let nu = self.domain.nearest_face_normal(xf);
                let a = self.field.a(xf, sf);
                if dot(a, nu) > 1e-12 * crate::grid::norm(a) {
                    return Err(LabError::CharacteristicLost { point: x, time: t });
                }
                let Inflow::Function(g) = self.inflow else { unreachable!() };
                return Ok(foot[2] * g(xf, sf) + foot[3]);
            }
            y = next;
            s = s_next;
        }
        Ok(y[2] * self.init.eval(self.domain, [y[0], y[1]]) + y[3])
    }

    fn inflow_value(&self, x: Point, t: f64) -> Result<f64> {
        match self.inflow {
            Inflow::Function(g) => Ok(g(x, t)),
            Inflow::Extended => self.value(x, t),
        }
    }
}

fn validate_inputs(init: &Profile, inflow: &Inflow, grid: &SpaceTimeGrid) -> Result<()> {
    if let Profile::Grid(v) = init {
        if v.len() != grid.space.len() {
            return Err(LabError::Shape(format!(
                "initial profile has {} values for {} nodes",
                v.len(),
                grid.space.len()
            )));
        }
        if matches!(inflow, Inflow::Extended) {
            return Err(LabError::Config(
                "extended inflow needs a closed-form initial profile".into(),
            ));
        }
    }
    Ok(())
}

/// `h_t * max sum_k |A_k| / (A0 h_k)` over the grid.
pub fn cfl_number(field: &SpaceTimeField, grid: &SpaceTimeGrid) -> f64 {
    let h = grid.space.spacing();
    let nodes = grid.space.nodes();
    let mut worst = 0.0_f64;
    for k in 0..grid.nt {
        let t = grid.time(k);
        for &x in &nodes {
            let a = field.a(x, t);
            let a0 = field.a0(x, t);
            let mut c = a[0].abs() / (a0 * h[0]);
            if grid.space.dim() == 2 {
                c += a[1].abs() / (a0 * h[1]);
            }
            worst = worst.max(c);
        }
    }
    grid.dt() * worst
}

/// Characteristics path only (no CFL restriction). `substeps` RK4 steps are
/// taken per time level.
pub fn solve_characteristics(
    field: &SpaceTimeField,
    src: &SourceSpec,
    init: &Profile,
    inflow: &Inflow,
    grid: &SpaceTimeGrid,
    substeps: usize,
) -> Result<GridFunction> {
    validate_inputs(init, inflow, grid)?;
    let problem = Problem {
        field,
        src,
        init,
        inflow,
        domain: &grid.space,
        step: grid.dt() / substeps.max(1) as f64,
    };
    let ns = grid.space.len();
    let nodes = grid.space.nodes();
    let values = par::map_range(grid.len(), |idx| {
        let (i, k) = (idx % ns, idx / ns);
        problem.value(nodes[i], grid.time(k))
    });
    GridFunction::from_values(grid, values.into_iter().collect::<Result<Vec<_>>>()?)
}

/// First-order upwind explicit time stepping. Nodes whose upwind neighbour
/// lies outside the lattice take the inflow value.
pub fn solve_upwind(
    field: &SpaceTimeField,
    src: &SourceSpec,
    init: &Profile,
    inflow: &Inflow,
    grid: &SpaceTimeGrid,
) -> Result<GridFunction> {
    validate_inputs(init, inflow, grid)?;
    let cfl = cfl_number(field, grid);
    if cfl > 1.0 + 1e-12 {
        return Err(LabError::CflViolation { cfl });
    }
    let d = &grid.space;
    let problem = Problem {
        field,
        src,
        init,
        inflow,
        domain: d,
        step: grid.dt(),
    };
    let ns = d.len();
    let [nx, ny] = d.nodes_per_axis();
    let h = d.spacing();
    let ht = grid.dt();
    let nodes = d.nodes();
    let mut values = Vec::with_capacity(grid.len());
    values.extend(init.sample(d));
    for k in 0..grid.nt - 1 {
        let t = grid.time(k);
        let t_next = grid.time(k + 1);
        let prev = values[k * ns..(k + 1) * ns].to_vec();
        let next = par::map_range(ns, |i| -> Result<f64> {
            let x = nodes[i];
            let (ix, iy) = d.coords(i);
            let a = field.a(x, t);
            let a0 = field.a0(x, t);
            let mut transport = 0.0;
            for axis in 0..d.dim() {
                let (j, n, stride) = if axis == 0 { (ix, nx, 1) } else { (iy, ny, nx) };
                let ak = a[axis];
                if ak > 0.0 {
                    if j == 0 {
                        return problem.inflow_value(x, t_next);
                    }
                    transport += ak * (prev[i] - prev[i - stride]) / h[axis];
                } else if ak < 0.0 {
                    if j == n - 1 {
                        return problem.inflow_value(x, t_next);
                    }
                    transport += ak * (prev[i + stride] - prev[i]) / h[axis];
                }
            }
            let p = (src.p)(x, t);
            let rf = src.rhs(d, x, t);
            Ok(prev[i] + ht / a0 * (rf - p * prev[i] - transport))
        });
        for v in next {
            values.push(v?);
        }
    }
    GridFunction::from_values(grid, values)
}

/// Both paths and their max-norm discrepancy.
pub fn solve_forward(
    field: &SpaceTimeField,
    src: &SourceSpec,
    init: &Profile,
    inflow: &Inflow,
    grid: &SpaceTimeGrid,
) -> Result<ForwardSolution> {
    let upwind = solve_upwind(field, src, init, inflow, grid)?;
    let characteristics = solve_characteristics(field, src, init, inflow, grid, 1)?;
    let discrepancy = characteristics
        .values
        .iter()
        .zip(&upwind.values)
        .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
    Ok(ForwardSolution {
        characteristics,
        upwind,
        discrepancy,
        cfl: cfl_number(field, grid),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct NoiseDescriptor {
    pub level: f64,
    pub seed: u64,
}

/// Lateral trace on an observation mask plus the initial slice.
///
/// `g` and `dg_dt` are stored for every boundary mesh point and level
/// (`k * nb + b`); only masked entries count as data. `u0` is stored on the
/// whole lattice, `u0_mask` marks the observed part.
#[derive(Clone, Debug)]
pub struct CauchyData {
    pub mask: BoundaryMask,
    pub g: Vec<f64>,
    pub dg_dt: Vec<f64>,
    pub u0: Vec<f64>,
    pub u0_mask: Vec<bool>,
    pub noise: Option<NoiseDescriptor>,
}

impl CauchyData {
    fn time_derivative(g: &[f64], nb: usize, nt: usize, dt: f64) -> Vec<f64> {
        let mut out = vec![0.0; g.len()];
        for b in 0..nb {
            for k in 0..nt {
                out[k * nb + b] = diff1(|j| g[j * nb + b], k, nt, dt);
            }
        }
        out
    }

    /// `L^2(Sigma)` norms of `g` and `d_t g`.
    pub fn trace_norms(&self, grid: &SpaceTimeGrid) -> (f64, f64) {
        let wt = grid.time_weights();
        let nb = self.mask.nb();
        let (mut a, mut b) = (0.0, 0.0);
        for (k, wk) in wt.iter().enumerate() {
            for (j, p) in self.mask.points.iter().enumerate() {
                if self.mask.get(j, k) {
                    let w = wk * p.weight;
                    a += w * self.g[k * nb + j].powi(2);
                    b += w * self.dg_dt[k * nb + j].powi(2);
                }
            }
        }
        (a.sqrt(), b.sqrt())
    }

    /// `||u0||_{H^1(Omega_eps*)} + ||g||_{L^2(Sigma)} + ||d_t g||_{L^2(Sigma)}`.
    pub fn d_norm(&self, grid: &SpaceTimeGrid) -> f64 {
        let (a, b) = self.trace_norms(grid);
        h1_masked(&grid.space, &self.u0, Some(&self.u0_mask)) + a + b
    }

    /// Entrywise difference `self - other` (same masks assumed).
    pub fn difference(&self, other: &CauchyData) -> CauchyData {
        let sub = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x - y).collect();
        CauchyData {
            mask: self.mask.clone(),
            g: sub(&self.g, &other.g),
            dg_dt: sub(&self.dg_dt, &other.dg_dt),
            u0: sub(&self.u0, &other.u0),
            u0_mask: self.u0_mask.clone(),
            noise: None,
        }
    }
}

/// Restricts `u` to the observation mask and the initial slice.
pub fn extract_trace(u: &GridFunction, mask: &BoundaryMask, u0_mask: &[bool]) -> Result<CauchyData> {
    if mask.is_empty() {
        return Err(LabError::EmptyMask);
    }
    let grid = &u.grid;
    let nb = mask.nb();
    let mut g = Vec::with_capacity(nb * grid.nt);
    for k in 0..grid.nt {
        g.extend(mask.points.iter().map(|p| u.at(p.node, k)));
    }
    let dg_dt = CauchyData::time_derivative(&g, nb, grid.nt, grid.dt());
    Ok(CauchyData {
        mask: mask.clone(),
        g,
        dg_dt,
        u0: u.slice(0).to_vec(),
        u0_mask: u0_mask.to_vec(),
        noise: None,
    })
}

/// Adds uniform noise of half-width `level * max|g|` to the trace (then
/// recomputes `d_t g`) and of half-width `level * max|u0|` to the slice.
pub fn add_noise(data: &CauchyData, level: f64, seed: u64, grid: &SpaceTimeGrid) -> CauchyData {
    let mut out = data.clone();
    out.noise = Some(NoiseDescriptor { level, seed });
    if level == 0.0 {
        return out;
    }
    let nb = data.mask.nb();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g_max = data
        .g
        .iter()
        .zip(&data.mask.mask)
        .filter(|(_, m)| **m)
        .fold(0.0_f64, |a, (v, _)| a.max(v.abs()));
    let u_max = data
        .u0
        .iter()
        .zip(&data.u0_mask)
        .filter(|(_, m)| **m)
        .fold(0.0_f64, |a, (v, _)| a.max(v.abs()));
    let amp_g = level * g_max;
    let amp_u = level * u_max;
    for v in out.g.iter_mut() {
        let r: f64 = rng.random_range(-1.0..=1.0);
        *v += amp_g * r;
    }
    for v in out.u0.iter_mut() {
        let r: f64 = rng.random_range(-1.0..=1.0);
        *v += amp_u * r;
    }
    out.dg_dt = CauchyData::time_derivative(&out.g, nb, grid.nt, grid.dt());
    out
}
