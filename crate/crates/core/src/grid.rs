//! Structured grids on interval / rectangle domains, trapezoidal quadrature
//! and second-order difference operators.
//!
//! Points and vectors are stored as `[f64; 2]` regardless of dimension; in
//! one space dimension the second component is ignored and kept at zero.

use crate::error::{LabError, Result};

pub type Point = [f64; 2];

#[inline]
pub fn dot(a: Point, b: Point) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

#[inline]
pub fn norm(a: Point) -> f64 {
    a[0].hypot(a[1])
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Shape {
    Interval { lo: f64, hi: f64 },
    Rectangle { lo: Point, hi: Point },
}

/// A point of the boundary mesh with its outer unit normal and arclength
/// quadrature weight. In 1-D the "arclength" measure is counting measure.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundaryPoint {
    pub node: usize,
    pub position: Point,
    pub normal: Point,
    pub weight: f64,
}

/// Bounded Lipschitz domain together with its uniform node lattice.
#[derive(Clone, Debug, PartialEq)]
pub struct SpatialDomain {
    shape: Shape,
    n: [usize; 2],
}

impl SpatialDomain {
    pub fn interval(lo: f64, hi: f64, nodes: usize) -> Result<Self> {
        if !(hi > lo) || nodes < 3 {
            return Err(LabError::Config(format!(
                "interval needs lo < hi and at least 3 nodes (got [{lo}, {hi}], {nodes})"
            )));
        }
        Ok(Self {
            shape: Shape::Interval { lo, hi },
            n: [nodes, 1],
        })
    }

    pub fn rectangle(lo: Point, hi: Point, nodes: [usize; 2]) -> Result<Self> {
        if !(hi[0] > lo[0] && hi[1] > lo[1]) || nodes[0] < 3 || nodes[1] < 3 {
            return Err(LabError::Config(format!(
                "rectangle needs lo < hi and at least 3x3 nodes (got {lo:?}..{hi:?}, {nodes:?})"
            )));
        }
        Ok(Self {
            shape: Shape::Rectangle { lo, hi },
            n: nodes,
        })
    }

    /// Same domain with a different lattice.
    pub fn with_nodes(&self, nodes: [usize; 2]) -> Result<Self> {
        match self.shape {
            Shape::Interval { lo, hi } => Self::interval(lo, hi, nodes[0]),
            Shape::Rectangle { lo, hi } => Self::rectangle(lo, hi, nodes),
        }
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn dim(&self) -> usize {
        match self.shape {
            Shape::Interval { .. } => 1,
            Shape::Rectangle { .. } => 2,
        }
    }

    pub fn nodes_per_axis(&self) -> [usize; 2] {
        self.n
    }

    pub fn len(&self) -> usize {
        self.n[0] * self.n[1]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn lo(&self) -> Point {
        match self.shape {
            Shape::Interval { lo, .. } => [lo, 0.0],
            Shape::Rectangle { lo, .. } => lo,
        }
    }

    pub fn hi(&self) -> Point {
        match self.shape {
            Shape::Interval { hi, .. } => [hi, 0.0],
            Shape::Rectangle { hi, .. } => hi,
        }
    }

    pub fn spacing(&self) -> Point {
        let (lo, hi) = (self.lo(), self.hi());
        let hx = (hi[0] - lo[0]) / (self.n[0] - 1) as f64;
        let hy = if self.dim() == 2 {
            (hi[1] - lo[1]) / (self.n[1] - 1) as f64
        } else {
            0.0
        };
        [hx, hy]
    }

    /// Largest spacing over the active axes.
    pub fn h(&self) -> f64 {
        let h = self.spacing();
        h[0].max(h[1])
    }

    pub fn diameter(&self) -> f64 {
        let (lo, hi) = (self.lo(), self.hi());
        norm([hi[0] - lo[0], hi[1] - lo[1]])
    }

    pub fn measure(&self) -> f64 {
        let (lo, hi) = (self.lo(), self.hi());
        match self.shape {
            Shape::Interval { .. } => hi[0] - lo[0],
            Shape::Rectangle { .. } => (hi[0] - lo[0]) * (hi[1] - lo[1]),
        }
    }

    #[inline]
    pub fn index(&self, ix: usize, iy: usize) -> usize {
        iy * self.n[0] + ix
    }

    #[inline]
    pub fn coords(&self, i: usize) -> (usize, usize) {
        (i % self.n[0], i / self.n[0])
    }

    fn axis_coord(&self, axis: usize, j: usize) -> f64 {
        let (lo, hi) = (self.lo()[axis], self.hi()[axis]);
        let n = self.n[axis];
        if j == n - 1 {
            hi
        } else {
            lo + (hi - lo) * j as f64 / (n - 1) as f64
        }
    }

    pub fn node(&self, i: usize) -> Point {
        let (ix, iy) = self.coords(i);
        let x = self.axis_coord(0, ix);
        let y = if self.dim() == 2 { self.axis_coord(1, iy) } else { 0.0 };
        [x, y]
    }

    pub fn nodes(&self) -> Vec<Point> {
        (0..self.len()).map(|i| self.node(i)).collect()
    }

    /// Closed inside-test for the closure of the domain.
    pub fn contains(&self, p: Point) -> bool {
        let (lo, hi) = (self.lo(), self.hi());
        let inx = p[0] >= lo[0] && p[0] <= hi[0];
        match self.shape {
            Shape::Interval { .. } => inx,
            Shape::Rectangle { .. } => inx && p[1] >= lo[1] && p[1] <= hi[1],
        }
    }

    pub fn is_boundary_node(&self, i: usize) -> bool {
        let (ix, iy) = self.coords(i);
        let onx = ix == 0 || ix == self.n[0] - 1;
        if self.dim() == 1 {
            onx
        } else {
            onx || iy == 0 || iy == self.n[1] - 1
        }
    }

    /// Outer unit normal of the face closest to `p`. At a corner the first
    /// face in the order (x-lo, x-hi, y-lo, y-hi) at minimal distance wins.
    pub fn nearest_face_normal(&self, p: Point) -> Point {
        let (lo, hi) = (self.lo(), self.hi());
        let mut cands = vec![
            ((p[0] - lo[0]).abs(), [-1.0, 0.0]),
            ((hi[0] - p[0]).abs(), [1.0, 0.0]),
        ];
        if self.dim() == 2 {
            cands.push(((p[1] - lo[1]).abs(), [0.0, -1.0]));
            cands.push(((hi[1] - p[1]).abs(), [0.0, 1.0]));
        }
        let mut best = cands[0];
        for c in cands.into_iter().skip(1) {
            if c.0 < best.0 {
                best = c;
            }
        }
        best.1
    }

    /// Boundary mesh: in 1-D the two end nodes, in 2-D the lattice nodes of
    /// each edge (corners appear once per adjacent edge, each copy carrying
    /// that edge's normal and half a trapezoid weight).
    pub fn boundary_mesh(&self) -> Vec<BoundaryPoint> {
        let [nx, ny] = self.n;
        match self.shape {
            Shape::Interval { .. } => vec![
                BoundaryPoint {
                    node: 0,
                    position: self.node(0),
                    normal: [-1.0, 0.0],
                    weight: 1.0,
                },
                BoundaryPoint {
                    node: nx - 1,
                    position: self.node(nx - 1),
                    normal: [1.0, 0.0],
                    weight: 1.0,
                },
            ],
            Shape::Rectangle { .. } => {
                let [hx, hy] = self.spacing();
                let mut out = Vec::with_capacity(2 * (nx + ny));
                let mut edge = |nodes: Vec<usize>, normal: Point, h: f64| {
                    let last = nodes.len() - 1;
                    for (j, node) in nodes.into_iter().enumerate() {
                        let w = if j == 0 || j == last { 0.5 * h } else { h };
                        out.push(BoundaryPoint {
                            node,
                            position: self.node(node),
                            normal,
                            weight: w,
                        });
                    }
                };
                edge((0..nx).map(|ix| self.index(ix, 0)).collect(), [0.0, -1.0], hx);
                edge((0..ny).map(|iy| self.index(nx - 1, iy)).collect(), [1.0, 0.0], hy);
                edge((0..nx).map(|ix| self.index(ix, ny - 1)).collect(), [0.0, 1.0], hx);
                edge((0..ny).map(|iy| self.index(0, iy)).collect(), [-1.0, 0.0], hy);
                out
            }
        }
    }

    /// Trapezoidal weights for integrals over the domain.
    pub fn quadrature_weights(&self) -> Vec<f64> {
        let wx = trapezoid_weights(self.n[0], self.spacing()[0]);
        if self.dim() == 1 {
            return wx;
        }
        let wy = trapezoid_weights(self.n[1], self.spacing()[1]);
        let mut w = Vec::with_capacity(self.len());
        for wyj in &wy {
            for wxi in &wx {
                w.push(wxi * wyj);
            }
        }
        w
    }

    /// Multilinear interpolation of nodal values; points outside the box are
    /// clamped onto it.
    pub fn interpolate(&self, values: &[f64], p: Point) -> f64 {
        let (lo, h) = (self.lo(), self.spacing());
        let locate = |axis: usize| -> (usize, f64) {
            let n = self.n[axis];
            let s = ((p[axis] - lo[axis]) / h[axis]).clamp(0.0, (n - 1) as f64);
            let j = (s.floor() as usize).min(n - 2);
            (j, s - j as f64)
        };
        let (ix, fx) = locate(0);
        if self.dim() == 1 {
            return values[ix] * (1.0 - fx) + values[ix + 1] * fx;
        }
        let (iy, fy) = locate(1);
        let v00 = values[self.index(ix, iy)];
        let v10 = values[self.index(ix + 1, iy)];
        let v01 = values[self.index(ix, iy + 1)];
        let v11 = values[self.index(ix + 1, iy + 1)];
        (v00 * (1.0 - fx) + v10 * fx) * (1.0 - fy) + (v01 * (1.0 - fx) + v11 * fx) * fy
    }

    /// Gradient of nodal values: central differences inside, second-order
    /// one-sided differences on the edges.
    pub fn gradient(&self, values: &[f64]) -> Vec<Point> {
        let [nx, ny] = self.n;
        let [hx, hy] = self.spacing();
        (0..self.len())
            .map(|i| {
                let (ix, iy) = self.coords(i);
                let gx = diff1(|j| values[self.index(j, iy)], ix, nx, hx);
                let gy = if self.dim() == 2 {
                    diff1(|j| values[self.index(ix, j)], iy, ny, hy)
                } else {
                    0.0
                };
                [gx, gy]
            })
            .collect()
    }

    /// Largest second-difference quotient over interior lattice neighbours.
    pub fn max_second_difference(&self, values: &[f64]) -> f64 {
        let [nx, ny] = self.n;
        let [hx, hy] = self.spacing();
        let mut worst = 0.0_f64;
        for iy in 0..ny {
            for ix in 1..nx.saturating_sub(1) {
                let c = values[self.index(ix, iy)];
                let q = (values[self.index(ix + 1, iy)] - 2.0 * c + values[self.index(ix - 1, iy)])
                    / (hx * hx);
                worst = worst.max(q.abs());
            }
        }
        if self.dim() == 2 {
            for iy in 1..ny - 1 {
                for ix in 0..nx {
                    let c = values[self.index(ix, iy)];
                    let q = (values[self.index(ix, iy + 1)] - 2.0 * c
                        + values[self.index(ix, iy - 1)])
                        / (hy * hy);
                    worst = worst.max(q.abs());
                }
            }
        }
        worst
    }
}

/// Trapezoid weights on `n` uniformly spaced nodes.
pub fn trapezoid_weights(n: usize, h: f64) -> Vec<f64> {
    let mut w = vec![h; n];
    if n > 0 {
        w[0] = 0.5 * h;
        w[n - 1] = 0.5 * h;
    }
    w
}

/// First derivative at position `j` of a sampled line of `n` values.
#[inline]
pub fn diff1(v: impl Fn(usize) -> f64, j: usize, n: usize, h: f64) -> f64 {
    match n {
        0 | 1 => 0.0,
        2 => (v(1) - v(0)) / h,
        _ if j == 0 => (-3.0 * v(0) + 4.0 * v(1) - v(2)) / (2.0 * h),
        _ if j == n - 1 => (3.0 * v(n - 1) - 4.0 * v(n - 2) + v(n - 3)) / (2.0 * h),
        _ => (v(j + 1) - v(j - 1)) / (2.0 * h),
    }
}

/// Uniform time levels on `[0, T]` over a spatial lattice.
#[derive(Clone, Debug, PartialEq)]
pub struct SpaceTimeGrid {
    pub space: SpatialDomain,
    pub nt: usize,
    pub t_final: f64,
}

impl SpaceTimeGrid {
    pub fn new(space: SpatialDomain, nt: usize, t_final: f64) -> Result<Self> {
        if nt < 3 || !(t_final > 0.0) {
            return Err(LabError::Config(format!(
                "time grid needs T > 0 and at least 3 levels (got T = {t_final}, {nt})"
            )));
        }
        Ok(Self {
            space,
            nt,
            t_final,
        })
    }

    pub fn dt(&self) -> f64 {
        self.t_final / (self.nt - 1) as f64
    }

    pub fn time(&self, k: usize) -> f64 {
        if k == self.nt - 1 {
            self.t_final
        } else {
            self.t_final * k as f64 / (self.nt - 1) as f64
        }
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.nt).map(|k| self.time(k)).collect()
    }

    pub fn len(&self) -> usize {
        self.space.len() * self.nt
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, i: usize, k: usize) -> usize {
        k * self.space.len() + i
    }

    pub fn time_weights(&self) -> Vec<f64> {
        trapezoid_weights(self.nt, self.dt())
    }
}

/// Scalar samples on a space-time grid, time-major (`values[k * ns + i]`).
#[derive(Clone, Debug, PartialEq)]
pub struct GridFunction {
    pub grid: SpaceTimeGrid,
    pub values: Vec<f64>,
}

impl GridFunction {
    pub fn zeros(grid: &SpaceTimeGrid) -> Self {
        Self {
            grid: grid.clone(),
            values: vec![0.0; grid.len()],
        }
    }

    pub fn from_fn(grid: &SpaceTimeGrid, f: impl Fn(Point, f64) -> f64) -> Self {
        let ns = grid.space.len();
        let nodes = grid.space.nodes();
        let mut values = Vec::with_capacity(grid.len());
        for k in 0..grid.nt {
            let t = grid.time(k);
            for node in nodes.iter().take(ns) {
                values.push(f(*node, t));
            }
        }
        Self {
            grid: grid.clone(),
            values,
        }
    }

    pub fn from_values(grid: &SpaceTimeGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(LabError::Shape(format!(
                "{} values for a grid of {} nodes",
                values.len(),
                grid.len()
            )));
        }
        Ok(Self {
            grid: grid.clone(),
            values,
        })
    }

    #[inline]
    pub fn at(&self, i: usize, k: usize) -> f64 {
        self.values[self.grid.index(i, k)]
    }

    pub fn slice(&self, k: usize) -> &[f64] {
        let ns = self.grid.space.len();
        &self.values[k * ns..(k + 1) * ns]
    }

    /// Time derivative at every node.
    pub fn d_dt(&self) -> Vec<f64> {
        let ns = self.grid.space.len();
        let nt = self.grid.nt;
        let dt = self.grid.dt();
        let mut out = vec![0.0; self.values.len()];
        for k in 0..nt {
            for i in 0..ns {
                out[k * ns + i] = diff1(|j| self.values[j * ns + i], k, nt, dt);
            }
        }
        out
    }

    /// Spatial gradient at every node.
    pub fn gradient(&self) -> Vec<Point> {
        let mut out = Vec::with_capacity(self.values.len());
        for k in 0..self.grid.nt {
            out.extend(self.grid.space.gradient(self.slice(k)));
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// Trapezoidal integral of `g(node, level, value)` over Q.
    pub fn integrate(&self, g: impl Fn(usize, usize, f64) -> f64) -> f64 {
        let ws = self.grid.space.quadrature_weights();
        let wt = self.grid.time_weights();
        let ns = ws.len();
        let mut acc = 0.0;
        for (k, wk) in wt.iter().enumerate() {
            let mut row = 0.0;
            for (i, wi) in ws.iter().enumerate() {
                row += wi * g(i, k, self.values[k * ns + i]);
            }
            acc += wk * row;
        }
        acc
    }

    /// `||u||_{L^2(Q)}^2 + ||d_t u||_{L^2(Q)}^2`, square-rooted.
    pub fn h1_time_norm(&self) -> f64 {
        let dt = self.d_dt();
        let ns = self.grid.space.len();
        self.integrate(|i, k, v| v * v + dt[k * ns + i] * dt[k * ns + i])
            .sqrt()
    }
}

/// `L^2` norm over the masked part of the spatial lattice.
pub fn l2_masked(domain: &SpatialDomain, values: &[f64], mask: Option<&[bool]>) -> f64 {
    let w = domain.quadrature_weights();
    w.iter()
        .zip(values)
        .enumerate()
        .filter(|(i, _)| mask.is_none_or(|m| m[*i]))
        .map(|(_, (wi, v))| wi * v * v)
        .sum::<f64>()
        .sqrt()
}

/// `H^1` norm over the masked part of the lattice; the gradient is taken on
/// the full lattice before restriction.
pub fn h1_masked(domain: &SpatialDomain, values: &[f64], mask: Option<&[bool]>) -> f64 {
    let w = domain.quadrature_weights();
    let g = domain.gradient(values);
    (0..values.len())
        .filter(|i| mask.is_none_or(|m| m[*i]))
        .map(|i| w[i] * (values[i] * values[i] + dot(g[i], g[i])))
        .sum::<f64>()
        .sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_integrates_to_measure() {
        let d = SpatialDomain::interval(0.0, 1.0, 17).unwrap();
        let s: f64 = d.quadrature_weights().iter().sum();
        assert!((s - 1.0).abs() < 1e-12);
        let r = SpatialDomain::rectangle([-1.0, 0.0], [1.0, 0.5], [9, 7]).unwrap();
        let s: f64 = r.quadrature_weights().iter().sum();
        assert!((s - r.measure()).abs() < 1e-12);
    }

    #[test]
    fn boundary_mesh_lies_on_boundary_with_unit_normals() {
        let r = SpatialDomain::rectangle([-1.0, -1.0], [1.0, 1.0], [11, 13]).unwrap();
        let mesh = r.boundary_mesh();
        let perim: f64 = mesh.iter().map(|b| b.weight).sum();
        assert!((perim - 8.0).abs() < 1e-12);
        for b in &mesh {
            assert!((norm(b.normal) - 1.0).abs() < 1e-12);
            let p = b.position;
            let d = (p[0].abs() - 1.0).abs().min((p[1].abs() - 1.0).abs());
            assert!(d < 1e-12, "{p:?}");
        }
        let i = SpatialDomain::interval(0.0, 1.0, 5).unwrap().boundary_mesh();
        assert_eq!(i[0].normal, [-1.0, 0.0]);
        assert_eq!(i[1].position, [1.0, 0.0]);
    }

    #[test]
    fn differences_are_exact_on_quadratics() {
        let d = SpatialDomain::rectangle([0.0, 0.0], [1.0, 2.0], [6, 5]).unwrap();
        let vals: Vec<f64> = d
            .nodes()
            .iter()
            .map(|p| p[0] * p[0] + 3.0 * p[0] * p[1] - p[1] * p[1])
            .collect();
        for (p, g) in d.nodes().iter().zip(d.gradient(&vals)) {
            assert!((g[0] - (2.0 * p[0] + 3.0 * p[1])).abs() < 1e-12);
            assert!((g[1] - (3.0 * p[0] - 2.0 * p[1])).abs() < 1e-12);
        }
    }

    #[test]
    fn interpolation_reproduces_bilinear() {
        let d = SpatialDomain::rectangle([0.0, 0.0], [1.0, 1.0], [5, 5]).unwrap();
        let vals: Vec<f64> = d.nodes().iter().map(|p| 1.0 + p[0] - 2.0 * p[1] + p[0] * p[1]).collect();
        let p = [0.33, 0.71];
        let want = 1.0 + p[0] - 2.0 * p[1] + p[0] * p[1];
        assert!((d.interpolate(&vals, p) - want).abs() < 1e-12);
    }

    #[test]
    fn last_time_level_is_exactly_t_final() {
        let g = SpaceTimeGrid::new(SpatialDomain::interval(0.0, 1.0, 3).unwrap(), 1001, 2.5).unwrap();
        assert_eq!(g.time(1000), 2.5);
    }
}
