use serde::Serialize;

use crate::geometry::field::SpaceTimeField;
use crate::geometry::weight::WeightField;
use crate::grid::{dot, BoundaryPoint, Point, SpaceTimeGrid};

/// A subset of the lateral boundary `dOmega x [0, T]`, sampled on the
/// boundary mesh times the time levels (`mask[k * nb + b]`).
#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryMask {
    pub points: Vec<BoundaryPoint>,
    pub nt: usize,
    pub mask: Vec<bool>,
}

impl BoundaryMask {
    pub fn nb(&self) -> usize {
        self.points.len()
    }

    #[inline]
    pub fn get(&self, b: usize, k: usize) -> bool {
        self.mask[k * self.points.len() + b]
    }

    pub fn is_empty(&self) -> bool {
        !self.mask.iter().any(|m| *m)
    }

    pub fn complement(&self) -> Self {
        Self {
            points: self.points.clone(),
            nt: self.nt,
            mask: self.mask.iter().map(|m| !m).collect(),
        }
    }

    /// Time-independent subset `Gamma x [0, T]` selected by a predicate on
    /// boundary points.
    pub fn from_predicate(grid: &SpaceTimeGrid, pred: impl Fn(&BoundaryPoint) -> bool) -> Self {
        let points = grid.space.boundary_mesh();
        let row: Vec<bool> = points.iter().map(&pred).collect();
        let mut mask = Vec::with_capacity(row.len() * grid.nt);
        for _ in 0..grid.nt {
            mask.extend_from_slice(&row);
        }
        Self {
            points,
            nt: grid.nt,
            mask,
        }
    }

    /// Whether lattice node `node` is (a copy of) a masked boundary point at
    /// level `k`.
    pub fn covers_node(&self, node: usize, k: usize) -> bool {
        self.points
            .iter()
            .enumerate()
            .any(|(b, p)| p.node == node && self.get(b, k))
    }
}

/// Outflow part of the lateral boundary: `A(x,t) . nu(x) > 0`.
pub fn compute_sigma_plus(field: &SpaceTimeField, grid: &SpaceTimeGrid) -> BoundaryMask {
    let points = grid.space.boundary_mesh();
    let mut mask = Vec::with_capacity(points.len() * grid.nt);
    for k in 0..grid.nt {
        let t = grid.time(k);
        mask.extend(points.iter().map(|b| dot(field.a(b.position, t), b.normal) > 0.0));
    }
    BoundaryMask {
        points,
        nt: grid.nt,
        mask,
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Violation {
    pub point: Point,
    pub t: f64,
    pub phi: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct GeometricReport {
    pub holds: bool,
    /// False when no point of the boundary of Q has `phi > eps*`.
    pub nonempty: bool,
    pub violations: Vec<Violation>,
}

/// Checks that every point of `dQ` with `phi > eps_star` is observed, either
/// through `observed` or as part of the initial slice.
///
/// `dQ` is sampled as the lateral mesh at every level plus the whole
/// lattice at `t = 0` and `t = T`. The `t = 0` level counts as observed.
pub fn check_geometric_condition(
    weight: &WeightField,
    eps_star: f64,
    observed: &BoundaryMask,
    grid: &SpaceTimeGrid,
) -> GeometricReport {
    let mut nonempty = false;
    let mut violations = Vec::new();
    let last = grid.nt - 1;
    let mut visit = |node: usize, k: usize, covered: bool| {
        let t = grid.time(k);
        let phi = weight.phi_node(node, t);
        if phi > eps_star {
            nonempty = true;
            if !covered {
                violations.push(Violation {
                    point: grid.space.node(node),
                    t,
                    phi,
                });
            }
        }
    };
    for k in 1..last {
        for (b, p) in observed.points.iter().enumerate() {
            visit(p.node, k, observed.get(b, k));
        }
    }
    for node in 0..grid.space.len() {
        visit(node, 0, true);
        visit(node, last, observed.covers_node(node, last));
    }
    GeometricReport {
        holds: nonempty && violations.is_empty(),
        nonempty,
        violations,
    }
}
