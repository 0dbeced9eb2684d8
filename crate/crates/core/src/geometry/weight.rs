//! Backward-arclength weight `phi0`, the space-time weight
//! `phi = phi0 - beta t` and its super-level regions.

use serde::Serialize;

use crate::error::{LabError, Result};
use crate::geometry::curve::{trace_backward, trace_half, CurveExit, TraceSettings};
use crate::geometry::field::SpaceTimeField;
use crate::grid::{Point, SpaceTimeGrid, SpatialDomain};
use crate::par;

/// Time levels sampled when estimating `sup A0` over `Omega x (0, T)`.
const SUP_LEVELS: usize = 129;

#[derive(Clone, Debug, Serialize)]
pub struct FailurePoint {
    pub node: usize,
    pub point: Point,
    pub backward: CurveExit,
    pub forward: CurveExit,
}

#[derive(Clone, Debug, Serialize)]
pub struct DissipativenessReport {
    pub dissipative: bool,
    pub failures: Vec<FailurePoint>,
    /// Entry parameter `sigma_-` at every node (NaN where the backward curve
    /// never exits).
    pub sigma_minus: Vec<f64>,
    /// Largest second-difference quotient of `sigma_-`; a kink detector, not
    /// a certificate of any Sobolev regularity.
    pub smoothness_proxy: f64,
}

/// Traces both halves of the curve through every lattice node.
pub fn check_dissipative(
    field: &SpaceTimeField,
    domain: &SpatialDomain,
    settings: &TraceSettings,
) -> Result<DissipativenessReport> {
    let limit = 0.1 * field.rho / field.m_bound;
    if settings.ode_step > limit {
        return Err(LabError::StepTooLarge {
            step: settings.ode_step,
            limit,
        });
    }
    let nodes = domain.nodes();
    let traced: Vec<(f64, CurveExit, CurveExit)> = par::map(&nodes, |&x| {
        let back = trace_half(field, domain, x, -1.0, settings, false);
        let fwd = trace_half(field, domain, x, 1.0, settings, false);
        (-back.sigma, back.exit, fwd.exit)
    });

    let mut failures = Vec::new();
    let mut sigma_minus = Vec::with_capacity(nodes.len());
    for (i, (sm, b, f)) in traced.iter().enumerate() {
        let ok_b = *b == CurveExit::HitBoundary;
        let ok_f = *f == CurveExit::HitBoundary;
        sigma_minus.push(if ok_b { *sm } else { f64::NAN });
        if !(ok_b && ok_f) {
            failures.push(FailurePoint {
                node: i,
                point: nodes[i],
                backward: *b,
                forward: *f,
            });
        }
    }
    let smoothness_proxy = if failures.is_empty() {
        domain.max_second_difference(&sigma_minus)
    } else {
        f64::NAN
    };
    Ok(DissipativenessReport {
        dissipative: failures.is_empty(),
        failures,
        sigma_minus,
        smoothness_proxy,
    })
}

/// Sampled weight. `beta` is unset until [`make_weight`] installs it.
#[derive(Clone, Debug)]
pub struct WeightField {
    pub domain: SpatialDomain,
    pub phi0: Vec<f64>,
    pub sigma_minus: Vec<f64>,
    pub beta: Option<f64>,
    /// `rho / sup A0`, recorded by [`make_weight`].
    pub beta_bound: Option<f64>,
}

impl WeightField {
    /// Weight from explicit nodal values (used for closed-form checks).
    pub fn from_values(domain: SpatialDomain, phi0: Vec<f64>) -> Self {
        let n = phi0.len();
        Self {
            domain,
            phi0,
            sigma_minus: vec![f64::NAN; n],
            beta: None,
            beta_bound: None,
        }
    }

    pub fn beta(&self) -> f64 {
        self.beta.unwrap_or(0.0)
    }

    pub fn is_admissible(&self) -> bool {
        match (self.beta, self.beta_bound) {
            (Some(b), Some(bound)) => b > 0.0 && b < bound,
            _ => false,
        }
    }

    pub fn max_phi0(&self) -> f64 {
        self.phi0.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn phi0_at(&self, x: Point) -> f64 {
        self.domain.interpolate(&self.phi0, x)
    }

    pub fn phi(&self, x: Point, t: f64) -> f64 {
        self.phi0_at(x) - self.beta() * t
    }

    #[inline]
    pub fn phi_node(&self, i: usize, t: f64) -> f64 {
        self.phi0[i] - self.beta() * t
    }

    pub fn omega_mask(&self, eps: f64) -> Vec<bool> {
        self.phi0.iter().map(|p| *p > eps).collect()
    }

    pub fn region_mask(&self, eps: f64, grid: &SpaceTimeGrid) -> RegionMask {
        let omega = self.omega_mask(eps);
        let mut q = Vec::with_capacity(grid.len());
        for k in 0..grid.nt {
            let t = grid.time(k);
            q.extend((0..self.phi0.len()).map(|i| self.phi_node(i, t) > eps));
        }
        RegionMask { eps, omega, q }
    }
}

/// `Omega_eps = {phi0 > eps}` on the lattice and `Q_eps = {phi > eps}` on the
/// space-time grid (time-major).
#[derive(Clone, Debug, PartialEq)]
pub struct RegionMask {
    pub eps: f64,
    pub omega: Vec<bool>,
    pub q: Vec<bool>,
}

/// Backward arclength at every lattice node.
pub fn compute_phi0(
    field: &SpaceTimeField,
    domain: &SpatialDomain,
    settings: &TraceSettings,
) -> Result<WeightField> {
    let limit = 0.1 * field.rho / field.m_bound;
    if settings.ode_step > limit {
        return Err(LabError::StepTooLarge {
            step: settings.ode_step,
            limit,
        });
    }
    let nodes = domain.nodes();
    let traced = par::map(&nodes, |&x| trace_backward(field, domain, x, settings));
    let failures = traced
        .iter()
        .filter(|(_, _, exit)| *exit != CurveExit::HitBoundary)
        .count();
    if failures > 0 {
        return Err(LabError::NotDissipative { failures });
    }
    Ok(WeightField {
        domain: domain.clone(),
        phi0: traced.iter().map(|(_, len, _)| *len).collect(),
        sigma_minus: traced.iter().map(|(s, _, _)| *s).collect(),
        beta: None,
        beta_bound: None,
    })
}

/// Installs `beta`, rejecting values outside `0 < beta < rho / sup A0`.
pub fn make_weight(mut weight: WeightField, field: &SpaceTimeField, beta: f64) -> Result<WeightField> {
    let bound = field.rho / field.sup_a0(&weight.domain, SUP_LEVELS);
    if !(beta > 0.0 && beta < bound) {
        return Err(LabError::InvalidBeta { beta, bound });
    }
    weight.beta = Some(beta);
    weight.beta_bound = Some(bound);
    Ok(weight)
}
