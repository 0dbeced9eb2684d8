//! Integral curves of the frozen field `A(., 0)`.
//!
//! Curves are integrated with classical RK4 in the curve parameter. The
//! arclength `int |c'|` rides along as an extra ODE component so that it is
//! accumulated by the same one-step method.

use serde::Serialize;

use crate::error::{LabError, Result};
use crate::geometry::field::SpaceTimeField;
use crate::grid::{dot, norm, Point, SpatialDomain};

/// Bisection stops once the bracketing parameter interval is this short.
pub const EXIT_BISECTION_TOL: f64 = 1e-13;
/// Minimal cosine between tangents for a return to count as a closed orbit.
pub const CLOSED_ORBIT_COS: f64 = 0.99;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CurveExit {
    /// The curve reached the boundary.
    HitBoundary,
    /// Arclength budget consumed before reaching the boundary.
    BudgetExhausted,
    /// The curve came back to its base point with the same heading.
    ClosedOrbit,
    /// The field vanishes at the base point; the curve is a single point.
    Stagnation,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceSettings {
    pub ode_step: f64,
    pub length_budget: f64,
}

impl TraceSettings {
    /// Step at half the reliability limit `0.1 rho / M` (capped at 0.01) and a
    /// budget of ten domain diameters.
    pub fn for_field(field: &SpaceTimeField, domain: &SpatialDomain) -> Self {
        Self {
            ode_step: (0.05 * field.rho / field.m_bound).min(0.01),
            length_budget: 10.0 * domain.diameter(),
        }
    }

    fn check(&self, field: &SpaceTimeField) -> Result<()> {
        let limit = 0.1 * field.rho / field.m_bound;
        if !(self.ode_step > 0.0) || self.ode_step > limit {
            return Err(LabError::StepTooLarge {
                step: self.ode_step,
                limit,
            });
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct IntegralCurve {
    pub base: Point,
    /// `(sigma, c(sigma))`, increasing in `sigma`.
    pub samples: Vec<(f64, Point)>,
    pub sigma_minus: f64,
    pub sigma_plus: f64,
    pub exit_backward: CurveExit,
    pub exit_forward: CurveExit,
    /// Arclength of the backward piece, `int_{sigma_-}^0 |c'|`.
    pub length_backward: f64,
    pub length_forward: f64,
}

impl IntegralCurve {
    pub fn is_maximal_finite(&self) -> bool {
        self.exit_backward == CurveExit::HitBoundary && self.exit_forward == CurveExit::HitBoundary
    }
}

/// One direction of a trace.
#[derive(Clone, Debug)]
pub(crate) struct HalfTrace {
    pub sigma: f64,
    pub length: f64,
    pub exit: CurveExit,
    pub points: Vec<Point>,
    pub steps: Vec<f64>,
}

#[inline]
fn rk4(field: &SpaceTimeField, sign: f64, c: Point, len: f64, h: f64) -> (Point, f64) {
    let f = |p: Point| {
        let a = field.a(p, 0.0);
        ([sign * a[0], sign * a[1]], norm(a))
    };
    let (k1, l1) = f(c);
    let (k2, l2) = f([c[0] + 0.5 * h * k1[0], c[1] + 0.5 * h * k1[1]]);
    let (k3, l3) = f([c[0] + 0.5 * h * k2[0], c[1] + 0.5 * h * k2[1]]);
    let (k4, l4) = f([c[0] + h * k3[0], c[1] + h * k3[1]]);
    (
        [
            c[0] + h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
            c[1] + h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
        ],
        len + h / 6.0 * (l1 + 2.0 * l2 + 2.0 * l3 + l4),
    )
}

fn segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let ab = [b[0] - a[0], b[1] - a[1]];
    let ap = [p[0] - a[0], p[1] - a[1]];
    let l2 = dot(ab, ab);
    let s = if l2 > 0.0 { (dot(ap, ab) / l2).clamp(0.0, 1.0) } else { 0.0 };
    norm([ap[0] - s * ab[0], ap[1] - s * ab[1]])
}

pub(crate) fn trace_half(
    field: &SpaceTimeField,
    domain: &SpatialDomain,
    x: Point,
    sign: f64,
    settings: &TraceSettings,
    record: bool,
) -> HalfTrace {
    let h = settings.ode_step;
    let a_base = field.a(x, 0.0);
    let mut out = HalfTrace {
        sigma: 0.0,
        length: 0.0,
        exit: CurveExit::BudgetExhausted,
        points: Vec::new(),
        steps: Vec::new(),
    };
    if norm(a_base) < 1e-14 {
        out.exit = CurveExit::Stagnation;
        return out;
    }
    let sigma_cap = settings.length_budget / field.rho.max(1e-6);
    let mut c = x;
    let mut len = 0.0;
    let mut left_base = false;
    loop {
        if len >= settings.length_budget || out.sigma >= sigma_cap {
            out.exit = CurveExit::BudgetExhausted;
            return out;
        }
        let (next, next_len) = rk4(field, sign, c, len, h);
        if !domain.contains(next) {
            let (mut lo, mut hi) = (0.0, h);
            while hi - lo > EXIT_BISECTION_TOL {
                let mid = 0.5 * (lo + hi);
                if domain.contains(rk4(field, sign, c, len, mid).0) {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            if lo > 0.0 {
                let (end, end_len) = rk4(field, sign, c, len, lo);
                out.sigma += lo;
                out.length = end_len;
                if record {
                    out.points.push(end);
                    out.steps.push(lo);
                }
            } else {
                out.length = len;
            }
            out.exit = CurveExit::HitBoundary;
            return out;
        }
        let prev = c;
        c = next;
        len = next_len;
        out.sigma += h;
        out.length = len;
        if record {
            out.points.push(c);
            out.steps.push(h);
        }
        let dist = norm([c[0] - x[0], c[1] - x[1]]);
        if !left_base {
            left_base = dist > h;
        } else if segment_distance(x, prev, c) <= 0.5 * h {
            let a_here = field.a(c, 0.0);
            let cos = dot(a_here, a_base) / (norm(a_here) * norm(a_base));
            if cos > CLOSED_ORBIT_COS {
                out.exit = CurveExit::ClosedOrbit;
                return out;
            }
        }
    }
}

/// Maximal integral curve of `A(., 0)` through `x`.
pub fn trace_integral_curve(
    field: &SpaceTimeField,
    domain: &SpatialDomain,
    x: Point,
    settings: &TraceSettings,
) -> Result<IntegralCurve> {
    settings.check(field)?;
    if !domain.contains(x) {
        return Err(LabError::OutsideDomain { point: x });
    }
    let back = trace_half(field, domain, x, -1.0, settings, true);
    let fwd = trace_half(field, domain, x, 1.0, settings, true);

    let mut samples = Vec::with_capacity(back.points.len() + fwd.points.len() + 1);
    // backward points are stored in tracing order; walk them from the far end
    let mut back_sigmas = Vec::with_capacity(back.points.len());
    let mut acc = 0.0;
    for st in &back.steps {
        acc += st;
        back_sigmas.push(-acc);
    }
    for (p, sg) in back.points.iter().zip(&back_sigmas).rev() {
        samples.push((*sg, *p));
    }
    samples.push((0.0, x));
    let mut acc = 0.0;
    for (p, st) in fwd.points.iter().zip(&fwd.steps) {
        acc += st;
        samples.push((acc, *p));
    }
    Ok(IntegralCurve {
        base: x,
        samples,
        sigma_minus: -back.sigma,
        sigma_plus: fwd.sigma,
        exit_backward: back.exit,
        exit_forward: fwd.exit,
        length_backward: back.length,
        length_forward: fwd.length,
    })
}

/// Backward piece only: `(sigma_-, arclength, exit)`.
pub(crate) fn trace_backward(
    field: &SpaceTimeField,
    domain: &SpatialDomain,
    x: Point,
    settings: &TraceSettings,
) -> (f64, f64, CurveExit) {
    let back = trace_half(field, domain, x, -1.0, settings, false);
    (-back.sigma, back.length, back.exit)
}
