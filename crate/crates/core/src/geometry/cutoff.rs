use crate::error::{LabError, Result};
use crate::geometry::field::SpaceTimeField;
use crate::geometry::weight::WeightField;
use crate::grid::{dot, Point};

/// Quintic smoothstep `6r^5 - 15r^4 + 10r^3`, clamped to `[0, 1]`.
#[inline]
pub fn smoothstep(r: f64) -> f64 {
    if r <= 0.0 {
        0.0
    } else if r >= 1.0 {
        1.0
    } else {
        r * r * r * (r * (6.0 * r - 15.0) + 10.0)
    }
}

#[inline]
pub fn smoothstep_deriv(r: f64) -> f64 {
    if r <= 0.0 || r >= 1.0 {
        0.0
    } else {
        30.0 * r * r * (1.0 - r) * (1.0 - r)
    }
}

/// `chi = S((phi - eps) / eps)`: one on `{phi >= 2 eps}`, zero on
/// `{phi <= eps}`.
#[derive(Clone, Debug)]
pub struct CutoffField {
    pub eps: f64,
    weight: WeightField,
    grad_phi0: Vec<Point>,
}

impl CutoffField {
    fn ratio(&self, x: Point, t: f64) -> f64 {
        (self.weight.phi(x, t) - self.eps) / self.eps
    }

    pub fn value(&self, x: Point, t: f64) -> f64 {
        smoothstep(self.ratio(x, t))
    }

    pub fn dt(&self, x: Point, t: f64) -> f64 {
        smoothstep_deriv(self.ratio(x, t)) / self.eps * (-self.weight.beta())
    }

    pub fn grad(&self, x: Point) -> Point {
        // the time dependence enters only through r; callers pass t separately
        let d = &self.weight.domain;
        [
            d.interpolate(&self.grad_phi0.iter().map(|g| g[0]).collect::<Vec<_>>(), x),
            d.interpolate(&self.grad_phi0.iter().map(|g| g[1]).collect::<Vec<_>>(), x),
        ]
    }

    pub fn grad_at(&self, x: Point, t: f64) -> Point {
        let s = smoothstep_deriv(self.ratio(x, t)) / self.eps;
        if s == 0.0 {
            return [0.0, 0.0];
        }
        let g = self.grad(x);
        [s * g[0], s * g[1]]
    }

    /// `P chi = A0 d_t chi + A . grad chi`.
    pub fn p_chi(&self, field: &SpaceTimeField, x: Point, t: f64) -> f64 {
        let s = smoothstep_deriv(self.ratio(x, t)) / self.eps;
        if s == 0.0 {
            return 0.0;
        }
        let g = self.grad(x);
        s * (field.a0(x, t) * (-self.weight.beta()) + dot(field.a(x, t), g))
    }
}

pub fn build_cutoff(weight: &WeightField, eps: f64) -> Result<CutoffField> {
    if !(eps > 0.0) || weight.max_phi0() <= 2.0 * eps {
        return Err(LabError::EmptyPlateau { eps });
    }
    Ok(CutoffField {
        eps,
        grad_phi0: weight.domain.gradient(&weight.phi0),
        weight: weight.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::SpatialDomain;

    fn cutoff(eps: f64) -> Result<CutoffField> {
        let d = SpatialDomain::interval(0.0, 1.0, 101).unwrap();
        let phi0 = d.nodes().iter().map(|p| p[0]).collect();
        let mut w = WeightField::from_values(d, phi0);
        w.beta = Some(0.5);
        build_cutoff(&w, eps)
    }

    #[test]
    fn plateau_band_and_midpoint() {
        let c = cutoff(0.2).unwrap();
        assert_eq!(c.value([0.5, 0.0], 0.0), 1.0);
        assert_eq!(c.value([0.1, 0.0], 0.0), 0.0);
        assert!((c.value([0.3, 0.0], 0.0) - 0.5).abs() < 1e-12);
        assert!((smoothstep(0.5) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn empty_plateau() {
        assert!(matches!(cutoff(0.5), Err(LabError::EmptyPlateau { .. })));
        assert!(matches!(cutoff(0.0), Err(LabError::EmptyPlateau { .. })));
    }

    #[test]
    fn p_chi_lives_in_the_band() {
        let c = cutoff(0.2).unwrap();
        let f = SpaceTimeField::constant(1, 1.0, [1.0, 0.0], 1.0, 3.0, 1.0);
        for j in 0..=50 {
            for k in 0..=10 {
                let (x, t) = (j as f64 / 50.0, k as f64 / 10.0);
                let chi = c.value([x, 0.0], t);
                let pc = c.p_chi(&f, [x, 0.0], t);
                if chi == 0.0 || chi == 1.0 {
                    assert_eq!(pc, 0.0);
                }
                assert!((0.0..=1.0).contains(&chi));
            }
        }
        // inside the band: P chi = S'(r)/eps * (1 - beta) with grad phi0 = 1
        let r: f64 = 0.25;
        let x = 0.2 * (1.0 + r);
        let want = smoothstep_deriv(r) / 0.2 * 0.5;
        assert!((c.p_chi(&f, [x, 0.0], 0.0) - want).abs() < 1e-9);
    }
}
