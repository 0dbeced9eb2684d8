//! The four integrals for `u = (T - t) sin(pi x)` on the unit interval with
//! `A0 = A = 1`, `phi = x - t / 2`, `T = 2.5`, `s = 1`, against a
//! Gauss-Legendre evaluation of the closed-form integrands.

use std::f64::consts::PI;
use std::num::NonZeroUsize;

use carleman_lab::carleman::evaluate_carleman;
use carleman_lab::geometry::boundary::compute_sigma_plus;
use carleman_lab::geometry::curve::TraceSettings;
use carleman_lab::geometry::field::{ScalarFn, SpaceTimeField};
use carleman_lab::geometry::weight::{compute_phi0, make_weight};
use carleman_lab::grid::{GridFunction, SpaceTimeGrid, SpatialDomain};
use gauss_quad::GaussLegendre;

const T: f64 = 2.5;
const BETA: f64 = 0.5;

// values of the lattice quadrature at 401 x 1001
const PINNED: [f64; 3] = [4.475437939332179, 9.064476650925068, 59.04097701586463];

fn oracle(s: f64) -> [f64; 4] {
    let gl = GaussLegendre::new(NonZeroUsize::new(60).unwrap());
    let u = |x: f64, t: f64| (T - t) * (PI * x).sin();
    let pu = |x: f64, t: f64| -(PI * x).sin() + (T - t) * PI * (PI * x).cos();
    let w = |x: f64, t: f64| (2.0 * s * (x - BETA * t)).exp();
    let q = |g: &dyn Fn(f64, f64) -> f64| gl.integrate(0.0, T, |t| gl.integrate(0.0, 1.0, |x| g(x, t)));
    [
        s * s * q(&|x, t| w(x, t) * u(x, t).powi(2)),
        s * gl.integrate(0.0, 1.0, |x| w(x, 0.0) * u(x, 0.0).powi(2)),
        q(&|x, t| w(x, t) * pu(x, t).powi(2)),
        s * gl.integrate(0.0, T, |t| w(1.0, t) * u(1.0, t).powi(2)),
    ]
}

fn lattice(nx: usize, nt: usize, s: f64) -> [f64; 4] {
    let field = SpaceTimeField::constant(1, 1.0, [1.0, 0.0], 1.0, 3.0, T);
    let d = SpatialDomain::interval(0.0, 1.0, nx).unwrap();
    let grid = SpaceTimeGrid::new(d.clone(), nt, T).unwrap();
    let phi0 = compute_phi0(&field, &d, &TraceSettings::for_field(&field, &d)).unwrap();
    let w = make_weight(phi0, &field, BETA).unwrap();
    let u = GridFunction::from_fn(&grid, |x, t| (T - t) * (PI * x[0]).sin());
    let p: ScalarFn = std::sync::Arc::new(|_, _| 0.0);
    evaluate_carleman(&u, &field, &p, &w, &compute_sigma_plus(&field, &grid), s)
        .unwrap()
        .unshifted()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

#[test]
fn pinned_values_at_401_by_1001() {
    let v = lattice(401, 1001, 1.0);
    for k in 0..3 {
        assert!(v[k] > 0.0 && rel(v[k], PINNED[k]) < 1e-6, "term {k}: {} vs {}", v[k], PINNED[k]);
    }
    // u(1, t) = sin(pi) (T - t) vanishes up to rounding
    assert!(v[3] >= 0.0 && v[3] < 1e-28);
}

#[test]
fn lattice_quadrature_converges_to_closed_form() {
    let exact = oracle(1.0);
    let fine = lattice(401, 1001, 1.0);
    let coarse = lattice(201, 501, 1.0);
    for k in 0..3 {
        let (ef, ec) = (rel(fine[k], exact[k]), rel(coarse[k], exact[k]));
        assert!(ef < 1e-4, "term {k}: relative error {ef:e}");
        // second order, unless already at rounding level
        assert!(ef < 1e-9 || ec / ef > 3.5, "term {k}: {ec:e} -> {ef:e}");
    }
    assert!(exact[3] < 1e-28);
}
