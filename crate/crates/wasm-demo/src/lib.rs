//! Browser bindings: the weight of a 2-D drift field, the ratio curve of the
//! weighted estimate on the unit interval and forward solutions `u(x, t)`.
//!
//! Every export has a plain-Rust twin returning `Result<_, String>` so the
//! numerics can be exercised natively.

use std::f64::consts::PI;

use wasm_bindgen::prelude::*;

use carleman_lab::carleman::{sweep_s, test_family};
use carleman_lab::forward::{solve_characteristics, Inflow, Profile, SourceSpec};
use carleman_lab::geometry::boundary::compute_sigma_plus;
use carleman_lab::geometry::curve::TraceSettings;
use carleman_lab::geometry::field::SpaceTimeField;
use carleman_lab::geometry::weight::{compute_phi0, make_weight};
use carleman_lab::{GridFunction, SpaceTimeGrid, SpatialDomain};

pub const S_GRID: [f64; 7] = [1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0];

fn text<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

/// `phi0` on an `n x n` lattice of the unit square for the drift
/// `(cos a, sin a + bend x)`, row-major in `y`.
pub fn phi0_grid(angle: f64, bend: f64, n: usize) -> Result<Vec<f64>, String> {
    if !(0.0..=PI / 2.0).contains(&angle) || bend < 0.0 {
        return Err("angle must lie in [0, pi/2] and bend must be nonnegative".into());
    }
    let (c, s) = (angle.cos(), angle.sin());
    let m = 1.0 + bend;
    let field = SpaceTimeField::new(2, |_, _| 1.0, move |x, _| [c, s + bend * x[0]], 0.5 * c.max(s), m, 1.0)
        .time_independent();
    let domain = SpatialDomain::rectangle([0.0, 0.0], [1.0, 1.0], [n, n]).map_err(text)?;
    let w = compute_phi0(&field, &domain, &TraceSettings::for_field(&field, &domain)).map_err(text)?;
    Ok(w.phi0)
}

/// Ratios `(LHS1 + LHS2) / (RHS1 + RHS2)` over [`S_GRID`] for `members`
/// seeded test functions on the unit interval with `A0 = A = 1`, observed
/// at `x = 1`; row-major per member.
pub fn ratio_curves(beta: f64, members: usize, seed: u64, t_final: f64) -> Result<Vec<f64>, String> {
    let field = SpaceTimeField::constant(1, 1.0, [1.0, 0.0], 1.0, 3.0, t_final);
    let domain = SpatialDomain::interval(0.0, 1.0, 81).map_err(text)?;
    let grid = SpaceTimeGrid::new(domain.clone(), 201, t_final).map_err(text)?;
    let phi0 = compute_phi0(&field, &domain, &TraceSettings::for_field(&field, &domain)).map_err(text)?;
    let weight = make_weight(phi0, &field, beta).map_err(text)?;
    let family: Vec<GridFunction> = test_family(members.max(1), seed).iter().map(|m| m.sample(&grid)).collect();
    let p = std::sync::Arc::new(|_: carleman_lab::Point, _: f64| 0.0);
    let report = sweep_s(&family, &field, &(p as _), &weight, &compute_sigma_plus(&field, &grid), &S_GRID)
        .map_err(text)?;
    Ok((0..family.len()).flat_map(|m| report.ratios(m)).collect())
}

/// `u(x, t)` for `u_t + u_x + p u = amp sin(pi x)` from rest on the unit
/// interval with zero inflow, `nt` rows of `nx` values.
pub fn solution_grid(p: f64, amp: f64, nx: usize, nt: usize, t_final: f64) -> Result<Vec<f64>, String> {
    let field = SpaceTimeField::constant(1, 1.0, [1.0, 0.0], 1.0, 3.0, t_final);
    let grid = SpaceTimeGrid::new(SpatialDomain::interval(0.0, 1.0, nx).map_err(text)?, nt, t_final).map_err(text)?;
    let src = SourceSpec::new(
        move |_, _| p,
        |_, _| 1.0,
        Profile::function(move |x| amp * (PI * x[0]).sin()),
        1.0,
    );
    let u = solve_characteristics(&field, &src, &Profile::zero(), &Inflow::zero(), &grid, 1).map_err(text)?;
    Ok(u.values)
}

fn js(e: String) -> JsError {
    JsError::new(&e)
}

#[wasm_bindgen]
pub fn phi0_heatmap(angle: f64, bend: f64, n: usize) -> Result<Vec<f64>, JsError> {
    phi0_grid(angle, bend, n).map_err(js)
}

#[wasm_bindgen]
pub fn carleman_ratios(beta: f64, members: usize, seed: u64, t_final: f64) -> Result<Vec<f64>, JsError> {
    ratio_curves(beta, members, seed, t_final).map_err(js)
}

#[wasm_bindgen]
pub fn s_grid() -> Vec<f64> {
    S_GRID.to_vec()
}

#[wasm_bindgen]
pub fn forward_solution(p: f64, amp: f64, nx: usize, nt: usize, t_final: f64) -> Result<Vec<f64>, JsError> {
    solution_grid(p, amp, nx, nt, t_final).map_err(js)
}
