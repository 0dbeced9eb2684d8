use std::sync::Arc;

use proptest::prelude::*;

use carleman_lab::carleman::{evaluate_carleman, mass_fraction, test_family};
use carleman_lab::forward::{solve_characteristics, solve_forward, Inflow, Profile, SourceSpec};
use carleman_lab::geometry::boundary::compute_sigma_plus;
use carleman_lab::geometry::curve::TraceSettings;
use carleman_lab::geometry::cutoff::build_cutoff;
use carleman_lab::geometry::field::{ScalarFn, SpaceTimeField};
use carleman_lab::geometry::weight::{compute_phi0, make_weight, WeightField};
use carleman_lab::grid::{GridFunction, SpaceTimeGrid, SpatialDomain};
use carleman_lab::harness::Scenario;
use carleman_lab::inverse_coefficient::{
    bump, check_determinant_condition, CoefficientDifference, CoefficientPair, Direction, SolutionEnsemble,
};
use carleman_lab::inverse_source::{balance_s, SBranch};
use carleman_lab::LabError;

fn unit_interval(n: usize) -> SpatialDomain {
    SpatialDomain::interval(0.0, 1.0, n).unwrap()
}

fn weight(field: &SpaceTimeField, domain: &SpatialDomain, beta: f64) -> WeightField {
    let settings = TraceSettings::for_field(field, domain);
    make_weight(compute_phi0(field, domain, &settings).unwrap(), field, beta).unwrap()
}

fn zero_p() -> ScalarFn {
    Arc::new(|_, _| 0.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    // constant drift on the unit square: phi0 is the length of the segment
    // back to the inflow edges
    #[test]
    fn phi0_of_constant_fields_is_backward_distance(angle in 0.15f64..1.4, speed in 0.5f64..2.0) {
        let a = [speed * angle.cos(), speed * angle.sin()];
        let field = SpaceTimeField::constant(2, 1.0, a, 0.4, 3.0, 1.0);
        let domain = SpatialDomain::rectangle([0.0, 0.0], [1.0, 1.0], [11, 11]).unwrap();
        let settings = TraceSettings::for_field(&field, &domain);
        let w = compute_phi0(&field, &domain, &settings).unwrap();
        let tol = 10.0 * settings.ode_step.powi(4) * domain.diameter() + 1e-10;
        for (x, phi) in domain.nodes().iter().zip(&w.phi0) {
            let tau = (x[0] / a[0]).min(x[1] / a[1]);
            let exact = tau * speed;
            prop_assert!((phi - exact).abs() <= tol, "{x:?}: {phi} vs {exact}");
        }
    }

    #[test]
    fn phi0_grows_along_the_field(slope in 0.0f64..2.0) {
        let field = SpaceTimeField::new(1, |_, _| 1.0, move |x, _| [1.0 + slope * x[0], 0.0], 1.0, 5.0, 1.0)
            .time_independent();
        let domain = unit_interval(41);
        let w = weight(&field, &domain, 0.1);
        prop_assert!(w.phi0.windows(2).all(|p| p[1] >= p[0] - 1e-12));
        // arclength back to x = 0 does not depend on the speed
        for (x, phi) in domain.nodes().iter().zip(&w.phi0) {
            prop_assert!((phi - x[0]).abs() < 1e-8);
        }
    }

    #[test]
    fn regions_are_nested(e1 in 0.0f64..1.0, e2 in 0.0f64..1.0, beta in 0.05f64..0.95) {
        let (lo, hi) = if e1 <= e2 { (e1, e2) } else { (e2, e1) };
        let field = SpaceTimeField::constant(1, 1.0, [1.0, 0.0], 1.0, 3.0, 2.5);
        let grid = SpaceTimeGrid::new(unit_interval(41), 51, 2.5).unwrap();
        let w = weight(&field, &grid.space, beta);
        let (a, b) = (w.omega_mask(lo), w.omega_mask(hi));
        prop_assert!(a.iter().zip(&b).all(|(a, b)| *a || !*b));
        let (qa, qb) = (w.region_mask(lo, &grid).q, w.region_mask(hi, &grid).q);
        prop_assert!(qa.iter().zip(&qb).all(|(a, b)| *a || !*b));
    }

    #[test]
    fn cutoff_derivative_lives_in_the_band(eps in 0.05f64..0.3, x in 0.0f64..1.0, t in 0.0f64..2.5) {
        let field = SpaceTimeField::constant(1, 1.0, [1.0, 0.0], 1.0, 3.0, 2.5);
        let w = weight(&field, &unit_interval(101), 0.5);
        let chi = build_cutoff(&w, eps).unwrap();
        let phi = w.phi([x, 0.0], t);
        if phi <= eps || phi >= 2.0 * eps {
            prop_assert_eq!(chi.p_chi(&field, [x, 0.0], t), 0.0);
            let v = chi.value([x, 0.0], t);
            prop_assert!(v == 0.0 || v == 1.0);
        }
    }

    #[test]
    fn forward_map_is_linear(alpha in -3.0f64..3.0, k1 in 1.0f64..4.0, k2 in 0.5f64..3.0) {
        let field = SpaceTimeField::constant(1, 1.0, [1.0, 0.0], 1.0, 3.0, 1.0);
        let grid = SpaceTimeGrid::new(unit_interval(21), 41, 1.0).unwrap();
        let p = |_: carleman_lab::Point, t: f64| 0.5 + t;
        let f1 = move |x: carleman_lab::Point| (k1 * x[0]).sin();
        let f2 = move |x: carleman_lab::Point| (k2 * x[0]).cos();
        let solve = |f: Profile| {
            let src = SourceSpec::new(p, |_, _| 1.0, f, 1.0);
            solve_characteristics(&field, &src, &Profile::zero(), &Inflow::zero(), &grid, 1).unwrap()
        };
        let combo = solve(Profile::function(move |x| alpha * f1(x) + f2(x)));
        let (u1, u2) = (solve(Profile::function(f1)), solve(Profile::function(f2)));
        for i in 0..grid.len() {
            let lin = alpha * u1.values[i] + u2.values[i];
            prop_assert!((combo.values[i] - lin).abs() <= 1e-12 * (1.0 + lin.abs()));
        }
    }

    // f supported in {x > c}: nothing upstream of c ever sees it
    #[test]
    fn solution_is_causal(c in 0.1f64..0.9) {
        let field = SpaceTimeField::constant(1, 1.0, [1.0, 0.0], 1.0, 3.0, 1.0);
        let grid = SpaceTimeGrid::new(unit_interval(41), 81, 1.0).unwrap();
        let f = Profile::function(move |x| if x[0] > c { (x[0] - c).powi(2) } else { 0.0 });
        let src = SourceSpec::new(|_, _| 0.3, |_, _| 1.0, f, 1.0);
        let u = solve_characteristics(&field, &src, &Profile::zero(), &Inflow::zero(), &grid, 1).unwrap();
        let ns = grid.space.len();
        for (idx, v) in u.values.iter().enumerate() {
            if grid.space.node(idx % ns)[0] <= c {
                prop_assert_eq!(*v, 0.0);
            }
        }
    }

    #[test]
    fn upwind_and_characteristics_agree(amp in 0.2f64..2.0, k in 1.0f64..3.0, n in 21usize..61) {
        let field = SpaceTimeField::constant(1, 1.0, [1.0, 0.0], 1.0, 3.0, 1.0);
        let grid = SpaceTimeGrid::new(unit_interval(n), 2 * n, 1.0).unwrap();
        let f = Profile::function(move |x| amp * (k * x[0]).sin());
        let init = Profile::function(move |x| (k * x[0]).cos());
        let src = SourceSpec::new(|_, _| 0.0, |_, _| 1.0, f, 1.0);
        let sol = solve_forward(&field, &src, &init, &Inflow::Extended, &grid).unwrap();
        let bound = 5.0 * (grid.space.h() + grid.dt()) * (amp + 1.0);
        prop_assert!(sol.discrepancy <= bound, "{} > {bound}", sol.discrepancy);
    }

    #[test]
    fn carleman_ratios_are_scale_free(alpha in 0.01f64..100.0, seed in 0u64..1000, s in 0.5f64..32.0) {
        let field = SpaceTimeField::constant(1, 1.0, [1.0, 0.0], 1.0, 3.0, 2.5);
        let grid = SpaceTimeGrid::new(unit_interval(41), 101, 2.5).unwrap();
        let w = weight(&field, &grid.space, 0.5);
        let sigma = compute_sigma_plus(&field, &grid);
        let u = test_family(1, seed)[0].sample(&grid);
        let scaled = GridFunction::from_values(&grid, u.values.iter().map(|v| alpha * v).collect()).unwrap();
        let a = evaluate_carleman(&u, &field, &zero_p(), &w, &sigma, s).unwrap();
        let b = evaluate_carleman(&scaled, &field, &zero_p(), &w, &sigma, s).unwrap();
        for (x, y) in a.unshifted().iter().zip(b.unshifted()) {
            prop_assert!(*x >= 0.0);
            prop_assert!((y - alpha * alpha * x).abs() <= 1e-12 * y.abs());
        }
        prop_assert!((a.ratio() - b.ratio()).abs() <= 1e-12 * a.ratio());
    }

    #[test]
    fn weight_mass_concentrates_as_s_grows(eps in 0.02f64..0.8) {
        let field = SpaceTimeField::constant(1, 1.0, [1.0, 0.0], 1.0, 3.0, 2.5);
        let grid = SpaceTimeGrid::new(unit_interval(41), 101, 2.5).unwrap();
        let w = weight(&field, &grid.space, 0.5);
        let fr: Vec<f64> = [1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0].iter().map(|&s| mass_fraction(&w, &grid, eps, s)).collect();
        prop_assert!(fr.windows(2).all(|p| p[1] >= p[0] - 1e-12), "{fr:?}");
    }

    #[test]
    fn balance_s_is_the_log_ratio(d in 1e-8f64..1.0, ratio in 1.0f64..1e6, c in 0.0f64..5.0, eps in 1e-3f64..1.0) {
        let f = d * ratio;
        let (s, branch) = balance_s(d, f, c, eps).unwrap();
        if d < f {
            prop_assert_eq!(branch, SBranch::Balanced);
            prop_assert_eq!(s, (f / d).ln() / (c + eps));
        } else {
            prop_assert_eq!(branch, SBranch::DataDominates);
            prop_assert_eq!(s, 0.0);
        }
        // swapped: the data now dominate
        let (s, branch) = balance_s(f, d, c, eps).unwrap();
        prop_assert_eq!(branch, SBranch::DataDominates);
        prop_assert_eq!(s, 0.0);
        let rejected = matches!(balance_s(-d, f, c, eps), Err(LabError::NonpositiveData { .. }));
        prop_assert!(rejected);
    }

    #[test]
    fn coefficient_difference_is_symmetric(a1 in -0.3f64..0.3, a2 in -0.3f64..0.3, cx in 0.2f64..0.8, eps in 0.0f64..0.5) {
        let domain = unit_interval(51);
        let pair = |amp: f64| {
            let b = bump([cx, 0.0], 0.3, 1);
            CoefficientPair::new(domain.clone(), move |x| 1.0 + amp * b(x), |_| [1.0, 0.0], 3.0, 0.5, |_, n| n[0] > 0.0)
        };
        let (p, q) = (pair(a1), pair(a2));
        let mask: Vec<bool> = domain.nodes().iter().map(|x| x[0] > eps).collect();
        let forward = CoefficientDifference::new(&p, &q).norm(&domain, Some(&mask));
        let backward = CoefficientDifference::new(&q, &p).norm(&domain, Some(&mask));
        prop_assert_eq!(forward, backward);
        prop_assert!(CoefficientDifference::new(&p, &p).is_zero());
    }

    #[test]
    fn perturbing_by_zero_changes_nothing(amp in -1.0f64..1.0) {
        let domain = unit_interval(31);
        let pair = CoefficientPair::new(domain.clone(), |_| 1.0, |_| [1.0, 0.0], 3.0, 1.0, |_, n| n[0] > 0.0);
        let b = bump([0.5, 0.0], 0.5, 1);
        let dir = Direction { a0: Arc::new(move |x| amp * b(x)), a: Arc::new(|_| [0.0, 0.0]) };
        prop_assert!(CoefficientDifference::new(&pair.perturbed(0.0, &dir), &pair).is_zero());
    }

    #[test]
    fn unknown_override_keys_are_rejected(key in "[a-z]{3,12}", value in "[0-9]{1,3}") {
        let mut sc = Scenario::load("paper-1d").unwrap();
        let known = sc.params.contains_key(&key);
        let r = sc.apply_overrides(&[format!("{key}={value}")]);
        prop_assert_eq!(r.is_ok(), known);
        if !known {
            let bad = matches!(r, Err(LabError::BadOverride(_)));
            prop_assert!(bad);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    // |det R| = |p| |det(u; grad u)| / A0 after eliminating d_t u; compared
    // with the proof's generic constant rho / M
    #[test]
    fn det_r_dominates_the_value_gradient_determinant(a0 in 1.0f64..2.0, speed in 1.0f64..2.0, pv in 0.5f64..3.0) {
        let grid = SpaceTimeGrid::new(unit_interval(41), 61, 1.0).unwrap();
        let (rho, m) = (1.0, 4.0);
        let pair = CoefficientPair::new(grid.space.clone(), move |_| a0, move |_| [speed, 0.0], m, rho, |_, n| n[0] > 0.0);
        let p: ScalarFn = Arc::new(move |_, _| pv);
        let ens = SolutionEnsemble::manufacture(&pair, &p, &grid, &vec![true; grid.space.len()]).unwrap();
        let rep = check_determinant_condition(&ens, &pair, &p, 0.1).unwrap();
        prop_assert!(rep.comparability_holds);
        prop_assert!(rep.min_det_r >= rho / m * rep.min_value - rep.comparability_tol);
        prop_assert!((rep.min_det_r - rep.min_value / a0).abs() <= rep.comparability_tol);
    }
}

// curved integral curves of (1, 2 sin 6x): successive halvings of the
// step shrink the change in phi0 at fourth order
#[test]
fn phi0_converges_at_fourth_order() {
    let field = SpaceTimeField::new(2, |_, _| 1.0, |x, _| [1.0, 2.0 * (6.0 * x[0]).sin()], 1.0, 3.0, 1.0).time_independent();
    let domain = SpatialDomain::rectangle([0.0, 0.0], [1.0, 1.0], [9, 9]).unwrap();
    let base = TraceSettings::for_field(&field, &domain);
    let phi = |k: i32| {
        let settings = TraceSettings {
            ode_step: base.ode_step * 0.5f64.powi(k),
            ..base
        };
        compute_phi0(&field, &domain, &settings).unwrap().phi0
    };
    let runs: Vec<Vec<f64>> = (0..3).map(phi).collect();
    let change = |a: &[f64], b: &[f64]| a.iter().zip(b).fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()));
    let (c1, c2) = (change(&runs[0], &runs[1]), change(&runs[1], &runs[2]));
    assert!(c2 <= c1 / 16.0 * 1.05 || c2 < 1e-13, "{c1:e} -> {c2:e}");
}
