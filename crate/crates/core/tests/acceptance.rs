//! End-to-end acceptance checks. Each test prints one `criterion N: PASS|FAIL`
//! line with its measured numbers. Timed sections hold a global lock so that
//! the runtime budgets are not skewed by tests running side by side.

use std::path::Path;
use std::sync::Mutex;
use std::time::Instant;

use carleman_lab::carleman::{sweep_s, test_family};
use carleman_lab::forward::{extract_trace, solve_characteristics, solve_forward, Inflow, Profile, SourceSpec};
use carleman_lab::geometry::boundary::{check_geometric_condition, compute_sigma_plus};
use carleman_lab::geometry::curve::{CurveExit, TraceSettings};
use carleman_lab::geometry::field::{ScalarFn, SpaceTimeField};
use carleman_lab::geometry::weight::{check_dissipative, compute_phi0};
use carleman_lab::grid::{l2_masked, GridFunction, SpaceTimeGrid, SpatialDomain};
use carleman_lab::harness::{self, run, Scenario};
use carleman_lab::inverse_coefficient::{
    check_determinant_condition, coefficient_stability_experiment, CoefficientPair, SolutionEnsemble,
};
use carleman_lab::inverse_source::stability::stability_mode_a;
use carleman_lab::inverse_source::{reconstruct_direct, reconstruct_qr};

static SERIAL: Mutex<()> = Mutex::new(());

fn lock() -> std::sync::MutexGuard<'static, ()> {
    SERIAL.lock().unwrap_or_else(|e| e.into_inner())
}

fn report(n: u32, ok: bool, detail: String) {
    println!("criterion {n}: {} {detail}", if ok { "PASS" } else { "FAIL" });
}

fn scenario(name: &str, overrides: &[&str]) -> Scenario {
    let mut sc = Scenario::load(name).unwrap();
    sc.apply_overrides(overrides).unwrap();
    sc
}

#[test]
fn criterion_01_weight_exactness() {
    let _g = lock();
    let sc = scenario("paper-1d", &["nx=401"]);
    let field = sc.field().unwrap();
    let domain = sc.grid().unwrap().space;
    let start = Instant::now();
    let w = compute_phi0(&field, &domain, &TraceSettings::for_field(&field, &domain)).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let err = domain
        .nodes()
        .iter()
        .zip(&w.phi0)
        .fold(0.0_f64, |m, (x, p)| m.max((p - x[0]).abs()));
    let ok = domain.len() == 401 && err < 1e-8 && secs < 1.0;
    report(1, ok, format!("max |phi0 - x| = {err:e}, {secs:.3} s"));
    assert!(ok);
}

#[test]
fn criterion_02_geometric_condition() {
    let _g = lock();
    let start = Instant::now();
    let check = |t_final: &str| {
        let sc = scenario("paper-1d", &[&format!("t_final={t_final}"), "beta=0.5", "eps_star=0", "sigma=plus"]);
        let field = sc.field().unwrap();
        let grid = sc.grid().unwrap();
        let w = harness::weight_for(&field, &grid.space, 0.5).unwrap();
        let sigma = compute_sigma_plus(&field, &grid);
        (check_geometric_condition(&w, 0.0, &sigma, &grid), grid.t_final)
    };
    let (long, _) = check("2.5");
    let (short, t1) = check("1");
    let secs = start.elapsed().as_secs_f64();
    let on_lid = short.violations.iter().all(|v| (v.t - t1).abs() < 1e-12);
    let ok = long.holds && !short.holds && !short.violations.is_empty() && on_lid && secs < 1.0;
    report(
        2,
        ok,
        format!(
            "T=2.5 holds={}, T=1 holds={} with {} violation(s) all on t=T: {on_lid}, {secs:.3} s",
            long.holds,
            short.holds,
            short.violations.len()
        ),
    );
    assert!(ok);
}

#[test]
fn criterion_03_dissipativeness() {
    let _g = lock();
    let classify = |name: &str| {
        let sc = scenario(name, &[]);
        let field = sc.field().unwrap();
        let domain = sc.grid().unwrap().space;
        let start = Instant::now();
        let r = check_dissipative(&field, &domain, &TraceSettings::for_field(&field, &domain)).unwrap();
        (r, domain.nodes_per_axis(), start.elapsed().as_secs_f64())
    };
    let (constant, _, _) = classify("paper-1d");
    let (affine, _, _) = classify("affine-1d");
    let (rot, nodes, secs) = classify("rotational-2d");
    let witness = rot
        .failures
        .iter()
        .any(|f| f.backward == CurveExit::ClosedOrbit || f.forward == CurveExit::ClosedOrbit);
    let ok = constant.dissipative && affine.dissipative && !rot.dissipative && witness && nodes == [51, 51] && secs < 5.0;
    report(
        3,
        ok,
        format!(
            "constant={}, affine={}, rotational={} (closed-orbit witness: {witness}), {secs:.2} s at 51x51",
            constant.dissipative, affine.dissipative, rot.dissipative
        ),
    );
    assert!(ok);
}

#[test]
fn criterion_04_forward_orders() {
    let _g = lock();
    let lambda = 1.0;
    let w = |x: f64| (2.0 * std::f64::consts::PI * x).sin() + 0.5 * (3.0 * x).cos();
    let exact = move |x: f64, t: f64| (-lambda * t).exp() * w(x - t);
    let field = SpaceTimeField::constant(1, 1.0, [1.0, 0.0], 1.0, 3.0, 1.0);
    let src = SourceSpec::new(move |_, _| lambda, |_, _| 1.0, Profile::zero(), 1.0);
    let init = Profile::function(move |x| w(x[0]));
    let inflow = Inflow::function(move |x, t| exact(x[0], t));
    let start = Instant::now();
    let mut errors = Vec::new();
    for n in [21usize, 41, 81, 161] {
        let grid = SpaceTimeGrid::new(SpatialDomain::interval(0.0, 1.0, n).unwrap(), 2 * (n - 1) + 1, 1.0).unwrap();
        let sol = solve_forward(&field, &src, &init, &inflow, &grid).unwrap();
        let ex = GridFunction::from_fn(&grid, |x, t| exact(x[0], t));
        let max_err =
            |u: &GridFunction| u.values.iter().zip(&ex.values).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
        errors.push((max_err(&sol.upwind), max_err(&sol.characteristics)));
    }
    let secs = start.elapsed().as_secs_f64();
    let ratios: Vec<(f64, f64)> = errors.windows(2).map(|e| (e[0].0 / e[1].0, e[0].1 / e[1].1)).collect();
    let ok = ratios.len() == 3
        && ratios
            .iter()
            .all(|(u, c)| (1.7..=2.3).contains(u) && (12.0..=20.0).contains(c))
        && secs < 30.0;
    report(4, ok, format!("(upwind, characteristics) ratios {ratios:.3?}, {secs:.2} s"));
    assert!(ok);
}

#[test]
fn criterion_05_carleman_property() {
    let _g = lock();
    let dir = tempfile::tempdir().unwrap();
    let sc = scenario("paper-1d", &[]);
    let grid = sc.grid().unwrap();
    let field = sc.field().unwrap();
    let weight = harness::weight_for(&field, &grid.space, sc.f64("beta").unwrap()).unwrap();
    let sigma = compute_sigma_plus(&field, &grid);
    let start = Instant::now();
    let family: Vec<GridFunction> = test_family(20, 7).iter().map(|m| m.sample(&grid)).collect();
    let rep = sweep_s(&family, &field, &sc.source().unwrap().p, &weight, &sigma, &[1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0])
        .unwrap();
    let secs = start.elapsed().as_secs_f64();
    let finite = rep.terms.iter().flatten().all(|t| t.ratio().is_finite());
    // one constant for the whole family: running max of all ratios up to s
    let running = |j: usize| {
        (0..rep.terms.len())
            .flat_map(|m| rep.ratios(m)[..=j].to_vec())
            .fold(f64::NEG_INFINITY, f64::max)
    };
    let growth = running(6) / running(5) - 1.0;
    let star = rep.s_grid.iter().position(|s| *s == rep.s_star_est).unwrap();
    let bounded = (0..rep.terms.len()).all(|m| rep.ratios(m)[star..].iter().all(|r| *r <= rep.c_est));
    let rejected = run("carleman", "paper-1d", &["beta=1.0".to_string()], dir.path(), None);
    let ok = (grid.space.len(), grid.nt) == (201, 501)
        && family.len() == 20
        && finite
        && growth <= 0.01
        && bounded
        && rep.pass
        && rejected.exit_code == 2
        && secs < 60.0;
    report(
        5,
        ok,
        format!(
            "finite={finite}, top-octave growth {growth:e}, ratios <= C_est={:.4} for s >= {}: {bounded}, beta=1 exit {}, {secs:.2} s at 201x501",
            rep.c_est,
            rep.s_star_est, rejected.exit_code
        ),
    );
    assert!(ok);
}

#[test]
fn criterion_06_direct_reconstruction() {
    let _g = lock();
    let sc = scenario("paper-1d", &[]);
    let field = sc.field().unwrap();
    let src = sc.source().unwrap();
    let start = Instant::now();
    let mut rows = Vec::new();
    for n in [51usize, 101, 201, 401] {
        let domain = SpatialDomain::interval(0.0, 1.0, n).unwrap();
        // the initial-slice formula only reads the first three time levels
        let dt = 2.5 / (2.5 * (n - 1) as f64);
        let grid = SpaceTimeGrid::new(domain.clone(), 3, 2.0 * dt).unwrap();
        let u = solve_characteristics(&field, &src, &Profile::zero(), &Inflow::Extended, &grid, 1).unwrap();
        let f = reconstruct_direct(&field, &src, &u).unwrap();
        let e: Vec<f64> = f.iter().zip(src.f.sample(&domain)).map(|(a, b)| a - b).collect();
        rows.push((domain.h(), l2_masked(&domain, &e, None)));
    }
    let secs = start.elapsed().as_secs_f64();
    let c = 3.0;
    let within = rows.iter().all(|(h, e)| *e <= c * h * h);
    let ratios: Vec<f64> = rows.windows(2).map(|w| w[0].1 / w[1].1).collect();
    let ok = within && ratios.iter().all(|r| *r >= 3.5) && secs < 10.0;
    report(6, ok, format!("(h, error) {rows:?} (C = {c}), ratios {ratios:.3?}, {secs:.2} s"));
    assert!(ok);
}

#[test]
fn criterion_07_quasi_reversibility() {
    let _g = lock();
    let sc = scenario("paper-1d", &[]);
    let grid = sc.grid().unwrap();
    let setup = harness::source_setup(&sc, &grid).unwrap();
    let start = Instant::now();
    let u = solve_characteristics(&setup.field, &setup.src, &Profile::zero(), &Inflow::Extended, &grid, 1).unwrap();
    let data = extract_trace(&u, &setup.sigma, &setup.weight.omega_mask(setup.eps_star)).unwrap();
    let rec = reconstruct_qr(&setup.problem(data)).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let d = &grid.space;
    let e: Vec<f64> = rec.f.iter().zip(setup.src.f.sample(d)).map(|(a, b)| a - b).collect();
    let err = l2_masked(d, &e, Some(&setup.weight.omega_mask(3.0 * setup.eps)));
    let diag = &rec.diagnostics;
    let ok = (d.len(), grid.nt) == (201, 501)
        && err <= 10.0 * d.h()
        && diag.converged
        && diag.relative_residual < 1e-8
        && secs < 120.0;
    report(
        7,
        ok,
        format!(
            "error on Omega_3eps {err:e} (10h = {:e}), residual {:e} after {} iteration(s), {secs:.1} s",
            10.0 * d.h(),
            diag.relative_residual,
            diag.iterations
        ),
    );
    assert!(ok);
}

#[test]
fn criterion_08_holder_fit() {
    let _g = lock();
    let sc = scenario("paper-1d", &[]);
    let levels = sc.log_sweep("noise_min", "noise_max", "noise_levels").unwrap();
    let seeds = harness::noise_seeds(&sc, 7).unwrap();
    let start = Instant::now();
    let setup = harness::source_setup(&sc, &sc.grid_with("stability_nx", "stability_ny", "stability_nt").unwrap()).unwrap();
    let fit = stability_mode_a(&setup, &levels, &seeds).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let mean_at = |l: f64| {
        let v: Vec<f64> = fit.samples.iter().filter(|s| s.noise == l).map(|s| s.err).collect();
        v.iter().sum::<f64>() / v.len() as f64
    };
    let lo = mean_at(levels[0]);
    let hi = mean_at(levels[levels.len() - 1]);
    let ok = levels.len() == 8
        && seeds.len() == 5
        && fit.theta_hat > 0.0
        && fit.theta_hat <= 1.0
        && fit.residual < 0.2
        && lo < hi
        && secs < 300.0;
    report(
        8,
        ok,
        format!(
            "theta = {:.4}, residual {:.4}, err {lo:e} at 1e-4 vs {hi:e} at 1e-1, {secs:.1} s",
            fit.theta_hat, fit.residual
        ),
    );
    assert!(ok);
}

#[test]
fn criterion_09_determinant_condition() {
    let _g = lock();
    let sc = scenario("paper-1d", &[]);
    let grid = sc.grid_with("coef_nx", "coef_ny", "coef_nt").unwrap();
    let domain = grid.space.clone();
    let start = Instant::now();
    let pair = CoefficientPair::new(domain.clone(), |_| 1.0, |_| [1.0, 0.0], 3.0, 1.0, |_, n| n[0] > 0.0);
    let p: ScalarFn = std::sync::Arc::new(|_, _| 2.0);
    let mask = vec![true; domain.len()];
    let ens = SolutionEnsemble::manufacture(&pair, &p, &grid, &mask).unwrap();
    let good = check_determinant_condition(&ens, &pair, &p, 1.0).unwrap();
    // hand value: |p| |det((1, x), (0, 1))| = 2
    let hand = 2.0;
    let close = (good.min_value - hand).abs() <= 0.2 * hand;

    let repeated = SolutionEnsemble::new(
        1,
        vec![ens.solutions[0].clone(), ens.solutions[0].clone()],
        vec![ens.data[0].clone(), ens.data[0].clone()],
    )
    .unwrap();
    let rep = check_determinant_condition(&repeated, &pair, &p, 1e-6).unwrap();
    let zero: ScalarFn = std::sync::Arc::new(|_, _| 0.0);
    let ens0 = SolutionEnsemble::manufacture(&pair, &zero, &grid, &mask).unwrap();
    let p0 = check_determinant_condition(&ens0, &pair, &zero, 1e-6).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let ok = good.holds && close && !rep.holds && !p0.holds && secs < 30.0;
    report(
        9,
        ok,
        format!(
            "min {:.6} vs hand value {hand}, repeated column min {:e}, p = 0 min {:e}, {secs:.2} s",
            good.min_value, rep.min_value, p0.min_value
        ),
    );
    assert!(ok);
}

#[test]
fn criterion_10_coefficient_stability() {
    let _g = lock();
    let sc = scenario("paper-1d", &[]);
    let start = Instant::now();
    let setup = harness::coefficient_setup(&sc).unwrap();
    let mut deltas = vec![0.0];
    deltas.extend(sc.log_sweep("delta_min", "delta_max", "delta_count").unwrap());
    let exp = coefficient_stability_experiment(&setup, &deltas).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let floor = exp.zero_delta.is_some_and(|(f, d)| f == 0.0 && d <= 1e-12);
    let fit = &exp.fit;
    let ok = fit.theta_hat > 0.0 && fit.theta_hat <= 1.0 && fit.residual < 0.25 && floor && secs < 300.0;
    report(
        10,
        ok,
        format!(
            "theta = {:.4}, residual {:.4}, delta = 0 gives (max|F|, D) = {:?}, {secs:.1} s",
            fit.theta_hat, fit.residual, exp.zero_delta
        ),
    );
    assert!(ok);
}

fn csv_bodies(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "csv" || x == "svg" || x == "json"))
        .filter(|p| p.file_name().is_some_and(|n| n != "timing.json"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect();
    out.sort();
    out
}

#[test]
fn criterion_11_reproducibility() {
    let _g = lock();
    let overrides: Vec<String> = [
        "nx=101",
        "nt=251",
        "stability_nx=51",
        "stability_nt=126",
        "noise_levels=4",
        "noise_seeds=2",
        "coef_nx=51",
        "coef_nt=126",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let ra = run("all", "paper-1d", &overrides, a.path(), Some(11));
    let rb = run("all", "paper-1d", &overrides, b.path(), Some(11));
    let (fa, fb) = (csv_bodies(a.path()), csv_bodies(b.path()));
    let files = fa.len();
    let same = ra.exit_code == rb.exit_code && fa == fb;
    let ok = same && files > 0;
    report(11, ok, format!("{files} artifact(s) byte-identical across reruns"));
    assert!(ok);
}
