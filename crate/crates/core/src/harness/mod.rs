//! Scenario registry, run orchestration and artifact emission.
//!
//! Every run writes CSV tables, SVG plots, `manifest.json` (byte-stable for
//! identical inputs) and `timing.json` (wall clock) into one directory.

pub mod output;
pub mod scenario;

use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use serde_json::json;

use crate::carleman::{mass_fraction, sweep_s, test_family};
use crate::error::{LabError, Result};
use crate::forward::{extract_trace, solve_characteristics, Inflow};
use crate::geometry::boundary::{check_geometric_condition, compute_sigma_plus, BoundaryMask};
use crate::geometry::curve::TraceSettings;
use crate::geometry::field::SpaceTimeField;
use crate::geometry::weight::{check_dissipative, compute_phi0, make_weight, WeightField};
use crate::grid::{l2_masked, SpaceTimeGrid, SpatialDomain};
use crate::inverse_coefficient::{
    bump, coefficient_stability_experiment, CoefficientPair, CoefficientSetup, Direction,
};
use crate::inverse_source::stability::{stability_mode_a, stability_mode_b, SourceSetup, StabilityFit};
use crate::inverse_source::{reconstruct_direct, reconstruct_qr};
use crate::par;

pub use output::{ExperimentRecord, RunManifest};
pub use scenario::{list_scenarios, Scenario};

pub const COMMANDS: [&str; 5] = ["geometry", "carleman", "inverse-source", "inverse-coefficient", "all"];

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "CARLEMAN_LAB_THREADS";

#[derive(Clone, Debug)]
pub struct RunOutcome {
    /// 0: every pass flag true; 2: a hypothesis of the theory fails;
    /// 1: a check failed or an internal error occurred.
    pub exit_code: i32,
    pub message: String,
    pub manifest: Option<RunManifest>,
}

fn thread_cap() -> Option<usize> {
    std::env::var(THREADS_ENV).ok().and_then(|v| v.trim().parse().ok())
}

/// Runs `command` on a scenario (registered name or `.cfg` path).
pub fn run(command: &str, scenario: &str, overrides: &[String], out_dir: &Path, seed: Option<u64>) -> RunOutcome {
    par::with_threads(thread_cap(), || run_inner(command, scenario, overrides, out_dir, seed))
}

fn fail(code: i32, e: &LabError) -> RunOutcome {
    RunOutcome {
        exit_code: code,
        message: e.to_string(),
        manifest: None,
    }
}

fn run_inner(command: &str, scenario: &str, overrides: &[String], out_dir: &Path, seed: Option<u64>) -> RunOutcome {
    if !COMMANDS.contains(&command) {
        return fail(1, &LabError::Config(format!("unknown command '{command}'")));
    }
    let mut sc = match Scenario::load(scenario) {
        Ok(s) => s,
        Err(e) => return fail(1, &e),
    };
    if let Err(e) = sc.apply_overrides(overrides) {
        return fail(1, &e);
    }
    let seed = match seed {
        Some(s) => s,
        None => match sc.usize("seed") {
            Ok(s) => s as u64,
            Err(e) => return fail(1, &e),
        },
    };
    sc.params.insert("seed".into(), seed.to_string());
    let mut em = match output::Emitter::new(out_dir) {
        Ok(e) => e,
        Err(e) => return fail(1, &e),
    };

    let steps: Vec<&str> = if command == "all" {
        COMMANDS[..4].to_vec()
    } else {
        vec![command]
    };
    let start = Instant::now();
    let mut records = Vec::new();
    let mut timings = Vec::new();
    let mut error: Option<LabError> = None;
    for step in steps {
        let t0 = Instant::now();
        let r = match step {
            "geometry" => geometry(&sc, &mut em),
            "carleman" => carleman(&sc, seed, &mut em),
            "inverse-source" => inverse_source(&sc, seed, &mut em),
            _ if command == "all" && !sc.field().map(|f| f.is_time_independent()).unwrap_or(true) => {
                let mut rec = ExperimentRecord::new(step);
                rec.advisory("skipped", "coefficients depend on time");
                Ok(rec)
            }
            _ => inverse_coefficient(&sc, &mut em),
        };
        timings.push(json!({"experiment": step, "seconds": t0.elapsed().as_secs_f64()}));
        match r {
            Ok(rec) => records.push(rec),
            Err(e) => {
                error = Some(e);
                break;
            }
        }
    }

    let exit_code = match &error {
        Some(e) if e.is_hypothesis_violation() => 2,
        Some(_) => 1,
        None if records.iter().all(|r| r.all_pass()) => 0,
        None => 1,
    };
    let message = match &error {
        Some(e) => e.to_string(),
        None => {
            let failed: Vec<String> = records
                .iter()
                .flat_map(|r| {
                    r.pass
                        .iter()
                        .filter(|(_, v)| !**v)
                        .map(move |(k, _)| format!("{}.{}", r.name, k))
                })
                .collect();
            if failed.is_empty() {
                "all checks passed".to_string()
            } else {
                format!("failed checks: {}", failed.join(", "))
            }
        }
    };

    let mut files = em.files.clone();
    files.push("manifest.json".into());
    files.push("timing.json".into());
    let manifest = RunManifest {
        tool: "carleman-lab".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: command.into(),
        scenario: sc.name.clone(),
        seed,
        overrides: overrides.to_vec(),
        parameters: sc.params.clone(),
        experiments: records,
        files,
        exit_code,
        error: error.as_ref().map(|e| e.to_string()),
    };
    let timing = json!({"wall_clock_seconds": start.elapsed().as_secs_f64(), "experiments": timings});
    let written = serde_json::to_string_pretty(&manifest)
        .map_err(LabError::from)
        .and_then(|m| Ok(std::fs::write(em.path("manifest.json"), m + "\n")?))
        .and_then(|_| Ok(std::fs::write(em.path("timing.json"), timing.to_string() + "\n")?));
    if let Err(e) = written {
        return fail(1, &e);
    }
    RunOutcome {
        exit_code,
        message,
        manifest: Some(manifest),
    }
}

fn coords(domain: &SpatialDomain, i: usize) -> Vec<String> {
    let x = domain.node(i);
    if domain.dim() == 1 {
        vec![output::num(x[0])]
    } else {
        vec![output::num(x[0]), output::num(x[1])]
    }
}

fn header<'a>(domain: &SpatialDomain, rest: &[&'a str]) -> Vec<&'a str> {
    let mut h = if domain.dim() == 1 { vec!["x"] } else { vec!["x", "y"] };
    h.extend_from_slice(rest);
    h
}

pub fn weight_for(field: &SpaceTimeField, domain: &SpatialDomain, beta: f64) -> Result<WeightField> {
    let settings = TraceSettings::for_field(field, domain);
    make_weight(compute_phi0(field, domain, &settings)?, field, beta)
}

fn sigma_mask(sc: &Scenario, field: &SpaceTimeField, grid: &SpaceTimeGrid) -> Result<BoundaryMask> {
    match sc.get("sigma")? {
        "plus" => Ok(compute_sigma_plus(field, grid)),
        "all" => Ok(BoundaryMask::from_predicate(grid, |_| true)),
        other => Err(LabError::Config(format!("sigma = '{other}', expected plus or all"))),
    }
}

fn eps_for(sc: &Scenario, key: &str, weight: &WeightField) -> Result<f64> {
    Ok(sc.f64_or_auto(key)?.unwrap_or(0.1 * weight.max_phi0()))
}

fn geometry(sc: &Scenario, em: &mut output::Emitter) -> Result<ExperimentRecord> {
    let mut rec = ExperimentRecord::new("geometry");
    let field = sc.field()?;
    let grid = sc.grid()?;
    let domain = &grid.space;
    let settings = TraceSettings::for_field(&field, domain);
    let report = check_dissipative(&field, domain, &settings)?;
    rec.pass("dissipative", report.dissipative);
    rec.value("failure_count", report.failures.len());
    if !report.dissipative {
        let rows = report.failures.iter().map(|f| {
            let mut r = coords(domain, f.node);
            r.push(format!("{:?}", f.backward));
            r.push(format!("{:?}", f.forward));
            r
        });
        rec.files.push(em.csv("dissipativity_failures.csv", &header(domain, &["backward_exit", "forward_exit"]), rows)?);
        return Err(LabError::NotDissipative {
            failures: report.failures.len(),
        });
    }
    rec.value("sigma_minus_smoothness_proxy", report.smoothness_proxy);

    let weight = weight_for(&field, domain, sc.f64("beta")?)?;
    let eps_star = sc.f64("eps_star")?;
    let eps = eps_for(sc, "eps", &weight)?;
    rec.value("max_phi0", weight.max_phi0());
    rec.value("beta", weight.beta());
    rec.value("beta_bound", weight.beta_bound);
    rec.value("eps", eps);
    rec.value("eps_star", eps_star);

    let rows = (0..domain.len()).map(|i| {
        let mut r = coords(domain, i);
        r.push(output::num(weight.phi0[i]));
        r.push(output::num(weight.sigma_minus[i]));
        r
    });
    rec.files.push(em.csv("phi0.csv", &header(domain, &["phi0", "sigma_minus"]), rows)?);
    let region = weight.region_mask(eps, &grid);
    let ns = domain.len();
    let rows = (0..grid.len()).map(|idx| {
        let (i, k) = (idx % ns, idx / ns);
        let t = grid.time(k);
        let mut r = coords(domain, i);
        r.push(output::num(t));
        r.push(output::num(weight.phi_node(i, t)));
        r.push(u8::from(region.q[idx]).to_string());
        r
    });
    rec.files.push(em.csv("region.csv", &header(domain, &["t", "phi", "in_Qeps"]), rows)?);
    if domain.dim() == 1 {
        let pts = (0..ns).map(|i| (domain.node(i)[0], weight.phi0[i])).collect();
        let plot = output::Plot {
            title: "backward arclength phi0",
            xlabel: "x",
            ylabel: "phi0",
            log_x: false,
            log_y: false,
            series: vec![output::Series {
                label: "",
                points: pts,
                line: true,
                color: "#1f77b4",
            }],
        };
        rec.files.push(em.text("phi0.svg", &plot.render())?);
    }

    let sigma = sigma_mask(sc, &field, &grid)?;
    let geo = check_geometric_condition(&weight, eps_star, &sigma, &grid);
    let rows = geo.violations.iter().map(|v| {
        let mut r = vec![output::num(v.point[0])];
        if domain.dim() == 2 {
            r.push(output::num(v.point[1]));
        }
        r.push(output::num(v.t));
        r.push(output::num(v.phi));
        r
    });
    rec.files.push(em.csv("geometric_violations.csv", &header(domain, &["t", "phi"]), rows)?);
    rec.value("geometric_violations", geo.violations.len());
    rec.pass("geometric_condition", geo.holds);
    if !geo.holds {
        let reason = if geo.nonempty {
            format!("{} unobserved boundary point(s) with phi > eps*", geo.violations.len())
        } else {
            "no boundary point has phi > eps*".to_string()
        };
        return Err(LabError::GeometricConditionViolated { reason });
    }
    Ok(rec)
}

const PALETTE: [&str; 6] = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b"];

fn carleman(sc: &Scenario, seed: u64, em: &mut output::Emitter) -> Result<ExperimentRecord> {
    let mut rec = ExperimentRecord::new("carleman");
    let field = sc.field()?;
    let grid = sc.grid()?;
    let weight = weight_for(&field, &grid.space, sc.f64("beta")?)?;
    let sigma_plus = compute_sigma_plus(&field, &grid);
    let src = sc.source()?;
    let family: Vec<_> = test_family(sc.usize("family_size")?, seed)
        .iter()
        .map(|m| m.sample(&grid))
        .collect();
    let s_grid = sc.list("s_grid")?;
    let report = sweep_s(&family, &field, &src.p, &weight, &sigma_plus, &s_grid)?;

    let rows = report.terms.iter().enumerate().flat_map(|(m, row)| {
        row.iter().map(move |t| {
            vec![
                m.to_string(),
                output::num(t.s),
                output::num(t.lhs1),
                output::num(t.lhs2),
                output::num(t.rhs1),
                output::num(t.rhs2),
                output::num(t.ratio()),
                output::num(t.log_shift),
            ]
        })
    });
    rec.files.push(em.csv(
        "carleman.csv",
        &["member", "s", "lhs1", "lhs2", "rhs1", "rhs2", "ratio", "log_shift"],
        rows,
    )?);
    let series = (0..report.terms.len())
        .map(|m| output::Series {
            label: "",
            points: s_grid.iter().cloned().zip(report.ratios(m)).collect(),
            line: true,
            color: PALETTE[m % PALETTE.len()],
        })
        .collect();
    let plot = output::Plot {
        title: "(LHS1 + LHS2) / (RHS1 + RHS2)",
        xlabel: "s",
        ylabel: "ratio",
        log_x: true,
        log_y: true,
        series,
    };
    rec.files.push(em.text("carleman_ratio.svg", &plot.render())?);

    rec.value("c_est", report.c_est);
    rec.value("s_star_est", report.s_star_est);
    rec.value("top_octave_growth", report.top_octave_growth);
    rec.value("beta_bound", weight.beta_bound);
    rec.pass("all_finite", report.all_finite);
    rec.pass("running_max_stabilized", report.pass);
    let eps = eps_for(sc, "eps", &weight)?;
    let fractions: Vec<f64> = s_grid.iter().map(|&s| mass_fraction(&weight, &grid, eps, s)).collect();
    rec.advisory("weight_mass_fraction_in_Qeps", fractions);
    Ok(rec)
}

fn fit_rows(fit: &StabilityFit) -> impl Iterator<Item = Vec<String>> + '_ {
    fit.samples.iter().map(|s| {
        vec![
            output::num(s.noise),
            s.seed.to_string(),
            output::num(s.d),
            output::num(s.f),
            output::num(s.err),
            output::num(s.s_used),
        ]
    })
}

fn fit_plot(fit: &StabilityFit, title: &str, xlabel: &str, ylabel: &str) -> String {
    let pts: Vec<(f64, f64)> = fit.used.iter().map(|&i| (fit.samples[i].d, fit.samples[i].err)).collect();
    let (lo, hi) = pts
        .iter()
        .fold((f64::INFINITY, 0.0_f64), |(a, b), (d, _)| (a.min(*d), b.max(*d)));
    let line = [lo, hi]
        .iter()
        .map(|&d| (d, 10f64.powf(fit.intercept + fit.theta_hat * d.log10())))
        .collect();
    let label = format!("fit: theta = {:.3}", fit.theta_hat);
    output::Plot {
        title,
        xlabel,
        ylabel,
        log_x: true,
        log_y: true,
        series: vec![
            output::Series {
                label: "",
                points: pts,
                line: false,
                color: "#1f77b4",
            },
            output::Series {
                label: &label,
                points: line,
                line: true,
                color: "#d62728",
            },
        ],
    }
    .render()
}

fn record_fit(rec: &mut ExperimentRecord, prefix: &str, fit: &StabilityFit, max_residual: f64, gate: bool) {
    let theta_ok = fit.theta_hat > 0.0 && fit.theta_hat <= 1.0;
    let residual_ok = fit.residual < max_residual;
    let entries = [
        ("theta_hat", json!(fit.theta_hat)),
        ("c_fit", json!(fit.c_fit)),
        ("residual", json!(fit.residual)),
        ("intercept", json!(fit.intercept)),
        ("theta_theory", json!(fit.theta_theory)),
        ("holder_c", json!(fit.holder_c)),
        ("used_samples", json!(fit.used.len())),
        ("floor", json!(fit.floor)),
    ];
    for (k, v) in entries {
        let key = format!("{prefix}{k}");
        if gate {
            rec.values.insert(key, v);
        } else {
            rec.advisory.insert(key, v);
        }
    }
    if gate {
        rec.pass(&format!("{prefix}theta_in_unit_interval"), theta_ok);
        rec.pass(&format!("{prefix}residual_below_{max_residual}"), residual_ok);
        rec.pass(&format!("{prefix}error_decreases_with_noise"), fit.error_decreases);
    } else {
        rec.advisory(&format!("{prefix}theta_in_unit_interval"), theta_ok);
        rec.advisory(&format!("{prefix}error_decreases_with_noise"), fit.error_decreases);
    }
}

fn inverse_source(sc: &Scenario, seed: u64, em: &mut output::Emitter) -> Result<ExperimentRecord> {
    let mut rec = ExperimentRecord::new("inverse-source");
    let full = source_setup(sc, &sc.grid()?)?;
    let (field, src, grid, weight, sigma) = (&full.field, &full.src, &full.grid, &full.weight, &full.sigma);
    let domain = &grid.space;
    let eps = full.eps;

    let u = solve_characteristics(field, src, &sc.profile("init")?, &Inflow::Extended, grid, 1)?;
    let data = extract_trace(&u, sigma, &weight.omega_mask(full.eps_star))?;
    let ns = domain.len();
    let rows = (0..grid.len()).map(|idx| {
        let mut r = coords(domain, idx % ns);
        r.push(output::num(grid.time(idx / ns)));
        r.push(output::num(u.values[idx]));
        r
    });
    rec.files.push(em.csv("solution.csv", &header(domain, &["t", "u"]), rows)?);
    let nb = sigma.nb();
    let rows = (0..grid.nt).flat_map(|k| {
        let data = &data;
        (0..nb).filter(move |&b| sigma.get(b, k)).map(move |b| {
            vec![
                b.to_string(),
                output::num(grid.time(k)),
                output::num(data.g[k * nb + b]),
                output::num(data.dg_dt[k * nb + b]),
            ]
        })
    });
    rec.files.push(em.csv("traces.csv", &["boundary_index", "t", "g", "dg_dt"], rows)?);

    let truth = src.f.sample(domain);
    let f_direct = reconstruct_direct(field, src, &u)?;
    let mut problem = full.problem(data);
    problem.tol = sc.f64("qr_tol")?;
    problem.max_iter = sc.usize("qr_max_iter")?;
    let qr = reconstruct_qr(&problem)?;
    let m_eps = weight.omega_mask(eps);
    let m_3eps = weight.omega_mask(3.0 * eps);
    let err = |f: &[f64], m: &[bool]| {
        let e: Vec<f64> = f.iter().zip(&truth).map(|(a, b)| a - b).collect();
        l2_masked(domain, &e, Some(m))
    };
    let qr_err = err(&qr.f, &m_3eps);
    let rows = (0..ns).map(|i| {
        let mut r = coords(domain, i);
        r.push(output::num(truth[i]));
        r.push(output::num(f_direct[i]));
        r.push(output::num(qr.f[i]));
        r.push(u8::from(m_eps[i]).to_string());
        r.push(u8::from(m_3eps[i]).to_string());
        r
    });
    rec.files.push(em.csv(
        "reconstruction.csv",
        &header(domain, &["f_true", "f_direct", "f_qr", "in_omega_eps", "in_omega_3eps"]),
        rows,
    )?);
    rec.value("eps", eps);
    rec.value("direct_error_omega_eps", err(&f_direct, &m_eps));
    rec.value("qr_error_omega_3eps", qr_err);
    rec.value("qr", &qr.diagnostics);
    rec.pass("qr_converged", qr.diagnostics.converged);
    rec.pass("qr_error_within_10h", qr_err <= 10.0 * domain.h());

    // stability sweeps on their own (coarser) lattice
    let setup = source_setup(sc, &sc.grid_with("stability_nx", "stability_ny", "stability_nt")?)?;
    let levels = sc.log_sweep("noise_min", "noise_max", "noise_levels")?;
    let seeds = noise_seeds(sc, seed)?;
    let header_fit = ["noise", "seed", "D", "F", "err", "s_used"];

    let fit = stability_mode_a(&setup, &levels, &seeds)?;
    rec.files.push(em.csv("stability.csv", &header_fit, fit_rows(&fit))?);
    rec.files.push(em.text(
        "fit.svg",
        &fit_plot(&fit, "perturbation pairs: error vs data norm", "D", "||delta f||"),
    )?);
    record_fit(&mut rec, "", &fit, 0.2, true);

    let mut levels_b = vec![0.0];
    levels_b.extend(&levels);
    match stability_mode_b(&setup, &levels_b, &seeds) {
        Ok(fit) => {
            rec.files.push(em.csv("stability_qr.csv", &header_fit, fit_rows(&fit))?);
            rec.files.push(em.text(
                "fit_qr.svg",
                &fit_plot(&fit, "reconstruction from noisy data", "D", "||f_qr - f||"),
            )?);
            record_fit(&mut rec, "qr_", &fit, 0.2, false);
            rec.advisory("qr_error_shrinks_with_noise", qr_shrinks(&fit));
        }
        Err(e) => rec.advisory("qr_sweep_error", e.to_string()),
    }
    Ok(rec)
}

/// Mean error per level is nonincreasing (10% slack) as the noise drops.
fn qr_shrinks(fit: &StabilityFit) -> bool {
    let mut levels: Vec<f64> = fit.samples.iter().map(|s| s.noise).collect();
    levels.dedup();
    let means: Vec<f64> = levels
        .iter()
        .map(|l| {
            let v: Vec<f64> = fit.samples.iter().filter(|s| s.noise == *l).map(|s| s.err).collect();
            v.iter().sum::<f64>() / v.len() as f64
        })
        .collect();
    means.windows(2).all(|w| w[0] <= 1.1 * w[1])
}

fn inverse_coefficient(sc: &Scenario, em: &mut output::Emitter) -> Result<ExperimentRecord> {
    let mut rec = ExperimentRecord::new("inverse-coefficient");
    let setup = coefficient_setup(sc)?;
    let eps = setup.eps;
    let mut deltas = vec![0.0];
    deltas.extend(sc.log_sweep("delta_min", "delta_max", "delta_count")?);
    let exp = coefficient_stability_experiment(&setup, &deltas)?;

    let rows = exp.fit.samples.iter().zip(&exp.effective_deltas).map(|(s, de)| {
        vec![
            output::num(s.noise),
            output::num(*de),
            output::num(s.d),
            output::num(s.f),
            output::num(s.err),
        ]
    });
    rec.files.push(em.csv(
        "coefficient.csv",
        &["delta", "delta_effective", "D_frak", "F_frak", "left_norm"],
        rows,
    )?);
    rec.files.push(em.text(
        "coef_fit.svg",
        &fit_plot(&exp.fit, "coefficient differences vs data", "D", "sum ||A1 - A2||"),
    )?);
    record_fit(&mut rec, "", &exp.fit, 0.25, true);
    rec.pass.remove("error_decreases_with_noise");
    rec.advisory("left_norm_decreases_with_delta", exp.fit.error_decreases);
    rec.value("membership_pair2", &exp.membership2);
    rec.value("determinant", &exp.determinant);
    rec.value("eps", eps);
    rec.pass("determinant_condition", exp.determinant.holds);
    rec.pass("determinant_comparability", exp.determinant.comparability_holds);
    let zero_ok = exp.zero_delta.is_some_and(|(f, d)| f == 0.0 && d <= 1e-12);
    rec.value("zero_delta_max_f_and_d", exp.zero_delta);
    rec.pass("zero_delta_at_floor", zero_ok);
    Ok(rec)
}

/// Source-problem inputs of a scenario on `grid`.
pub fn source_setup(sc: &Scenario, grid: &SpaceTimeGrid) -> Result<SourceSetup> {
    let field = sc.field()?;
    let weight = weight_for(&field, &grid.space, sc.f64("beta")?)?;
    Ok(SourceSetup {
        src: sc.source()?,
        sigma: sigma_mask(sc, &field, grid)?,
        grid: grid.clone(),
        eps_star: sc.f64("eps_star")?,
        eps: eps_for(sc, "eps", &weight)?,
        weight,
        field,
        s: sc.f64("qr_s")?,
        holder_c: sc.f64("holder_c")?,
        alpha_b: sc.f64("alpha_b")?,
        alpha_0: sc.f64("alpha_0")?,
    })
}

/// Seeds of the noise sweep: `seed + 1, ..., seed + noise_seeds`.
pub fn noise_seeds(sc: &Scenario, seed: u64) -> Result<Vec<u64>> {
    Ok((0..sc.usize("noise_seeds")? as u64).map(|j| seed + 1 + j).collect())
}

/// Coefficient-problem inputs of a scenario, on the `coef_*` lattice.
pub fn coefficient_setup(sc: &Scenario) -> Result<CoefficientSetup> {
    let field = sc.field()?;
    if !field.is_time_independent() {
        return Err(LabError::Config(
            "the coefficient experiment needs time-independent coefficients".into(),
        ));
    }
    let grid = sc.grid_with("coef_nx", "coef_ny", "coef_nt")?;
    let domain = grid.space.clone();
    let (a0, a) = (field.a0_fn(), field.a_fn());
    let gamma_all = match sc.get("coef_gamma")? {
        "all" => true,
        "plus" => false,
        other => return Err(LabError::Config(format!("coef_gamma = '{other}', expected plus or all"))),
    };
    let a_gamma = a.clone();
    let pair2 = CoefficientPair::new(
        domain.clone(),
        move |x| a0(x, 0.0),
        move |x| a(x, 0.0),
        sc.f64("coef_m")?,
        sc.f64("coef_rho")?,
        move |x, n| gamma_all || crate::grid::dot(a_gamma(x, 0.0), n) > 0.0,
    );
    let dir_spec: Vec<&str> = sc.get("coef_direction")?.split_whitespace().collect();
    let amp: f64 = dir_spec
        .get(1)
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| LabError::Config("coef_direction needs an amplitude".into()))?;
    let (lo, hi) = (domain.lo(), domain.hi());
    let dim = domain.dim();
    let center = [(lo[0] + hi[0]) / 2.0, (lo[1] + hi[1]) / 2.0];
    let width = if dim == 1 {
        (hi[0] - lo[0]) / 2.0
    } else {
        ((hi[0] - lo[0]).min(hi[1] - lo[1])) / 2.0
    };
    let b = bump(center, width, dim);
    let direction = match dir_spec[0] {
        "bump-a0" => Direction {
            a0: Arc::new(move |x| amp * b(x)),
            a: Arc::new(|_| [0.0, 0.0]),
        },
        "bump-a" => {
            let a = pair2.a.clone();
            Direction {
                a0: Arc::new(|_| 0.0),
                a: Arc::new(move |x| {
                    let v = a(x);
                    let n = crate::grid::norm(v).max(1e-300);
                    [amp * b(x) * v[0] / n, amp * b(x) * v[1] / n]
                }),
            }
        }
        other => return Err(LabError::Config(format!("unknown coef_direction '{other}'"))),
    };
    let field2 = pair2.field(grid.t_final);
    let beta = sc.f64("coef_beta")?;
    let eps = eps_for(sc, "coef_eps", &weight_for(&field2, &domain, beta)?)?;
    Ok(CoefficientSetup {
        pair2,
        direction,
        p: sc.scalar("coef_p")?,
        grid: grid.clone(),
        beta,
        eps_star: sc.f64("eps_star")?,
        eps,
        m0: sc.f64("coef_m0")?,
        holder_c: sc.f64("holder_c")?,
    })
}
