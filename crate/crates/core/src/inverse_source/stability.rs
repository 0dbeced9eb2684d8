//! Hölder-stability experiments: paired samples `(D, F, error)` and a
//! log-log fit of `error ~ D^theta`.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{LabError, Result};
use crate::forward::{add_noise, extract_trace, solve_characteristics, CauchyData, Inflow, Profile, SourceSpec};
use crate::geometry::boundary::BoundaryMask;
use crate::geometry::field::SpaceTimeField;
use crate::geometry::weight::WeightField;
use crate::grid::{l2_masked, Point, SpaceTimeGrid};
use crate::inverse_source::qr::{reconstruct_qr, ReconstructionProblem};
use crate::par;

/// Which branch of the `s` choice applies.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SBranch {
    /// `0 < D < F`: `s = log(F/D) / (C + eps)`.
    Balanced,
    /// `D >= F`: `s = 0`, the bound degenerates to `C e^{Cs} D`.
    DataDominates,
}

/// `s = log(F / D) / (C + eps)`, or `0` when `D >= F`.
pub fn balance_s(d: f64, f: f64, c: f64, eps: f64) -> Result<(f64, SBranch)> {
    if !(d > 0.0) || !(f > 0.0) {
        return Err(LabError::NonpositiveData { d, f });
    }
    if d >= f {
        return Ok((0.0, SBranch::DataDominates));
    }
    Ok(((f / d).ln() / (c + eps), SBranch::Balanced))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum StabilityMode {
    /// Pairs `(f, f + delta f)` with exact data.
    Perturbation,
    /// QR reconstruction from noisy data.
    Reconstruction,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StabilitySample {
    pub noise: f64,
    pub seed: u64,
    pub d: f64,
    pub f: f64,
    pub err: f64,
    pub s_used: f64,
    pub branch: Option<SBranch>,
}

#[derive(Clone, Debug, Serialize)]
pub struct StabilityFit {
    pub mode: StabilityMode,
    pub samples: Vec<StabilitySample>,
    /// Indices of the samples that entered the regression.
    pub used: Vec<usize>,
    pub theta_hat: f64,
    /// Intercept of `log10 err = intercept + theta log10 D`.
    pub intercept: f64,
    /// Root-mean-square regression residual in log10 units.
    pub residual: f64,
    /// Smallest `C` with `err <= C (D + F^{1-theta} D^theta)` on all used samples.
    pub c_fit: f64,
    /// Constant `C` fed to the `s` choice and to `theta = eps / (C + eps)`.
    pub holder_c: f64,
    pub theta_theory: f64,
    /// Error of the zero-noise sample (`D = 0`), if present.
    pub floor: Option<f64>,
    /// Mean error at the smallest noise level is below the one at the largest.
    pub error_decreases: bool,
}

/// Ordinary least squares of `y` on `x`: (slope, intercept, rms residual).
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - intercept - slope * a).powi(2))
        .sum();
    (slope, intercept, (rss / n).sqrt())
}

/// Regression over samples with `D > 0`, `D >= 1e-10 F` and `D >= 10 floor_d`.
pub fn fit_samples(
    mode: StabilityMode,
    samples: Vec<StabilitySample>,
    floor_d: f64,
    holder_c: f64,
    eps: f64,
) -> Result<StabilityFit> {
    let used: Vec<usize> = samples
        .iter()
        .enumerate()
        .filter(|(_, s)| s.d > 0.0 && s.err > 0.0 && s.d >= 1e-10 * s.f && s.d >= 10.0 * floor_d)
        .map(|(i, _)| i)
        .collect();
    if used.len() < 4 {
        return Err(LabError::DegenerateSamples { usable: used.len() });
    }
    let x: Vec<f64> = used.iter().map(|&i| samples[i].d.log10()).collect();
    let y: Vec<f64> = used.iter().map(|&i| samples[i].err.log10()).collect();
    let (theta_hat, intercept, residual) = linear_fit(&x, &y);
    let c_fit = used
        .iter()
        .map(|&i| {
            let s = &samples[i];
            s.err / (s.d + s.f.powf(1.0 - theta_hat) * s.d.powf(theta_hat))
        })
        .fold(0.0_f64, f64::max);
    let floor = samples.iter().find(|s| s.d == 0.0).map(|s| s.err);

    let positive: Vec<&StabilitySample> = samples.iter().filter(|s| s.noise > 0.0).collect();
    let lo = positive.iter().map(|s| s.noise).fold(f64::INFINITY, f64::min);
    let hi = positive.iter().map(|s| s.noise).fold(0.0_f64, f64::max);
    let mean_at = |level: f64| {
        let v: Vec<f64> = positive.iter().filter(|s| s.noise == level).map(|s| s.err).collect();
        v.iter().sum::<f64>() / v.len() as f64
    };
    Ok(StabilityFit {
        mode,
        error_decreases: mean_at(lo) < mean_at(hi),
        samples,
        used,
        theta_hat,
        intercept,
        residual,
        c_fit,
        holder_c,
        theta_theory: eps / (holder_c + eps),
        floor,
    })
}

/// Everything the source experiments share.
#[derive(Clone, Debug)]
pub struct SourceSetup {
    pub field: SpaceTimeField,
    pub src: SourceSpec,
    pub weight: WeightField,
    pub grid: SpaceTimeGrid,
    pub sigma: BoundaryMask,
    pub eps_star: f64,
    pub eps: f64,
    /// Carleman parameter of the reconstruction.
    pub s: f64,
    /// Constant used in the `s` balance and the theoretical exponent.
    pub holder_c: f64,
    pub alpha_b: f64,
    pub alpha_0: f64,
}

impl SourceSetup {
    /// Quasi-reversibility problem for `data`, relative residual 1e-8 within
    /// 5000 iterations.
    pub fn problem(&self, data: CauchyData) -> ReconstructionProblem {
        ReconstructionProblem {
            field: self.field.clone(),
            src: self.src.clone(),
            weight: self.weight.clone(),
            grid: self.grid.clone(),
            eps_star: self.eps_star,
            eps: self.eps,
            sigma: self.sigma.clone(),
            data,
            alpha_b: self.alpha_b,
            alpha_0: self.alpha_0,
            alpha_r: None,
            s: self.s,
            tol: 1e-8,
            max_iter: 5000,
            precondition: true,
        }
    }
}

/// Random smooth shape: a few seeded Fourier modes per axis on the bounding
/// box, normalised to unit `L^2(Omega)`.
pub fn smooth_shape(grid: &SpaceTimeGrid, seed: u64) -> Profile {
    let d = &grid.space;
    let (lo, hi, dim) = (d.lo(), d.hi(), d.dim());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let modes = |rng: &mut ChaCha8Rng| -> Vec<(f64, f64, f64)> {
        (1..=4)
            .map(|j| {
                (
                    rng.random_range(-1.0..1.0) / j as f64,
                    j as f64,
                    rng.random_range(0.0..std::f64::consts::TAU),
                )
            })
            .collect()
    };
    let mx = modes(&mut rng);
    let my = modes(&mut rng);
    let c0: f64 = rng.random_range(-0.5..0.5);
    let eval = move |x: Point| -> f64 {
        let series = |m: &[(f64, f64, f64)], xi: f64| -> f64 {
            m.iter().map(|(a, k, ph)| a * (k * PI * xi + ph).sin()).sum()
        };
        let mut v = c0 + series(&mx, (x[0] - lo[0]) / (hi[0] - lo[0]));
        if dim == 2 {
            v *= 1.0 + 0.5 * series(&my, (x[1] - lo[1]) / (hi[1] - lo[1]));
        }
        v
    };
    let raw: Vec<f64> = d.nodes().into_iter().map(&eval).collect();
    let norm = l2_masked(d, &raw, None);
    Profile::function(move |x| eval(x) / norm)
}

fn sample_seed(seed: u64, level_index: usize) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ (level_index as u64 + 1)
}

/// Perturbation mode: `delta f = level * ||f||_{L^2} * zeta` with a seeded
/// smooth unit shape `zeta`; data and norms from the two forward solves.
pub fn stability_mode_a(setup: &SourceSetup, levels: &[f64], seeds: &[u64]) -> Result<StabilityFit> {
    let grid = &setup.grid;
    let d = &grid.space;
    let init = Profile::zero();
    let base = solve_characteristics(&setup.field, &setup.src, &init, &Inflow::Extended, grid, 1)?;
    let u0_mask = setup.weight.omega_mask(setup.eps_star);
    let base_data = extract_trace(&base, &setup.sigma, &u0_mask)?;
    let f_values = setup.src.f.sample(d);
    let f_norm = l2_masked(d, &f_values, None);
    let eps_mask = setup.weight.omega_mask(setup.eps);

    let cells: Vec<(usize, f64, u64)> = levels
        .iter()
        .enumerate()
        .flat_map(|(li, &l)| seeds.iter().map(move |&s| (li, l, s)))
        .collect();
    let samples = par::map(&cells, |&(li, level, seed)| -> Result<StabilitySample> {
        let zeta = smooth_shape(grid, sample_seed(seed, li));
        let scale = level * f_norm;
        let f_pert = {
            let base_f = setup.src.f.clone();
            let z = zeta.clone();
            let dd = d.clone();
            Profile::function(move |x| base_f.eval(&dd, x) + scale * z.eval(&dd, x))
        };
        let u = solve_characteristics(&setup.field, &setup.src.with_f(f_pert), &init, &Inflow::Extended, grid, 1)?;
        let data = extract_trace(&u, &setup.sigma, &u0_mask)?;
        let diff = data.difference(&base_data);
        let dd = diff.d_norm(grid);
        let du = crate::grid::GridFunction::from_values(
            grid,
            u.values.iter().zip(&base.values).map(|(a, b)| a - b).collect(),
        )?;
        let delta_f: Vec<f64> = zeta.sample(d).iter().map(|z| scale * z).collect();
        let left = l2_masked(d, &delta_f, Some(&eps_mask));
        let ff = l2_masked(d, &delta_f, None) + du.h1_time_norm();
        let (s_used, branch) = if dd > 0.0 {
            let (s, b) = balance_s(dd, ff, setup.holder_c, setup.eps)?;
            (s, Some(b))
        } else {
            (0.0, None)
        };
        Ok(StabilitySample {
            noise: level,
            seed,
            d: dd,
            f: ff,
            err: left,
            s_used,
            branch,
        })
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    fit_samples(StabilityMode::Perturbation, samples, 0.0, setup.holder_c, setup.eps)
}

/// Reconstruction mode: QR from noisy data, error on `Omega_{3 eps}`.
/// A zero level (if present) gives the noiseless floor.
pub fn stability_mode_b(setup: &SourceSetup, levels: &[f64], seeds: &[u64]) -> Result<StabilityFit> {
    let grid = &setup.grid;
    let d = &grid.space;
    let u = solve_characteristics(&setup.field, &setup.src, &Profile::zero(), &Inflow::Extended, grid, 1)?;
    let u0_mask = setup.weight.omega_mask(setup.eps_star);
    let clean = extract_trace(&u, &setup.sigma, &u0_mask)?;
    let truth = setup.src.f.sample(d);
    let ff = l2_masked(d, &truth, None) + u.h1_time_norm();
    let mask3 = setup.weight.omega_mask(3.0 * setup.eps);

    let mut cells: Vec<(f64, u64)> = Vec::new();
    for &l in levels {
        if l == 0.0 {
            cells.push((0.0, 0));
        } else {
            cells.extend(seeds.iter().map(|&s| (l, s)));
        }
    }
    let samples = par::map(&cells, |&(level, seed)| -> Result<StabilitySample> {
        let noisy = add_noise(&clean, level, seed, grid);
        let problem = setup.problem(noisy.clone());
        let rec = reconstruct_qr(&problem)?;
        let e: Vec<f64> = rec.f.iter().zip(&truth).map(|(a, b)| a - b).collect();
        let dd = noisy.difference(&clean).d_norm(grid);
        let (s_used, branch) = if dd > 0.0 {
            let (s, b) = balance_s(dd, ff, setup.holder_c, setup.eps)?;
            (s, Some(b))
        } else {
            (0.0, None)
        };
        Ok(StabilitySample {
            noise: level,
            seed,
            d: dd,
            f: ff,
            err: l2_masked(d, &e, Some(&mask3)),
            s_used,
            branch,
        })
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    fit_samples(StabilityMode::Reconstruction, samples, 0.0, setup.holder_c, setup.eps)
}

pub fn stability_experiment(
    setup: &SourceSetup,
    mode: StabilityMode,
    levels: &[f64],
    seeds: &[u64],
) -> Result<StabilityFit> {
    match mode {
        StabilityMode::Perturbation => stability_mode_a(setup, levels, seeds),
        StabilityMode::Reconstruction => stability_mode_b(setup, levels, seeds),
    }
}
