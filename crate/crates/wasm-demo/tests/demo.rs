use std::f64::consts::PI;

use carleman_lab_wasm::{phi0_grid, ratio_curves, solution_grid, S_GRID};

#[test]
fn horizontal_drift_gives_phi0_equal_to_x() {
    let n = 11;
    let phi = phi0_grid(0.0, 0.0, n).unwrap();
    for (i, v) in phi.iter().enumerate() {
        let x = (i % n) as f64 / (n - 1) as f64;
        assert!((v - x).abs() < 1e-9, "{i}: {v}");
    }
}

#[test]
fn bent_drift_is_still_traced() {
    let phi = phi0_grid(0.6, 1.5, 15).unwrap();
    assert!(phi.iter().all(|v| v.is_finite() && *v >= 0.0));
    assert!(phi0_grid(2.0, 0.0, 5).is_err());
}

#[test]
fn ratio_curves_are_finite_and_reject_large_beta() {
    let r = ratio_curves(0.5, 3, 7, 2.5).unwrap();
    assert_eq!(r.len(), 3 * S_GRID.len());
    assert!(r.iter().all(|v| v.is_finite() && *v > 0.0));
    assert!(ratio_curves(1.0, 3, 7, 2.5).unwrap_err().contains("beta"));
}

#[test]
fn forward_solution_matches_closed_form_behind_the_front() {
    let (nx, nt, amp) = (41, 41, 1.3);
    let u = solution_grid(0.0, amp, nx, nt, 1.0).unwrap();
    for k in 0..nt {
        let t = k as f64 / (nt - 1) as f64;
        for i in 0..nx {
            let x = i as f64 / (nx - 1) as f64;
            if x >= t {
                let exact = amp / PI * ((PI * (x - t)).cos() - (PI * x).cos());
                assert!((u[k * nx + i] - exact).abs() < 1e-4);
            }
        }
    }
}

