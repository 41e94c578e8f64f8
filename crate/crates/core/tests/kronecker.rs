use permfield::kronecker::{decay_envelope_range, fourier_partial_sum, log_average, phi, phi_hat};
use permfield::ratefn::{lambda, solve_xcrit};
use permfield::stats::median;
use permfield::torus::GOLDEN;
use permfield::{Complex64, TorusPoint};
use std::f64::consts::{PI, SQRT_2};

/// Periodic trapezoid rule for the coefficient, independent of the library.
fn trapezoid_coefficient(z: Complex64, xi: i64, points: usize) -> Complex64 {
    let h = 1.0 / points as f64;
    let mut s = Complex64::new(0.0, 0.0);
    for i in 1..points {
        let t = i as f64 * h;
        let base = (2.0 * (PI * t).sin()).ln();
        s += (z * base).exp() * Complex64::from_polar(1.0, -2.0 * PI * xi as f64 * t);
    }
    s * h
}

#[test]
fn coefficients_against_trapezoid_oracle() {
    for z in [Complex64::new(2.5, 0.0), Complex64::new(1.0, 5.0), Complex64::new(3.0, -2.0)] {
        for xi in [0i64, 1, 3, 17, 64] {
            let row = phi_hat(z, xi).unwrap();
            let oracle = trapezoid_coefficient(z, xi, 1 << 17);
            let tol = 1e-7 * (1.0 + oracle.norm());
            assert!((row.value() - oracle).norm() < tol, "z={z} xi={xi}: {} vs {oracle}", row.value());
        }
    }
}

#[test]
fn real_order_coefficients_match_lambda() {
    for beta in [1.0, 2.5, 7.0, solve_xcrit().beta_crit] {
        let row = phi_hat(Complex64::new(beta, 0.0), 0).unwrap();
        assert!((row.re - lambda(beta).unwrap().exp()).abs() <= 1e-8 * row.re);
    }
}

#[test]
fn decay_slopes() {
    for z in [Complex64::new(1.0, 0.0), Complex64::new(1.0, 5.0), Complex64::new(2.5, 0.0)] {
        let env = decay_envelope_range(z, 4, 256).unwrap();
        assert!(env.slope <= -1.4, "z={z}: slope {}", env.slope);
        assert!(env.k_plus.is_finite());
        assert!(env.passes);
    }
    let env = decay_envelope_range(Complex64::new(2.5, 0.0), 4, 256).unwrap();
    assert!(env.slope <= -1.8, "slope {}", env.slope);
}

#[test]
fn order_two_is_a_trig_polynomial() {
    let z = Complex64::new(2.0, 0.0);
    for xi in 2..=40 {
        assert!(phi_hat(z, xi).unwrap().abs() < 1e-10);
    }
    let env = decay_envelope_range(z, 4, 256).unwrap();
    assert_eq!(env.slope, f64::NEG_INFINITY);
}

#[test]
fn partial_fourier_series_reconstructs_phi() {
    let beta = 2.5;
    let z = Complex64::new(beta, 0.0);
    let coeffs: Vec<Complex64> = (0..=512).map(|xi| phi_hat(z, xi).unwrap().value()).collect();
    for i in 1..200 {
        let u = i as f64 / 200.0;
        let approx = fourier_partial_sum(&coeffs, u);
        assert!((approx.re - phi(beta, u)).abs() < 1e-3, "u={u}");
        assert!(approx.im.abs() < 1e-9);
    }
}

fn blocks_in_range(rho: f64, lo: f64, hi: f64) -> Vec<u64> {
    ((lo.ln() / rho).ceil() as u64..=(hi.ln() / rho).floor() as u64).collect()
}

#[test]
fn kronecker_averages_equidistribute() {
    let rho = 0.05;
    let beta = solve_xcrit().beta_crit;
    let target = lambda(beta).unwrap().exp();
    for t in [SQRT_2 - 1.0, GOLDEN] {
        let mut by_octave: Vec<Vec<f64>> = vec![Vec::new(); 7];
        for k in blocks_in_range(rho, 1e4, 1e6) {
            let avg = log_average(beta, TorusPoint::float(t), k, rho).unwrap();
            let err = (avg - target).abs() / target;
            assert!(err <= 0.25, "t={t} k={k}: relative error {err}");
            let octave = (((rho * k as f64).exp() / 1e4).log2().floor() as usize).min(6);
            by_octave[octave].push(err);
        }
        let medians: Vec<f64> = by_octave.iter().filter(|v| !v.is_empty()).map(|v| median(v)).collect();
        let (first, last) = (medians[0], medians[medians.len() - 1]);
        assert!(last <= first, "t={t}: medians {medians:?}");
    }
}

#[test]
fn rational_point_does_not_equidistribute() {
    let rho = 0.05;
    let beta = solve_xcrit().beta_crit;
    let target = lambda(beta).unwrap().exp();
    let third = TorusPoint::rational(1, 3).unwrap();
    let blocks = blocks_in_range(rho, 1e4, 1e6);
    let far =
        blocks.iter().filter(|&&k| (log_average(beta, third, k, rho).unwrap() - target).abs() / target > 0.25).count();
    assert_eq!(far, blocks.len());
}

#[test]
fn quadratic_irrational_at_order_two() {
    let k = (1e5f64.ln() / 0.05).round() as u64;
    let avg = log_average(2.0, TorusPoint::float(SQRT_2 - 1.0), k, 0.05).unwrap();
    assert!((avg - 2.0).abs() < 0.05, "{avg}");
}
