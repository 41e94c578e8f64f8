//! Fourier coefficients of `phi_z(t) = |1 - e(t)|^z` and logarithmic
//! averages of `phi_beta` along the Kronecker sequence `(l t)`.

use crate::cycles::Block;
use crate::error::{invalid, Error, Result};
use crate::quad::tanh_sinh;
use crate::stats::ls_slope;
use crate::torus::{scaled_frac, TorusPoint};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// `|1 - e(u)|^beta = (2 |sin pi u|)^beta`.
pub fn phi(beta: f64, u: f64) -> f64 {
    (2.0 * (PI * u).sin()).abs().powf(beta)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FourierRow {
    pub z_re: f64,
    pub z_im: f64,
    pub xi: i64,
    pub re: f64,
    pub im: f64,
    pub quad_error: f64,
}

impl FourierRow {
    pub fn value(&self) -> Complex64 {
        Complex64::new(self.re, self.im)
    }

    pub fn abs(&self) -> f64 {
        self.value().norm()
    }
}

/// Relative accuracy requested from the quadrature.
pub const FOURIER_REL_TOL: f64 = 1e-8;
/// Absolute floor, relative to `sup |phi_z| = 2^Re z`; coefficients below it
/// are limited by cancellation in double precision.
pub const FOURIER_ABS_FLOOR: f64 = 1e-12;

/// `phi_hat_z(xi) = ∫ |1 - e(t)|^z e(-xi t) dt`.
///
/// `phi_z` is symmetric about `1/2`, so the coefficient equals
/// `2 ∫_0^{1/2} (2 sin pi t)^z cos(2 pi xi t) dt` (and is even in `xi`).
/// The half-interval is cut at every half period of the cosine and each piece
/// is integrated by tanh-sinh, which absorbs the `t^z` endpoint behaviour.
pub fn phi_hat(z: Complex64, xi: i64) -> Result<FourierRow> {
    if !(z.re >= 0.5) || !z.im.is_finite() {
        return Err(invalid(format!("phi_hat needs Re z >= 1/2, got {z}")));
    }
    let freq = xi.unsigned_abs();
    let pieces = freq.max(1);
    let width = 0.5 / pieces as f64;
    let scale = 2f64.powf(z.re);
    let mut total = Complex64::new(0.0, 0.0);
    let mut err = 0.0;
    for i in 0..pieces {
        let a = i as f64 * width;
        let b = if i + 1 == pieces { 0.5 } else { (i + 1) as f64 * width };
        let q = tanh_sinh(
            |t: f64| {
                let log_base = (2.0 * (PI * t).sin()).ln();
                (z * log_base).exp() * (2.0 * PI * (freq as f64) * t).cos()
            },
            a,
            b,
            1e-17 * scale,
            1e-13,
        );
        total += q.value;
        err += q.error;
    }
    let value = total * 2.0;
    let err = 2.0 * err;
    if err > (FOURIER_REL_TOL * value.norm()).max(FOURIER_ABS_FLOOR * scale) {
        return Err(Error::Accuracy { achieved: err, value: value.norm() });
    }
    Ok(FourierRow { z_re: z.re, z_im: z.im, xi, re: value.re, im: value.im, quad_error: err })
}

/// Empirical decay of `|phi_hat_z(xi)|` over `xi_min..=xi_max`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayEnvelope {
    /// Least-squares slope of `log|phi_hat|` against `log xi`; `-inf` when
    /// every coefficient in range vanishes to rounding.
    pub slope: f64,
    /// `max |phi_hat(xi)| xi^{3/2}`, an empirical `K+(z)`.
    pub k_plus: f64,
    pub xi_min: i64,
    pub xi_max: i64,
    pub points_fitted: usize,
    /// `slope <= -1.4`.
    pub passes: bool,
}

/// Slope threshold for summable `|xi|^{-3/2}` decay, with slack.
pub const DECAY_SLOPE_BOUND: f64 = -1.4;

pub fn decay_envelope(z: Complex64, xi_max: i64) -> Result<DecayEnvelope> {
    decay_envelope_range(z, 2, xi_max)
}

pub fn decay_envelope_range(z: Complex64, xi_min: i64, xi_max: i64) -> Result<DecayEnvelope> {
    if z.re < 1.0 {
        return Err(invalid(format!("decay envelope needs Re z >= 1, got {z}")));
    }
    if xi_min < 1 || xi_max <= xi_min {
        return Err(invalid("frequency range must satisfy 1 <= xi_min < xi_max"));
    }
    let floor = 10.0 * FOURIER_ABS_FLOOR * 2f64.powf(z.re);
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut k_plus = 0.0f64;
    for xi in xi_min..=xi_max {
        let a = phi_hat(z, xi)?.abs();
        k_plus = k_plus.max(a * (xi as f64).powf(1.5));
        if a > floor {
            xs.push((xi as f64).ln());
            ys.push(a.ln());
        }
    }
    let slope = if xs.len() >= 2 { ls_slope(&xs, &ys) } else { f64::NEG_INFINITY };
    Ok(DecayEnvelope { slope, k_plus, xi_min, xi_max, points_fitted: xs.len(), passes: slope <= DECAY_SLOPE_BOUND })
}

/// Partial Fourier sum `sum_{|xi| <= K} c_xi e(xi u)` of an even sequence
/// given as `coeffs[xi] = c_xi` for `xi = 0..=K`.
pub fn fourier_partial_sum(coeffs: &[Complex64], u: f64) -> Complex64 {
    let mut s = coeffs.first().copied().unwrap_or_default();
    for (xi, c) in coeffs.iter().enumerate().skip(1) {
        s += c * 2.0 * (2.0 * PI * xi as f64 * u).cos();
    }
    s
}

/// `(1/rho_k) sum_{l in I_k} phi(beta, l t)/l`.
pub fn log_average(beta: f64, t: TorusPoint, k: u64, rho: f64) -> Result<f64> {
    log_average_block(beta, t, Block::new(k, rho)?)
}

pub fn log_average_block(beta: f64, t: TorusPoint, block: Block) -> Result<f64> {
    if !(beta > 0.0) {
        return Err(invalid(format!("beta must be positive, got {beta}")));
    }
    if block.is_empty() {
        return Err(invalid(format!("empty block [{}, {})", block.start, block.end)));
    }
    let mut sum = 0.0;
    for l in (block.start..block.end).rev() {
        let u = match t {
            TorusPoint::Exact(r) => {
                let s = r.scale(l)?;
                if s.is_zero() {
                    continue;
                }
                s.norm()
            }
            TorusPoint::Float(x) => scaled_frac(x, l as f64),
        };
        sum += phi(beta, u) / l as f64;
    }
    Ok(sum / block.mass())
}
