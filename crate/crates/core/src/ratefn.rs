//! Cumulant generating function of `V = log|1 - e(U)|`, its Legendre
//! transform, the critical constant `x*` solving `lambda*(x*) = 1`, the
//! Bahadur–Rao tail approximation and the exponentially tilted law of `V`.
//!
//! The primary route is the closed form
//!
//! ```text
//! lambda(beta) = beta log 2 + lnΓ((beta+1)/2) - lnΓ(beta/2 + 1) - (1/2) log pi
//! ```
//!
//! with derivatives through digamma and trigamma; tanh-sinh quadrature of
//! `∫ (2 sin pi u)^z du` is kept as an independent cross-check and is the
//! only route for complex `z`.

use crate::error::{domain, Error, Result};
use crate::quad::tanh_sinh;
use crate::rng::{self, Stream};
use crate::special::{digamma, ln_gamma, trigamma};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Beta, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::{LN_2, PI};

const HALF_LN_PI: f64 = 0.572_364_942_924_700_1;

/// Largest tilt supported by [`TiltedSampler`].
pub const MAX_TILT: f64 = 64.0;

fn check_beta(beta: f64) -> Result<()> {
    if beta.is_finite() && beta > 0.0 {
        Ok(())
    } else {
        Err(domain(format!("tilt parameter must be positive, got {beta}")))
    }
}

/// `lambda(beta) = log ∫ |1 - e(u)|^beta du`.
pub fn lambda(beta: f64) -> Result<f64> {
    check_beta(beta)?;
    Ok(beta * LN_2 + ln_gamma(0.5 * (beta + 1.0))? - ln_gamma(0.5 * beta + 1.0)? - HALF_LN_PI)
}

/// `(lambda'(beta), lambda''(beta))`.
pub fn lambda_derivs(beta: f64) -> Result<(f64, f64)> {
    check_beta(beta)?;
    let a = 0.5 * (beta + 1.0);
    let b = 0.5 * beta + 1.0;
    let d1 = LN_2 + 0.5 * (digamma(a)? - digamma(b)?);
    let d2 = 0.25 * (trigamma(a)? - trigamma(b)?);
    Ok((d1, d2))
}

/// `∫_0^1 (2 sin pi u)^z du` by quadrature over `[0, 1/2]` (the integrand
/// is symmetric about `1/2`).
pub fn moment_by_quadrature(z: Complex64) -> Result<Complex64> {
    if z.re <= 0.0 {
        return Err(domain(format!("Re z must be positive, got {z}")));
    }
    let q = tanh_sinh(
        |u: f64| {
            let log_base = (2.0 * (PI * u).sin()).ln();
            (z * log_base).exp()
        },
        0.0,
        0.5,
        1e-16,
        1e-15,
    );
    if !q.converged {
        return Err(Error::Accuracy { achieved: q.error, value: q.value.norm() });
    }
    Ok(q.value * 2.0)
}

/// `lambda(beta)` computed by quadrature instead of the closed form.
pub fn lambda_by_quadrature(beta: f64) -> Result<f64> {
    check_beta(beta)?;
    Ok(moment_by_quadrature(Complex64::new(beta, 0.0))?.re.ln())
}

/// `lambda(z)` for complex `z` in the right half-plane (principal branch).
pub fn lambda_complex(z: Complex64) -> Result<Complex64> {
    Ok(moment_by_quadrature(z)?.ln())
}

/// `E V = ∫ log|1 - e(u)| du` by quadrature; the exact value is `0`.
pub fn mean_log_distance_by_quadrature() -> f64 {
    let q = tanh_sinh(|u: f64| (2.0 * (PI * u).sin()).ln(), 0.0, 0.5, 1e-16, 1e-15);
    2.0 * q.value
}

/// Solve `lambda'(beta) = x` by Newton's method safeguarded with bisection.
fn invert_derivative(x: f64) -> Result<f64> {
    let mut lo = 1e-6;
    while lambda_derivs(lo)?.0 > x {
        lo *= 0.5;
        if lo < 1e-300 {
            return Err(domain(format!("x = {x} too close to 0")));
        }
    }
    let mut hi = 200.0;
    while lambda_derivs(hi)?.0 < x {
        hi *= 2.0;
        if hi > 1e15 {
            return Err(domain(format!("x = {x} too close to log 2")));
        }
    }
    let mut beta = if x < 0.5 { (12.0 / (PI * PI) * x).clamp(lo, hi) } else { (0.5 / (LN_2 - x)).clamp(lo, hi) };
    for _ in 0..200 {
        let (d1, d2) = lambda_derivs(beta)?;
        let h = d1 - x;
        if h == 0.0 {
            return Ok(beta);
        }
        if h > 0.0 {
            hi = beta;
        } else {
            lo = beta;
        }
        let mut next = beta - h / d2;
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - beta).abs() <= 1e-12 * beta.max(1e-300) {
            return Ok(next);
        }
        beta = next;
    }
    Ok(beta)
}

/// Legendre transform `lambda*(x) = sup_{beta>0} {x beta - lambda(beta)}`
/// for `x` in `(0, log 2)`. Returns `(lambda*(x), beta_*(x))`.
pub fn legendre(x: f64) -> Result<(f64, f64)> {
    if !(x > 0.0 && x < LN_2) {
        return Err(domain(format!("Legendre transform defined on (0, log 2), got {x}")));
    }
    let beta = invert_derivative(x)?;
    Ok((x * beta - lambda(beta)?, beta))
}

/// The critical pair `(x*, beta*)` and the derived constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateSolution {
    pub x_crit: f64,
    pub beta_crit: f64,
    /// `lambda*(x*)`, equal to 1 up to `residual`.
    pub rate_at: f64,
    /// `lambda(beta*)`.
    pub lambda_at: f64,
    /// `lambda''(beta*)`.
    pub lambda2_at: f64,
    /// `|lambda*(x*) - 1|`.
    pub residual: f64,
}

/// Solve `lambda*(x) = 1` by Newton's method in `x` (using
/// `d lambda*/dx = beta_*(x)`) with a bisection fallback.
pub fn solve_xcrit() -> RateSolution {
    let excess = |x: f64| -> (f64, f64) {
        let (ls, b) = legendre(x).expect("x inside (0, log 2)");
        (ls - 1.0, b)
    };
    let (mut lo, mut hi) = (0.3, LN_2 - 1e-6);
    let mut x = 0.65;
    for _ in 0..200 {
        let (f, slope) = excess(x);
        if f.abs() <= 1e-14 {
            break;
        }
        if f > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        let mut next = x - f / slope;
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - x).abs() < 1e-16 {
            x = next;
            break;
        }
        x = next;
    }
    let (ls, beta) = legendre(x).expect("x inside (0, log 2)");
    let lambda_at = lambda(beta).expect("positive beta");
    let (_, lambda2_at) = lambda_derivs(beta).expect("positive beta");
    RateSolution { x_crit: x, beta_crit: beta, rate_at: ls, lambda_at, lambda2_at, residual: (ls - 1.0).abs() }
}

/// Bahadur–Rao approximation of `P(V_1 + ... + V_q >= y q)`:
/// `exp(-lambda*(y) q) / (beta sqrt(2 pi lambda''(beta) q))` with
/// `beta = beta_*(y)`. Asymptotic as `q -> inf`.
pub fn bahadur_rao_tail(y: f64, q: u64) -> Result<f64> {
    if q == 0 {
        return Err(domain("number of summands must be positive"));
    }
    let (rate, beta) = legendre(y)?;
    let (_, d2) = lambda_derivs(beta)?;
    let q = q as f64;
    Ok((-rate * q).exp() / (beta * (2.0 * PI * d2 * q).sqrt()))
}

/// `P(V >= y)` for a single uniform point, in closed form.
pub fn single_tail(y: f64) -> f64 {
    if y >= LN_2 {
        0.0
    } else {
        1.0 - 2.0 / PI * (0.5 * y.exp()).asin()
    }
}

/// Sampler for the tilted law `|1 - e(u)|^beta du / e^{lambda(beta)}`.
///
/// With `v = sin^2(pi u)` the tilted law on `[0, 1/2]` becomes
/// `Beta((beta+1)/2, 1/2)`, so draws are exact: sample `v`, map back with
/// `u = asin(sqrt v)/pi` and reflect to `1 - u` with probability 1/2.
#[derive(Debug, Clone, Copy)]
pub struct TiltedSampler {
    beta: f64,
    normalizer: f64,
    law: Beta<f64>,
}

impl TiltedSampler {
    pub fn new(beta: f64) -> Result<Self> {
        check_beta(beta)?;
        if beta > MAX_TILT {
            return Err(Error::Unsupported(format!("tilt {beta} exceeds {MAX_TILT}")));
        }
        let law = Beta::new(0.5 * (beta + 1.0), 0.5).map_err(|e| domain(e.to_string()))?;
        Ok(Self { beta, normalizer: lambda(beta)?.exp(), law })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// `e^{lambda(beta)}`.
    pub fn normalizer(&self) -> f64 {
        self.normalizer
    }

    /// The draw is an exact transform, so no proposal is ever rejected.
    pub fn acceptance_probability(&self) -> f64 {
        1.0
    }

    pub fn density(&self, u: f64) -> f64 {
        (2.0 * (PI * u).sin()).abs().powf(self.beta) / self.normalizer
    }

    /// A tilted torus point `u`.
    pub fn sample_point(&self, rng: &mut Stream) -> f64 {
        let v = self.law.sample(rng);
        let u = v.sqrt().min(1.0).asin() / PI;
        if rng.random::<bool>() {
            1.0 - u
        } else {
            u
        }
    }

    /// `V = log|1 - e(u)|` at a tilted point, computed as `log 2 + log(v)/2`.
    pub fn sample_log_value(&self, rng: &mut Stream) -> f64 {
        LN_2 + 0.5 * self.law.sample(rng).ln()
    }
}

pub fn sample_tilted_v(sampler: &TiltedSampler, rng: &mut Stream) -> f64 {
    sampler.sample_point(rng)
}

/// Monte Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailEstimate {
    pub probability: f64,
    pub std_error: f64,
    pub samples: u64,
    pub hits: u64,
}

/// Direct sampling is refused below this predicted probability.
pub const NAIVE_FLOOR: f64 = 1e-5;

const TAIL_CHUNK: u64 = 1 << 14;

/// Mean and standard error of a weighted indicator over `samples` draws.
///
/// `f` returns the likelihood-ratio weight of a hit, or `None` for a miss.
/// Draws are grouped in fixed chunks, each with its own stream under
/// `(seed, tag, chunk)`, so the estimate is independent of the thread count.
pub fn chunked_estimate<F>(samples: u64, seed: u64, tag: &str, f: F) -> TailEstimate
where
    F: Fn(&mut Stream) -> Option<f64> + Sync,
{
    let n_chunks = samples.div_ceil(TAIL_CHUNK);
    let parts: Vec<(f64, f64, u64)> = (0..n_chunks)
        .into_par_iter()
        .map(|ci| {
            let mut rng = rng::stream(seed, &[rng::label(tag), ci]);
            let count = TAIL_CHUNK.min(samples - ci * TAIL_CHUNK);
            let (mut s, mut s2, mut hits) = (0.0, 0.0, 0u64);
            for _ in 0..count {
                if let Some(w) = f(&mut rng) {
                    s += w;
                    s2 += w * w;
                    hits += 1;
                }
            }
            (s, s2, hits)
        })
        .collect();
    let (s, s2, hits) = parts.iter().fold((0.0, 0.0, 0u64), |a, p| (a.0 + p.0, a.1 + p.1, a.2 + p.2));
    let n = samples as f64;
    let mean = s / n;
    let var = (s2 / n - mean * mean).max(0.0) * n / (n - 1.0).max(1.0);
    TailEstimate { probability: mean, std_error: (var / n).sqrt(), samples, hits }
}

/// Importance-sampling estimate of `P(V_1 + ... + V_q >= y q)` for i.i.d.
/// uniform points, tilting every summand at `beta_*(y)` and reweighting by
/// `exp(-beta S + q lambda(beta))`.
pub fn tilted_tail_estimate(y: f64, q: u64, samples: u64, seed: u64) -> Result<TailEstimate> {
    if q == 0 || samples == 0 {
        return Err(domain("q and samples must be positive"));
    }
    if y >= LN_2 {
        return Ok(TailEstimate { probability: 0.0, std_error: 0.0, samples, hits: 0 });
    }
    let (_, beta) = legendre(y)?;
    let sampler = TiltedSampler::new(beta)?;
    let log_mgf = q as f64 * lambda(beta)?;
    let threshold = y * q as f64;
    Ok(chunked_estimate(samples, seed, "tilted-tail", |rng| {
        let s: f64 = (0..q).map(|_| sampler.sample_log_value(rng)).sum();
        (s >= threshold).then(|| (-beta * s + log_mgf).exp())
    }))
}

/// Direct Monte Carlo of the same tail; refused when the Bahadur–Rao
/// prediction is below [`NAIVE_FLOOR`].
pub fn naive_tail_estimate(y: f64, q: u64, samples: u64, seed: u64) -> Result<TailEstimate> {
    if y > 0.0 && y < LN_2 && bahadur_rao_tail(y, q)? < NAIVE_FLOOR {
        return Err(Error::Unsupported(format!("predicted tail below {NAIVE_FLOOR:e}; use tilted_tail_estimate")));
    }
    let threshold = y * q as f64;
    Ok(chunked_estimate(samples, seed, "naive-tail", |rng| {
        let s: f64 = (0..q)
            .map(|_| {
                let u: f64 = rng.random();
                (2.0 * (PI * u).sin()).ln()
            })
            .sum();
        (s >= threshold).then_some(1.0)
    }))
}

/// Rows `(x, lambda*(x), beta_*(x))` on an even grid.
pub fn rate_table(x_min: f64, x_max: f64, steps: usize) -> Result<Vec<(f64, f64, f64)>> {
    if steps < 2 || !(x_min < x_max) {
        return Err(domain("rate table needs x_min < x_max and at least two steps"));
    }
    (0..steps)
        .map(|i| {
            let x = x_min + (x_max - x_min) * i as f64 / (steps - 1) as f64;
            legendre(x).map(|(ls, b)| (x, ls, b))
        })
        .collect()
}
