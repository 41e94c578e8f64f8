//! Log-gamma, digamma and trigamma on the positive real axis.
//!
//! Each function shifts the argument above [`SHIFT`] with the recurrence and
//! then sums the Stirling asymptotic series through the B16 term, which is
//! accurate to a few ulps there.

use crate::error::{domain, Result};

const SHIFT: f64 = 12.0;
const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

// B_{2k} / (2k (2k-1))
const LGAMMA_SERIES: [f64; 8] = [
    1.0 / 12.0,
    -1.0 / 360.0,
    1.0 / 1260.0,
    -1.0 / 1680.0,
    1.0 / 1188.0,
    -691.0 / 360_360.0,
    1.0 / 156.0,
    -3617.0 / 122_400.0,
];

// B_{2k} / (2k)
const DIGAMMA_SERIES: [f64; 8] =
    [1.0 / 12.0, -1.0 / 120.0, 1.0 / 252.0, -1.0 / 240.0, 1.0 / 132.0, -691.0 / 32_760.0, 1.0 / 12.0, -3617.0 / 8160.0];

// B_{2k}
const TRIGAMMA_SERIES: [f64; 8] =
    [1.0 / 6.0, -1.0 / 30.0, 1.0 / 42.0, -1.0 / 30.0, 5.0 / 66.0, -691.0 / 2730.0, 7.0 / 6.0, -3617.0 / 510.0];

fn check(x: f64) -> Result<()> {
    if x.is_finite() && x > 0.0 {
        Ok(())
    } else {
        Err(domain(format!("special function argument must be positive, got {x}")))
    }
}

/// Evaluate `sum_k c_k * w^k` for `w = 1/x^2`, highest order first.
fn series(coeffs: &[f64], w: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * w + c)
}

/// `ln Γ(x)` for `x > 0`.
pub fn ln_gamma(x: f64) -> Result<f64> {
    check(x)?;
    let mut y = x;
    let mut prod = 1.0;
    while y < SHIFT {
        prod *= y;
        y += 1.0;
    }
    let w = 1.0 / (y * y);
    let stirling = (y - 0.5) * y.ln() - y + HALF_LN_2PI + series(&LGAMMA_SERIES, w) / y;
    Ok(stirling - prod.ln())
}

/// Digamma `ψ(x) = Γ'(x)/Γ(x)` for `x > 0`.
pub fn digamma(x: f64) -> Result<f64> {
    check(x)?;
    let mut y = x;
    let mut shift = 0.0;
    while y < SHIFT {
        shift += 1.0 / y;
        y += 1.0;
    }
    let w = 1.0 / (y * y);
    Ok(y.ln() - 0.5 / y - w * series(&DIGAMMA_SERIES, w) - shift)
}

/// Trigamma `ψ'(x)` for `x > 0`.
pub fn trigamma(x: f64) -> Result<f64> {
    check(x)?;
    let mut y = x;
    let mut shift = 0.0;
    while y < SHIFT {
        shift += 1.0 / (y * y);
        y += 1.0;
    }
    let w = 1.0 / (y * y);
    Ok(1.0 / y + 0.5 * w + series(&TRIGAMMA_SERIES, w) * w / y + shift)
}
