//! Summary statistics and goodness-of-fit tests used by the experiment harness.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub count: usize,
    pub mean: f64,
    pub stddev: f64,
    pub median: f64,
    pub q05: f64,
    pub q25: f64,
    pub q75: f64,
    pub q95: f64,
    pub min: f64,
    pub max: f64,
}

/// Linear-interpolation quantile of sorted data (`p` in `[0, 1]`).
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = p.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    if lo == hi {
        sorted[lo]
    } else {
        sorted[lo] + (sorted[hi] - sorted[lo]) * frac
    }
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    quantile_sorted(&v, 0.5)
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Unbiased sample variance.
pub fn variance(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let m = mean(values);
    values.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1) as f64
}

impl Summary {
    /// Summarize `values`; `-inf` entries are kept (they sort first).
    pub fn of(values: &[f64]) -> Self {
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        Summary {
            count: v.len(),
            mean: mean(&v),
            stddev: variance(&v).sqrt(),
            median: quantile_sorted(&v, 0.5),
            q05: quantile_sorted(&v, 0.05),
            q25: quantile_sorted(&v, 0.25),
            q75: quantile_sorted(&v, 0.75),
            q95: quantile_sorted(&v, 0.95),
            min: v.first().copied().unwrap_or(f64::NAN),
            max: v.last().copied().unwrap_or(f64::NAN),
        }
    }
}

/// Pearson χ² goodness of fit of `observed` counts against `probs`
/// (which should sum to one). Cells with expected count below 5 are pooled
/// into their neighbour. Returns `(statistic, degrees of freedom, p-value)`.
pub fn chi_square_gof(observed: &[u64], probs: &[f64]) -> (f64, usize, f64) {
    let total: u64 = observed.iter().sum();
    let expected: Vec<f64> = probs.iter().map(|p| p * total as f64).collect();
    let (obs, exp) = pool_small(observed.iter().map(|&o| o as f64).collect(), expected);
    let stat: f64 = obs.iter().zip(&exp).map(|(o, e)| (o - e) * (o - e) / e).sum();
    let df = obs.len().saturating_sub(1).max(1);
    (stat, df, chi_square_sf(stat, df))
}

fn pool_small(obs: Vec<f64>, exp: Vec<f64>) -> (Vec<f64>, Vec<f64>) {
    let mut o_out = Vec::new();
    let mut e_out = Vec::new();
    let (mut o_acc, mut e_acc) = (0.0, 0.0);
    for (o, e) in obs.into_iter().zip(exp) {
        o_acc += o;
        e_acc += e;
        if e_acc >= 5.0 {
            o_out.push(o_acc);
            e_out.push(e_acc);
            o_acc = 0.0;
            e_acc = 0.0;
        }
    }
    if e_acc > 0.0 || o_acc > 0.0 {
        if let (Some(lo), Some(le)) = (o_out.last_mut(), e_out.last_mut()) {
            *lo += o_acc;
            *le += e_acc;
        } else {
            o_out.push(o_acc);
            e_out.push(e_acc);
        }
    }
    (o_out, e_out)
}

/// χ² test of homogeneity for two histograms over the same bins.
/// Returns `(statistic, degrees of freedom, p-value)`.
pub fn chi_square_two_sample(a: &[u64], b: &[u64]) -> (f64, usize, f64) {
    let na: u64 = a.iter().sum();
    let nb: u64 = b.iter().sum();
    let n = (na + nb) as f64;
    // Pool bins so every expected cell count is at least 5.
    let mut pooled: Vec<(f64, f64)> = Vec::new();
    let (mut pa, mut pb) = (0.0, 0.0);
    for (&x, &y) in a.iter().zip(b) {
        pa += x as f64;
        pb += y as f64;
        let col = pa + pb;
        if col * (na.min(nb) as f64) / n >= 5.0 {
            pooled.push((pa, pb));
            pa = 0.0;
            pb = 0.0;
        }
    }
    if pa + pb > 0.0 {
        if let Some(last) = pooled.last_mut() {
            last.0 += pa;
            last.1 += pb;
        } else {
            pooled.push((pa, pb));
        }
    }
    let mut stat = 0.0;
    for &(x, y) in &pooled {
        let col = x + y;
        let ea = col * na as f64 / n;
        let eb = col * nb as f64 / n;
        stat += (x - ea) * (x - ea) / ea + (y - eb) * (y - eb) / eb;
    }
    let df = pooled.len().saturating_sub(1).max(1);
    (stat, df, chi_square_sf(stat, df))
}

pub fn chi_square_sf(stat: f64, df: usize) -> f64 {
    let dist = ChiSquared::new(df as f64).expect("positive degrees of freedom");
    dist.sf(stat)
}

pub fn normal_cdf(x: f64) -> f64 {
    Normal::standard().cdf(x)
}

/// Kolmogorov–Smirnov distance between the empirical law of `values` and
/// the standard normal.
pub fn ks_standard_normal(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    v.iter().enumerate().fold(0.0f64, |acc, (i, &x)| {
        let f = normal_cdf(x);
        let upper = (i + 1) as f64 / n - f;
        let lower = f - i as f64 / n;
        acc.max(upper).max(lower)
    })
}

/// Least-squares slope of `y` on `x`.
pub fn ls_slope(x: &[f64], y: &[f64]) -> f64 {
    let mx = mean(x);
    let my = mean(y);
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// Pearson correlation coefficient.
pub fn correlation(x: &[f64], y: &[f64]) -> f64 {
    let mx = mean(x);
    let my = mean(y);
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let syy: f64 = y.iter().map(|b| (b - my) * (b - my)).sum();
    sxy / (sxx * syy).sqrt()
}

/// Pearson correlation from running sums: `n`, `[sum x, sum y]` and
/// `[sum x^2, sum y^2, sum xy]`.
pub fn correlation_from_moments(n: f64, sums: [f64; 2], squares: [f64; 3]) -> f64 {
    let (mx, my) = (sums[0] / n, sums[1] / n);
    let vx = squares[0] / n - mx * mx;
    let vy = squares[1] / n - my * my;
    let cxy = squares[2] / n - mx * my;
    cxy / (vx * vy).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantiles() {
        let s = Summary::of(&[3.0, 1.0, 2.0, 4.0]);
        assert_eq!(s.median, 2.5);
        assert_eq!(s.min, 1.0);
        assert_eq!(s.max, 4.0);
        assert!((s.mean - 2.5).abs() < 1e-15);
    }

    #[test]
    fn chi_square_perfect_fit() {
        let (stat, df, p) = chi_square_gof(&[250, 250, 500], &[0.25, 0.25, 0.5]);
        assert_eq!(stat, 0.0);
        assert_eq!(df, 2);
        assert!((p - 1.0).abs() < 1e-12);
    }

    #[test]
    fn chi_square_detects_mismatch() {
        let (_, _, p) = chi_square_gof(&[400, 100, 500], &[0.25, 0.25, 0.5]);
        assert!(p < 1e-10);
        let (_, _, p) = chi_square_two_sample(&[400, 100, 500], &[250, 250, 500]);
        assert!(p < 1e-10);
    }

    #[test]
    fn ks_of_normal_quantiles_is_small() {
        // Midpoint quantiles of N(0,1) via bisection on the cdf.
        let n = 1000;
        let values: Vec<f64> = (0..n)
            .map(|i| {
                let p = (i as f64 + 0.5) / n as f64;
                let (mut lo, mut hi) = (-10.0, 10.0);
                for _ in 0..100 {
                    let mid = 0.5 * (lo + hi);
                    if normal_cdf(mid) < p {
                        lo = mid
                    } else {
                        hi = mid
                    }
                }
                lo
            })
            .collect();
        assert!(ks_standard_normal(&values) < 1e-3);
    }
}
