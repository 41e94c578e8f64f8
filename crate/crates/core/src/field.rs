//! The log-characteristic-polynomial field of a permutation matrix,
//!
//! ```text
//! X(t) = sum_l c_l log|1 - e(l t)|        (real kind)
//! Im(t) = sum_l c_l arg(1 - e(l t))        (imaginary kind)
//! ```
//!
//! evaluated at single points and scanned over rotated rational meshes
//! `{ j/q + theta/q^2 }`. On meshes every reduction `l t mod 1` is done in
//! exact integer arithmetic, so the singular values `X = -inf` are detected
//! exactly.

use crate::cycles::CycleCounts;
use crate::error::{invalid, Error, Result};
use crate::torus::{scaled_frac, Rational, TorusPoint};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::f64::consts::{LN_2, PI};
use std::fmt;
use std::ops::Add;

/// Float torus points closer than this to `0` are treated as singular.
pub const FLOAT_SINGULARITY_THRESHOLD: f64 = 1e-15;

/// Mesh points handled per parallel task.
pub const SCAN_CHUNK: u64 = 1 << 16;

/// A value in `[-inf, inf)` with an exact `-inf`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExtReal {
    NegInf,
    Finite(f64),
}

impl ExtReal {
    pub fn from_f64(x: f64) -> Self {
        if x == f64::NEG_INFINITY {
            ExtReal::NegInf
        } else {
            ExtReal::Finite(x)
        }
    }

    pub fn to_f64(self) -> f64 {
        match self {
            ExtReal::NegInf => f64::NEG_INFINITY,
            ExtReal::Finite(x) => x,
        }
    }

    pub fn is_neg_inf(self) -> bool {
        matches!(self, ExtReal::NegInf)
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            ExtReal::NegInf => None,
            ExtReal::Finite(x) => Some(x),
        }
    }

    /// Total order with `-inf` below every finite value.
    pub fn total_cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (ExtReal::NegInf, ExtReal::NegInf) => Ordering::Equal,
            (ExtReal::NegInf, _) => Ordering::Less,
            (_, ExtReal::NegInf) => Ordering::Greater,
            (ExtReal::Finite(a), ExtReal::Finite(b)) => a.total_cmp(b),
        }
    }
}

impl PartialOrd for ExtReal {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.total_cmp(other))
    }
}

impl Add for ExtReal {
    type Output = ExtReal;
    fn add(self, rhs: ExtReal) -> ExtReal {
        match (self, rhs) {
            (ExtReal::Finite(a), ExtReal::Finite(b)) => ExtReal::Finite(a + b),
            _ => ExtReal::NegInf,
        }
    }
}

impl fmt::Display for ExtReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtReal::NegInf => write!(f, "-inf"),
            ExtReal::Finite(x) => write!(f, "{x}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FieldKind {
    Real,
    Imaginary,
}

/// Cycle counts together with the field kind and an optional truncation
/// `l <= M` (the low-frequency part of the field).
#[derive(Debug, Clone, PartialEq)]
pub struct FieldSpec {
    size: u64,
    lengths: Vec<(u64, u64)>,
    kind: FieldKind,
    truncation: Option<u64>,
}

impl FieldSpec {
    pub fn new<C: CycleCounts + ?Sized>(counts: &C, kind: FieldKind) -> Self {
        Self {
            size: counts.size(),
            lengths: counts.counts().iter().map(|(&l, &c)| (l, c)).collect(),
            kind,
            truncation: None,
        }
    }

    pub fn real<C: CycleCounts + ?Sized>(counts: &C) -> Self {
        Self::new(counts, FieldKind::Real)
    }

    pub fn imaginary<C: CycleCounts + ?Sized>(counts: &C) -> Self {
        Self::new(counts, FieldKind::Imaginary)
    }

    /// Restrict to cycle lengths `l <= max_len`.
    pub fn with_truncation(mut self, max_len: u64) -> Result<Self> {
        if max_len > self.size {
            return Err(invalid(format!("truncation {max_len} exceeds size {}", self.size)));
        }
        self.truncation = Some(max_len);
        Ok(self)
    }

    pub fn kind(&self) -> FieldKind {
        self.kind
    }

    pub fn size(&self) -> u64 {
        self.size
    }

    /// `(length, count)` pairs that contribute, in increasing length.
    pub fn active(&self) -> impl Iterator<Item = (u64, u64)> + '_ {
        let cap = self.truncation.unwrap_or(u64::MAX);
        self.lengths.iter().copied().take_while(move |&(l, _)| l <= cap)
    }

    /// `sum_l c_l` over the active lengths.
    pub fn cycle_count(&self) -> u64 {
        self.active().map(|(_, c)| c).sum()
    }
}

/// `log|1 - e(u)| = log(2 |sin(pi u)|)`; `-inf` iff `u = 0` on the torus
/// (exactly for rationals, within [`FLOAT_SINGULARITY_THRESHOLD`] for floats).
pub fn log_dist_term(u: TorusPoint) -> ExtReal {
    match u {
        TorusPoint::Exact(r) => {
            if r.is_zero() {
                ExtReal::NegInf
            } else {
                ExtReal::Finite(log_two_sin(r.norm()))
            }
        }
        TorusPoint::Float(x) => {
            let norm = x.min(1.0 - x);
            if norm < FLOAT_SINGULARITY_THRESHOLD {
                ExtReal::NegInf
            } else {
                ExtReal::Finite(log_two_sin(norm))
            }
        }
    }
}

/// `log(2 sin(pi d))` for `d` in `(0, 1/2]`.
#[inline]
fn log_two_sin(d: f64) -> f64 {
    (2.0 * (PI * d).sin()).ln()
}

/// Principal branch `arg(1 - e(u)) = pi (u - 1/2)` for `u` in `[0, 1)`.
pub fn arg_term(u: TorusPoint) -> f64 {
    PI * (u.to_f64() - 0.5)
}

/// Field value at a single torus point.
pub fn eval_point(spec: &FieldSpec, t: TorusPoint) -> Result<ExtReal> {
    let mut total = ExtReal::Finite(0.0);
    for (l, c) in spec.active() {
        let u = match t {
            TorusPoint::Exact(r) => TorusPoint::Exact(r.scale(l)?),
            TorusPoint::Float(x) => TorusPoint::Float(scaled_frac(x, l as f64)),
        };
        let term = match spec.kind {
            FieldKind::Real => match log_dist_term(u) {
                ExtReal::NegInf => ExtReal::NegInf,
                ExtReal::Finite(v) => ExtReal::Finite(c as f64 * v),
            },
            FieldKind::Imaginary => ExtReal::Finite(c as f64 * arg_term(u)),
        };
        total = total + term;
    }
    Ok(total)
}

/// Exact mean of the field at `t` under a uniform permutation of size `n`:
/// `sum_{l <= n} term(l t) / l`, since `E C_l = 1/l`.
pub fn expected_value(t: TorusPoint, n: u64, kind: FieldKind) -> Result<ExtReal> {
    let mut total = ExtReal::Finite(0.0);
    for l in 1..=n {
        let u = t.scale(l)?;
        let term = match kind {
            FieldKind::Real => match log_dist_term(u) {
                ExtReal::NegInf => return Ok(ExtReal::NegInf),
                ExtReal::Finite(v) => v,
            },
            FieldKind::Imaginary => arg_term(u),
        };
        total = total + ExtReal::Finite(term / l as f64);
    }
    Ok(total)
}

/// Split the field into `l <= n/W` and `n/W < l <= n` parts.
pub fn split_field(spec: &FieldSpec, w: u64, t: TorusPoint) -> Result<(ExtReal, ExtReal)> {
    if w < 2 || w > spec.size {
        return Err(invalid(format!("cutoff W = {w} must lie in [2, {}]", spec.size)));
    }
    let cut = spec.size / w;
    let mut low = spec.clone();
    low.truncation = Some(cut.min(spec.truncation.unwrap_or(u64::MAX)));
    let mut high = spec.clone();
    high.lengths.retain(|&(l, _)| l > cut);
    Ok((eval_point(&low, t)?, eval_point(&high, t)?))
}

/// Rotated mesh `{ j/q + theta/q^2 : 0 <= j < q }` with rational `theta`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mesh {
    pub q: u64,
    pub theta_num: i64,
    pub theta_den: u64,
}

impl Mesh {
    pub fn new(q: u64, theta_num: i64, theta_den: u64) -> Result<Self> {
        if q == 0 {
            return Err(invalid("mesh size must be positive"));
        }
        if theta_den == 0 {
            return Err(invalid("mesh rotation denominator must be positive"));
        }
        if theta_num.unsigned_abs() > theta_den {
            return Err(invalid("mesh rotation must satisfy |theta| <= 1"));
        }
        let mesh = Self { q, theta_num, theta_den };
        mesh.denominator()?;
        Ok(mesh)
    }

    /// Mesh with the default rotation `theta = 1/7`.
    pub fn rotated(q: u64) -> Result<Self> {
        Self::new(q, 1, 7)
    }

    /// Common denominator `q^2 * theta_den` of all mesh points.
    pub fn denominator(&self) -> Result<u128> {
        (self.q as u128).checked_mul(self.q as u128).and_then(|x| x.checked_mul(self.theta_den as u128)).ok_or_else(
            || Error::Capacity { param: "mesh size", detail: format!("q^2 * theta_den overflows for q = {}", self.q) },
        )
    }

    /// Numerator of point `j` over [`Mesh::denominator`], reduced mod 1.
    fn numerator(&self, j: u64, den: u128) -> u128 {
        let base = j as i128 * self.q as i128 * self.theta_den as i128 + self.theta_num as i128;
        base.rem_euclid(den as i128) as u128
    }

    pub fn point(&self, j: u64) -> Rational {
        let den = self.denominator().expect("validated mesh");
        Rational::new(self.numerator(j, den) as i128, den).expect("positive denominator")
    }

    pub fn point_f64(&self, j: u64) -> f64 {
        let den = self.denominator().expect("validated mesh");
        self.numerator(j, den) as f64 / den as f64
    }

    /// Index of the mesh point nearest to `t` (ignoring the rotation).
    pub fn nearest_index(&self, t: f64) -> u64 {
        ((t.rem_euclid(1.0) * self.q as f64).round() as u64) % self.q
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanResult {
    pub argmax: u64,
    pub max: ExtReal,
    pub trace: Option<Vec<ExtReal>>,
}

/// Field values at mesh points `[start, end)`, written into `out` as floats
/// (`-inf` for singular points).
fn scan_chunk(spec: &FieldSpec, mesh: &Mesh, den: u128, start: u64, out: &mut [f64]) -> Result<()> {
    let step_base = (mesh.q as u128 * mesh.theta_den as u128) % den;
    let first = mesh.numerator(start, den);
    let inv_den = 1.0 / den as f64;
    out.fill(0.0);
    for (l, c) in spec.active() {
        let cap = |what: &'static str| Error::Capacity {
            param: what,
            detail: format!("cycle length {l} times mesh denominator {den} overflows 128 bits"),
        };
        let lr = l as u128 % den;
        let step = lr.checked_mul(step_base).ok_or_else(|| cap("mesh size"))? % den;
        let r0 = lr.checked_mul(first).ok_or_else(|| cap("mesh size"))? % den;
        let c = c as f64;
        if den < (1u128 << 63) {
            let (den, step) = (den as u64, step as u64);
            let mut r = r0 as u64;
            accumulate(spec.kind, c, inv_den, out, || {
                let cur = r;
                r += step;
                if r >= den {
                    r -= den;
                }
                (cur == 0, cur.min(den - cur) as f64, cur as f64)
            });
        } else {
            let mut r = r0;
            accumulate(spec.kind, c, inv_den, out, || {
                let cur = r;
                r += step;
                if r >= den {
                    r -= den;
                }
                (cur == 0, cur.min(den - cur) as f64, cur as f64)
            });
        }
    }
    Ok(())
}

#[inline]
fn accumulate(kind: FieldKind, c: f64, inv_den: f64, out: &mut [f64], mut next: impl FnMut() -> (bool, f64, f64)) {
    match kind {
        FieldKind::Real => {
            for v in out.iter_mut() {
                let (zero, dist, _) = next();
                if zero {
                    *v = f64::NEG_INFINITY;
                } else {
                    *v += c * log_two_sin(dist * inv_den);
                }
            }
        }
        FieldKind::Imaginary => {
            for v in out.iter_mut() {
                let (_, _, res) = next();
                *v += c * PI * (res * inv_den - 0.5);
            }
        }
    }
}

/// Exact maximizer of the field over a mesh.
///
/// The mesh is split into blocks of [`SCAN_CHUNK`] points evaluated in
/// parallel on the current rayon pool; block maxima are merged by value with
/// ties going to the smaller index, so the result does not depend on the
/// number of threads. When every value is `-inf` the smallest index is
/// returned.
pub fn scan_max(spec: &FieldSpec, mesh: &Mesh, keep_trace: bool) -> Result<ScanResult> {
    let den = mesh.denominator()?;
    let n_chunks = mesh.q.div_ceil(SCAN_CHUNK);
    let chunks: Vec<(u64, f64, Option<Vec<f64>>)> = (0..n_chunks)
        .into_par_iter()
        .map(|ci| {
            let start = ci * SCAN_CHUNK;
            let end = (start + SCAN_CHUNK).min(mesh.q);
            let mut buf = vec![0.0; (end - start) as usize];
            scan_chunk(spec, mesh, den, start, &mut buf)?;
            let (mut best_j, mut best) = (start, f64::NEG_INFINITY);
            for (i, &v) in buf.iter().enumerate() {
                if v > best {
                    best = v;
                    best_j = start + i as u64;
                }
            }
            Ok((best_j, best, keep_trace.then_some(buf)))
        })
        .collect::<Result<_>>()?;

    let (mut argmax, mut max) = (0u64, f64::NEG_INFINITY);
    for &(j, v, _) in &chunks {
        if v > max {
            max = v;
            argmax = j;
        }
    }
    let trace = keep_trace
        .then(|| chunks.into_iter().flat_map(|(_, _, buf)| buf.unwrap_or_default()).map(ExtReal::from_f64).collect());
    Ok(ScanResult { argmax, max: ExtReal::from_f64(max), trace })
}

/// Trace CSV: a `# {json}` line describing the mesh, then `j,t_float,value`.
pub fn trace_csv(mesh: &Mesh, trace: &[ExtReal]) -> String {
    use std::fmt::Write as _;
    let mut out = format!("# {}\nj,t_float,value\n", serde_json::to_string(mesh).expect("mesh serializes"));
    for (j, v) in trace.iter().enumerate() {
        let _ = writeln!(out, "{j},{},{v}", mesh.point_f64(j as u64));
    }
    out
}

/// Pointwise upper bound `log 2 * sum_l c_l` of the real field.
pub fn real_upper_bound(spec: &FieldSpec) -> f64 {
    LN_2 * spec.cycle_count() as f64
}
