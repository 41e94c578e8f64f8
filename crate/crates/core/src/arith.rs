//! Diophantine arithmetic on the torus: Bohr sets, major/minor arcs, the
//! two-point arithmetic distance, Bohr-set counts on rotated meshes, and a
//! search for the small frequency promised by Vinogradov's lemma.

use crate::error::{invalid, Result};
use crate::field::Mesh;
use crate::torus::{scaled_frac, TorusPoint};
use serde::{Deserialize, Serialize};

/// Distance from `x` to the nearest integer.
pub fn torus_norm(x: f64) -> f64 {
    (x - x.round()).abs()
}

/// `||t||`, exact for rational points.
pub fn torus_norm_point(t: TorusPoint) -> f64 {
    match t {
        TorusPoint::Exact(r) => r.norm(),
        TorusPoint::Float(x) => torus_norm(x),
    }
}

/// `||xi t||` for a positive frequency.
fn dilate_norm(t: TorusPoint, xi: u64) -> Result<f64> {
    Ok(match t {
        TorusPoint::Exact(r) => r.scale(xi)?.norm(),
        TorusPoint::Float(x) => torus_norm(scaled_frac(x, xi as f64)),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ArcKind {
    Major,
    Minor,
}

/// Major iff some `1 <= xi <= xi0` has `||xi t|| <= kappa`; the witness is
/// the smallest such `xi`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArcClassification {
    pub kind: ArcKind,
    pub witness: Option<u64>,
}

impl ArcClassification {
    pub fn is_major(&self) -> bool {
        self.kind == ArcKind::Major
    }
}

/// Bohr set `B_xi(kappa) = { t : ||xi t|| <= kappa }`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BohrSpec {
    pub xi: i64,
    pub kappa: f64,
}

fn check_kappa(kappa: f64) -> Result<()> {
    if kappa > 0.0 && kappa < 0.5 {
        Ok(())
    } else {
        Err(invalid(format!("Bohr width must lie in (0, 1/2), got {kappa}")))
    }
}

impl BohrSpec {
    pub fn new(xi: i64, kappa: f64) -> Result<Self> {
        if xi == 0 {
            return Err(invalid("Bohr frequency must be nonzero"));
        }
        check_kappa(kappa)?;
        Ok(Self { xi, kappa })
    }

    pub fn contains(&self, t: TorusPoint) -> Result<bool> {
        Ok(dilate_norm(t, self.xi.unsigned_abs())? <= self.kappa)
    }
}

pub fn classify(t: TorusPoint, xi0: u64, kappa: f64) -> Result<ArcClassification> {
    check_kappa(kappa)?;
    if xi0 == 0 {
        return Err(invalid("frequency cutoff must be at least 1"));
    }
    for xi in 1..=xi0 {
        if dilate_norm(t, xi)? <= kappa {
            return Ok(ArcClassification { kind: ArcKind::Major, witness: Some(xi) });
        }
    }
    Ok(ArcClassification { kind: ArcKind::Minor, witness: None })
}

/// `d(s, t) = min ||xi s + xi' t||` over nonzero `xi, xi'` in `[-xi0, xi0]`.
pub fn arithmetic_distance(s: f64, t: f64, xi0: u64) -> f64 {
    // ||-x|| = ||x||, so xi > 0 suffices.
    let mut best = f64::INFINITY;
    for xi in 1..=xi0 {
        let a = scaled_frac(s, xi as f64);
        for xi2 in 1..=xi0 {
            let b = scaled_frac(t, xi2 as f64);
            best = best.min(torus_norm(a + b)).min(torus_norm(a - b));
        }
    }
    best
}

/// Membership of mesh point `j` in the arc of `B_xi(kappa)` around the
/// integer `a`, decided from the exact integer distance `|xi t_j - a| * D`.
fn in_arc(mesh: &Mesh, den: u128, xi: u64, kappa: f64, j: u64, a: i128) -> bool {
    let num = j as i128 * mesh.q as i128 * mesh.theta_den as i128 + mesh.theta_num as i128;
    let dist = (xi as i128 * num - a * den as i128).unsigned_abs();
    dist as f64 / den as f64 <= kappa
}

/// Exact `|T_{q,theta} ∩ B_xi(kappa)|` in `O(xi)` arithmetic: one index
/// interval per arc around each integer.
pub fn mesh_bohr_count(mesh: &Mesh, spec: &BohrSpec) -> Result<u64> {
    check_kappa(spec.kappa)?;
    let den = mesh.denominator()?;
    let xi = spec.xi.unsigned_abs();
    let q = mesh.q as f64;
    let theta = mesh.theta_num as f64 / mesh.theta_den as f64;
    let xf = xi as f64;
    let last = mesh.q - 1;
    let a_min = (xf * theta / (q * q) - spec.kappa).floor() as i128;
    let a_max = (xf * (last as f64 / q + theta / (q * q)) + spec.kappa).ceil() as i128;
    let mut count = 0u64;
    for a in a_min..=a_max {
        let lo_real = (a as f64 - spec.kappa) * q / xf - theta / q;
        let hi_real = (a as f64 + spec.kappa) * q / xf - theta / q;
        if hi_real < -1.0 || lo_real > last as f64 + 1.0 {
            continue;
        }
        let lo_f = (lo_real.floor() - 1.0).max(0.0) as u64;
        let hi_f = ((hi_real.ceil() + 1.0).max(0.0) as u64).min(last);
        let mut lo = lo_f;
        while lo <= hi_f && !in_arc(mesh, den, xi, spec.kappa, lo, a) {
            lo += 1;
        }
        if lo > hi_f {
            continue;
        }
        let mut hi = hi_f;
        while !in_arc(mesh, den, xi, spec.kappa, hi, a) {
            hi -= 1;
        }
        count += hi - lo + 1;
    }
    Ok(count)
}

/// Implied constant used in place of `<<` in Vinogradov's lemma.
pub const VINOGRADOV_CONSTANT: f64 = 100.0;

/// If at least `delta M` of `M` consecutive dilates `l t` lie within
/// `kappa` of zero, Vinogradov's lemma gives `M <= 2/delta`, or
/// `kappa >= delta/100`, or a frequency `xi <= 2/delta` with
/// `||xi t|| << kappa/(delta M)`. Returns the smallest such `xi` (with the
/// implied constant set to [`VINOGRADOV_CONSTANT`]) when neither degenerate
/// alternative holds.
pub fn vinogradov_detect(t: TorusPoint, m: u64, kappa: f64, delta: f64) -> Result<Option<u64>> {
    if !(kappa > 0.0 && kappa < 1.0 && delta > 0.0 && delta < 1.0) {
        return Err(invalid("kappa and delta must lie in (0, 1)"));
    }
    let m_f = m as f64;
    if m_f <= 2.0 / delta || kappa >= delta / 100.0 {
        return Ok(None);
    }
    let bound = VINOGRADOV_CONSTANT * kappa / (delta * m_f);
    let xi_max = (2.0 / delta).floor() as u64;
    for xi in 1..=xi_max {
        if dilate_norm(t, xi)? <= bound {
            return Ok(Some(xi));
        }
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::torus::GOLDEN;

    fn tp(s: &str) -> TorusPoint {
        s.parse().unwrap()
    }

    #[test]
    fn norm_examples() {
        assert_eq!(torus_norm(0.75), 0.25);
        assert_eq!(torus_norm(0.0), 0.0);
        assert!((torus_norm_point(tp("13/5")) - 0.4).abs() < 1e-16);
        assert_eq!(torus_norm(-0.1), torus_norm(0.1));
    }

    #[test]
    fn classify_examples() {
        let c = classify(tp("1/3"), 3, 0.1).unwrap();
        assert_eq!(c, ArcClassification { kind: ArcKind::Major, witness: Some(3) });
        let c = classify(TorusPoint::Float(GOLDEN), 10, 1e-3).unwrap();
        assert_eq!(c.kind, ArcKind::Minor);
        assert_eq!(c.witness, None);
        let c = classify(TorusPoint::Float(0.5001), 2, 0.001).unwrap();
        assert_eq!(c.witness, Some(2));
        assert!(classify(tp("1/3"), 0, 0.1).is_err());
        assert!(classify(tp("1/3"), 3, 0.5).is_err());
    }

    #[test]
    fn distance_examples() {
        assert!(arithmetic_distance(0.25, 0.5, 2) < 1e-15);
        assert_eq!(arithmetic_distance(0.3, 0.3, 1), 0.0);
    }

    #[test]
    fn bohr_count_example() {
        let mesh = Mesh::new(1000, 0, 1).unwrap();
        let spec = BohrSpec::new(1, 0.1).unwrap();
        assert_eq!(mesh_bohr_count(&mesh, &spec).unwrap(), 201);
    }

    #[test]
    fn bohr_count_exact_hits_only() {
        // theta = 1/7 leaves no exact hits for small xi.
        let mesh = Mesh::rotated(600).unwrap();
        for xi in 1..20 {
            let spec = BohrSpec::new(xi, 1e-18).unwrap();
            assert_eq!(mesh_bohr_count(&mesh, &spec).unwrap(), 0);
        }
        // theta = 0 and xi | q: exactly xi hits.
        let mesh = Mesh::new(600, 0, 1).unwrap();
        for &xi in &[1i64, 2, 3, 5, 12] {
            let spec = BohrSpec::new(xi, 1e-18).unwrap();
            assert_eq!(mesh_bohr_count(&mesh, &spec).unwrap(), xi as u64);
        }
    }

    #[test]
    fn vinogradov_examples() {
        let t = TorusPoint::Float(1.0 / 7.0 + 1e-9);
        assert_eq!(vinogradov_detect(t, 1_000_000, 1e-3, 0.25).unwrap(), Some(7));
        // With delta = 0.4 only xi <= 5 are admissible.
        assert_eq!(vinogradov_detect(t, 1_000_000, 1e-3, 0.4).unwrap(), None);
        // M <= 2/delta.
        assert_eq!(vinogradov_detect(t, 4, 1e-3, 0.9).unwrap(), None);
        // kappa >= delta/100.
        assert_eq!(vinogradov_detect(t, 1_000_000, 0.01, 0.5).unwrap(), None);
        assert!(vinogradov_detect(t, 10, 0.0, 0.5).is_err());
    }

    #[test]
    fn bohr_spec_validation() {
        assert!(BohrSpec::new(0, 0.1).is_err());
        assert!(BohrSpec::new(3, 0.0).is_err());
        assert!(BohrSpec::new(-3, 0.2).unwrap().contains(tp("1/3")).unwrap());
    }
}
