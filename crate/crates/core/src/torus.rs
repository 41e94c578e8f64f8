//! Points of the torus `R/Z`, either exact rationals or floats.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

fn gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        let r = a % b;
        a = b;
        b = r;
    }
    a
}

/// A rational point `num/den` of the torus, reduced to `0 <= num < den` and
/// lowest terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Rational {
    num: u128,
    den: u128,
}

impl Rational {
    pub fn new(num: i128, den: u128) -> Result<Self> {
        if den == 0 {
            return Err(Error::InvalidArgument("zero denominator".into()));
        }
        let residue = if den > i128::MAX as u128 {
            if num >= 0 {
                num as u128 % den
            } else {
                den - (num.unsigned_abs() % den)
            }
        } else {
            num.rem_euclid(den as i128) as u128
        };
        let residue = if residue == den { 0 } else { residue };
        let g = gcd(residue, den);
        Ok(Self { num: residue / g, den: den / g })
    }

    pub fn zero() -> Self {
        Self { num: 0, den: 1 }
    }

    pub fn num(&self) -> u128 {
        self.num
    }

    pub fn den(&self) -> u128 {
        self.den
    }

    pub fn is_zero(&self) -> bool {
        self.num == 0
    }

    pub fn to_f64(&self) -> f64 {
        self.num as f64 / self.den as f64
    }

    /// Residue of `scale * num` modulo `den`, i.e. the numerator of
    /// `scale * self` on the torus.
    pub fn scaled_residue(&self, scale: u64) -> Result<u128> {
        let reduced = scale as u128 % self.den;
        reduced.checked_mul(self.num).map(|p| p % self.den).ok_or_else(|| Error::Capacity {
            param: "denominator",
            detail: format!("{scale} * {}/{} exceeds 128 bits", self.num, self.den),
        })
    }

    pub fn scale(&self, scale: u64) -> Result<Self> {
        let r = self.scaled_residue(scale)?;
        Rational::new(r as i128, self.den)
    }

    /// `||self||` as a float.
    pub fn norm(&self) -> f64 {
        let d = self.num.min(self.den - self.num);
        d as f64 / self.den as f64
    }
}

impl fmt::Display for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

/// A torus point: exact rational or floating point in `[0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TorusPoint {
    Exact(Rational),
    Float(f64),
}

/// Reduce a float into `[0, 1)`.
pub fn frac(x: f64) -> f64 {
    let f = x - x.floor();
    if f >= 1.0 {
        0.0
    } else {
        f
    }
}

impl TorusPoint {
    pub fn float(x: f64) -> Self {
        TorusPoint::Float(frac(x))
    }

    pub fn rational(num: i128, den: u128) -> Result<Self> {
        Rational::new(num, den).map(TorusPoint::Exact)
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            TorusPoint::Exact(r) => r.to_f64(),
            TorusPoint::Float(x) => *x,
        }
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, TorusPoint::Exact(_))
    }

    /// `scale * self` reduced to the torus; exact for rationals.
    pub fn scale(&self, scale: u64) -> Result<Self> {
        match self {
            TorusPoint::Exact(r) => r.scale(scale).map(TorusPoint::Exact),
            TorusPoint::Float(x) => Ok(TorusPoint::Float(scaled_frac(*x, scale as f64))),
        }
    }
}

/// `frac(scale * x)` with the rounding error of the product compensated.
pub fn scaled_frac(x: f64, scale: f64) -> f64 {
    let hi = scale * x;
    let lo = scale.mul_add(x, -hi);
    frac(frac(hi) + lo)
}

impl FromStr for TorusPoint {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Some((n, d)) = s.split_once('/') {
            let num: i128 = n.trim().parse().map_err(|_| Error::Parse(format!("bad numerator in {s:?}")))?;
            let den: u128 = d.trim().parse().map_err(|_| Error::Parse(format!("bad denominator in {s:?}")))?;
            TorusPoint::rational(num, den)
        } else {
            let x: f64 = s.parse().map_err(|_| Error::Parse(format!("bad torus point {s:?}")))?;
            if !x.is_finite() {
                return Err(Error::Parse(format!("non-finite torus point {s:?}")));
            }
            Ok(TorusPoint::float(x))
        }
    }
}

impl fmt::Display for TorusPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TorusPoint::Exact(r) => write!(f, "{r}"),
            TorusPoint::Float(x) => write!(f, "{x}"),
        }
    }
}

impl Serialize for TorusPoint {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for TorusPoint {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Text(String),
            Number(f64),
        }
        match Raw::deserialize(d)? {
            Raw::Text(s) => s.parse().map_err(serde::de::Error::custom),
            Raw::Number(x) => Ok(TorusPoint::float(x)),
        }
    }
}

/// Fractional part of the golden ratio, `(sqrt 5 - 1)/2`.
pub const GOLDEN: f64 = 0.618_033_988_749_894_8;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rational_reduction() {
        let r = Rational::new(13, 5).unwrap();
        assert_eq!((r.num(), r.den()), (3, 5));
        let r = Rational::new(-1, 3).unwrap();
        assert_eq!((r.num(), r.den()), (2, 3));
        let r = Rational::new(6, 4).unwrap();
        assert_eq!((r.num(), r.den()), (1, 2));
        assert!(Rational::new(1, 0).is_err());
        assert!(Rational::new(5, 5).unwrap().is_zero());
    }

    #[test]
    fn parse_points() {
        assert_eq!("1/3".parse::<TorusPoint>().unwrap(), TorusPoint::rational(1, 3).unwrap());
        assert_eq!("0.25".parse::<TorusPoint>().unwrap(), TorusPoint::Float(0.25));
        assert_eq!("1.75".parse::<TorusPoint>().unwrap(), TorusPoint::Float(0.75));
        assert!("x".parse::<TorusPoint>().is_err());
        assert!("1/0".parse::<TorusPoint>().is_err());
    }

    #[test]
    fn scaled_residue_overflow_is_capacity_error() {
        let r = Rational::new(1, u128::MAX - 2).unwrap();
        let r2 = Rational::new((u128::MAX / 2) as i128, u128::MAX - 2).unwrap();
        assert!(r.scaled_residue(3).is_ok());
        assert!(matches!(r2.scaled_residue(u64::MAX), Err(Error::Capacity { .. })));
    }
}
