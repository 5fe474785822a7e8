//! Tableau coefficients that stay exact while every input is rational.
//!
//! A [`Coef`] is either an exact [`Rational64`] or a binary64 real. Arithmetic
//! between two exact values stays exact (falling back to a real on overflow);
//! anything touching a real value becomes real.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub};
use std::str::FromStr;

use num_rational::Rational64;
use num_traits::{CheckedAdd, CheckedDiv, CheckedMul, CheckedSub, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::FsrkError;

/// Absolute tolerance used when at least one side of a comparison is real.
pub const REAL_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug)]
pub enum Coef {
    Exact(Rational64),
    Real(f64),
}

impl Coef {
    pub const ZERO: Coef = Coef::Exact(Rational64::new_raw(0, 1));
    pub const ONE: Coef = Coef::Exact(Rational64::new_raw(1, 1));

    pub fn int(n: i64) -> Self {
        Coef::Exact(Rational64::from_integer(n))
    }

    pub fn frac(num: i64, den: i64) -> Self {
        Coef::Exact(Rational64::new(num, den))
    }

    pub fn real(x: f64) -> Self {
        Coef::Real(x)
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, Coef::Exact(_))
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            Coef::Exact(r) => r.to_f64().unwrap_or(f64::NAN),
            Coef::Real(x) => *x,
        }
    }

    /// Exact zero test for rationals, `|x| <= REAL_TOL` for reals.
    pub fn is_zero(&self) -> bool {
        match self {
            Coef::Exact(r) => r.is_zero(),
            Coef::Real(x) => x.abs() <= REAL_TOL,
        }
    }

    /// Equality: exact when both sides are rational, otherwise within `tol`.
    pub fn approx_eq(&self, other: &Coef, tol: f64) -> bool {
        match (self, other) {
            (Coef::Exact(a), Coef::Exact(b)) => a == b,
            _ => (self.to_f64() - other.to_f64()).abs() <= tol,
        }
    }

    pub fn abs(&self) -> Coef {
        match self {
            Coef::Exact(r) => Coef::Exact(if *r < Rational64::zero() { -*r } else { *r }),
            Coef::Real(x) => Coef::Real(x.abs()),
        }
    }

    fn exact_or_real(
        self,
        rhs: Coef,
        exact: impl Fn(&Rational64, &Rational64) -> Option<Rational64>,
        real: impl Fn(f64, f64) -> f64,
    ) -> Coef {
        if let (Coef::Exact(a), Coef::Exact(b)) = (self, rhs) {
            if let Some(r) = exact(&a, &b) {
                return Coef::Exact(r);
            }
        }
        Coef::Real(real(self.to_f64(), rhs.to_f64()))
    }
}

impl Default for Coef {
    fn default() -> Self {
        Coef::ZERO
    }
}

impl From<i64> for Coef {
    fn from(n: i64) -> Self {
        Coef::int(n)
    }
}

impl From<Rational64> for Coef {
    fn from(r: Rational64) -> Self {
        Coef::Exact(r)
    }
}

impl From<f64> for Coef {
    fn from(x: f64) -> Self {
        Coef::Real(x)
    }
}

impl PartialEq for Coef {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Coef::Exact(a), Coef::Exact(b)) => a == b,
            _ => self.to_f64() == other.to_f64(),
        }
    }
}

impl PartialOrd for Coef {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        match (self, other) {
            (Coef::Exact(a), Coef::Exact(b)) => a.partial_cmp(b),
            _ => self.to_f64().partial_cmp(&other.to_f64()),
        }
    }
}

impl Add for Coef {
    type Output = Coef;
    fn add(self, rhs: Coef) -> Coef {
        self.exact_or_real(rhs, |a, b| a.checked_add(b), |a, b| a + b)
    }
}

impl AddAssign for Coef {
    fn add_assign(&mut self, rhs: Coef) {
        *self = *self + rhs;
    }
}

impl Sub for Coef {
    type Output = Coef;
    fn sub(self, rhs: Coef) -> Coef {
        self.exact_or_real(rhs, |a, b| a.checked_sub(b), |a, b| a - b)
    }
}

impl Mul for Coef {
    type Output = Coef;
    fn mul(self, rhs: Coef) -> Coef {
        self.exact_or_real(rhs, |a, b| a.checked_mul(b), |a, b| a * b)
    }
}

impl Div for Coef {
    type Output = Coef;
    fn div(self, rhs: Coef) -> Coef {
        self.exact_or_real(rhs, |a, b| a.checked_div(b), |a, b| a / b)
    }
}

impl Neg for Coef {
    type Output = Coef;
    fn neg(self) -> Coef {
        match self {
            Coef::Exact(r) => Coef::Exact(-r),
            Coef::Real(x) => Coef::Real(-x),
        }
    }
}

impl std::iter::Sum for Coef {
    fn sum<I: Iterator<Item = Coef>>(iter: I) -> Coef {
        iter.fold(Coef::ZERO, |acc, x| acc + x)
    }
}

/// Rationals print as `p/q` (or `p` when integral). Reals print in the
/// shortest round-trip form and always carry a `.` or exponent so that
/// parsing gives back a real.
impl fmt::Display for Coef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Coef::Exact(r) if r.is_integer() => format!("{}", r.numer()),
            Coef::Exact(r) => format!("{}/{}", r.numer(), r.denom()),
            Coef::Real(x) => format!("{x:?}"),
        };
        f.pad(&s)
    }
}

impl FromStr for Coef {
    type Err = FsrkError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim();
        let bad = || FsrkError::Parse(format!("invalid coefficient `{s}`"));
        if let Some((p, q)) = t.split_once('/') {
            let p: i64 = p.trim().parse().map_err(|_| bad())?;
            let q: i64 = q.trim().parse().map_err(|_| bad())?;
            if q == 0 {
                return Err(bad());
            }
            return Ok(Coef::frac(p, q));
        }
        if let Ok(n) = t.parse::<i64>() {
            return Ok(Coef::int(n));
        }
        t.parse::<f64>().map(Coef::Real).map_err(|_| bad())
    }
}

impl Serialize for Coef {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Coef {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Str(String),
            Int(i64),
            Float(f64),
        }
        match Raw::deserialize(deserializer)? {
            Raw::Str(s) => s.parse().map_err(serde::de::Error::custom),
            Raw::Int(n) => Ok(Coef::int(n)),
            Raw::Float(x) => Ok(Coef::Real(x)),
        }
    }
}

/// Dense row-major matrix of coefficients.
pub type CoefMatrix = Vec<Vec<Coef>>;

pub fn zeros(rows: usize, cols: usize) -> CoefMatrix {
    vec![vec![Coef::ZERO; cols]; rows]
}

pub fn to_f64_matrix(m: &[Vec<Coef>]) -> Vec<Vec<f64>> {
    m.iter()
        .map(|r| r.iter().map(Coef::to_f64).collect())
        .collect()
}
