//! Exact rational quantities with an explicit undefined state.
//!
//! Every probability in this crate is a ratio of record counts. A ratio whose
//! denominator count is zero is `Undefined`, and any arithmetic touching an
//! undefined operand stays undefined. The one exception is
//! [`Quantity::weighted`]: a conditional probability multiplied by the exact
//! zero probability of its own conditioning event is zero.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use num_bigint::{BigInt, Sign};
use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::EdcrError;

pub type BigRational = num_rational::BigRational;

/// Exact rational number rendered canonically as `num/den`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Rational(pub BigRational);

impl Rational {
    pub fn new(numer: i64, denom: i64) -> Self {
        Rational(BigRational::new(BigInt::from(numer), BigInt::from(denom)))
    }

    pub fn from_counts(numer: u64, denom: u64) -> Self {
        Rational(BigRational::new(BigInt::from(numer), BigInt::from(denom)))
    }

    pub fn zero() -> Self {
        Rational(BigRational::zero())
    }

    pub fn one() -> Self {
        Rational(BigRational::one())
    }

    pub fn integer(n: i64) -> Self {
        Rational::new(n, 1)
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn numer(&self) -> &BigInt {
        self.0.numer()
    }

    pub fn denom(&self) -> &BigInt {
        self.0.denom()
    }

    pub fn abs(&self) -> Rational {
        Rational(self.0.abs())
    }

    /// True when the value lies in the closed unit interval.
    pub fn is_probability(&self) -> bool {
        !self.0.is_negative() && self.0 <= BigRational::one()
    }

    /// Decimal rendering with twelve significant digits, for display only.
    pub fn to_decimal(&self) -> String {
        render_decimal(&self.0, 12)
    }

    pub fn to_f64(&self) -> f64 {
        use num_traits::ToPrimitive;
        self.0.to_f64().unwrap_or(f64::NAN)
    }
}

impl fmt::Display for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.0.numer(), self.0.denom())
    }
}

impl FromStr for Rational {
    type Err = EdcrError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || EdcrError::Parse(format!("invalid rational {s:?}: expected \"num/den\""));
        let t = s.trim();
        let (n, d) = match t.split_once('/') {
            Some((n, d)) => (n.trim(), d.trim()),
            None => (t, "1"),
        };
        let numer: BigInt = n.parse().map_err(|_| bad())?;
        let denom: BigInt = d.parse().map_err(|_| bad())?;
        if denom.is_zero() {
            return Err(EdcrError::Parse(format!("invalid rational {s:?}: zero denominator")));
        }
        Ok(Rational(BigRational::new(numer, denom)))
    }
}

impl Serialize for Rational {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Rational {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

impl std::ops::Add for &Rational {
    type Output = Rational;
    fn add(self, rhs: &Rational) -> Rational {
        Rational(&self.0 + &rhs.0)
    }
}

impl std::ops::Sub for &Rational {
    type Output = Rational;
    fn sub(self, rhs: &Rational) -> Rational {
        Rational(&self.0 - &rhs.0)
    }
}

impl std::ops::Mul for &Rational {
    type Output = Rational;
    fn mul(self, rhs: &Rational) -> Rational {
        Rational(&self.0 * &rhs.0)
    }
}

/// An exact rational or the distinguished value `UNDEFINED`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Quantity {
    Defined(Rational),
    Undefined,
}

impl Quantity {
    pub fn ratio(numer: u64, denom: u64) -> Self {
        if denom == 0 {
            Quantity::Undefined
        } else {
            Quantity::Defined(Rational::from_counts(numer, denom))
        }
    }

    pub fn value(&self) -> Option<&Rational> {
        match self {
            Quantity::Defined(r) => Some(r),
            Quantity::Undefined => None,
        }
    }

    pub fn is_defined(&self) -> bool {
        matches!(self, Quantity::Defined(_))
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Quantity::Defined(r) if r.is_zero())
    }

    fn zip(&self, other: &Quantity, f: impl FnOnce(&Rational, &Rational) -> Quantity) -> Quantity {
        match (self, other) {
            (Quantity::Defined(a), Quantity::Defined(b)) => f(a, b),
            _ => Quantity::Undefined,
        }
    }

    pub fn add(&self, other: &Quantity) -> Quantity {
        self.zip(other, |a, b| Quantity::Defined(a + b))
    }

    pub fn sub(&self, other: &Quantity) -> Quantity {
        self.zip(other, |a, b| Quantity::Defined(a - b))
    }

    pub fn mul(&self, other: &Quantity) -> Quantity {
        self.zip(other, |a, b| Quantity::Defined(a * b))
    }

    pub fn div(&self, other: &Quantity) -> Quantity {
        self.zip(other, |a, b| {
            if b.is_zero() {
                Quantity::Undefined
            } else {
                Quantity::Defined(Rational(&a.0 / &b.0))
            }
        })
    }

    /// `weight × value`, where a defined zero weight annihilates an undefined
    /// value. Used for products `P(A | B) · P(B | C) = P(A, B | C)` whose
    /// conditional factor is undefined exactly when the weight is zero.
    pub fn weighted(weight: &Quantity, value: &Quantity) -> Quantity {
        if weight.is_zero() {
            Quantity::Defined(Rational::zero())
        } else {
            weight.mul(value)
        }
    }

    pub fn one_minus(&self) -> Quantity {
        Quantity::Defined(Rational::one()).sub(self)
    }

    pub fn abs_diff(&self, other: &Quantity) -> Quantity {
        self.zip(other, |a, b| Quantity::Defined((a - b).abs()))
    }

    /// Exact comparison; `None` when either side is undefined.
    pub fn compare(&self, other: &Quantity) -> Option<Ordering> {
        match (self, other) {
            (Quantity::Defined(a), Quantity::Defined(b)) => Some(a.cmp(b)),
            _ => None,
        }
    }

    pub fn to_decimal(&self) -> String {
        match self {
            Quantity::Defined(r) => r.to_decimal(),
            Quantity::Undefined => "UNDEFINED".to_string(),
        }
    }
}

impl From<Rational> for Quantity {
    fn from(r: Rational) -> Self {
        Quantity::Defined(r)
    }
}

impl fmt::Display for Quantity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Quantity::Defined(r) => r.fmt(f),
            Quantity::Undefined => f.write_str("UNDEFINED"),
        }
    }
}

impl FromStr for Quantity {
    type Err = EdcrError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.trim() == "UNDEFINED" {
            Ok(Quantity::Undefined)
        } else {
            s.parse().map(Quantity::Defined)
        }
    }
}

impl Serialize for Quantity {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Quantity {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

fn render_decimal(value: &BigRational, digits: u32) -> String {
    if value.is_zero() {
        return "0".to_string();
    }
    let negative = value.is_negative();
    let v = value.abs();
    let ten = BigInt::from(10);

    // Decimal exponent e with 10^e <= v < 10^(e+1).
    let mut exp: i64 = (v.numer().bits() as i64 - v.denom().bits() as i64) * 30103 / 100000;
    let pow = |e: i64| -> BigRational {
        if e >= 0 {
            BigRational::from_integer(num_traits::pow(ten.clone(), e as usize))
        } else {
            BigRational::new(BigInt::one(), num_traits::pow(ten.clone(), (-e) as usize))
        }
    };
    while pow(exp) > v {
        exp -= 1;
    }
    while pow(exp + 1) <= v {
        exp += 1;
    }

    let shift = digits as i64 - 1 - exp;
    let scaled = &v * pow(shift);
    // Round half away from zero.
    let (q, r) = scaled.numer().div_rem(scaled.denom());
    let mut mantissa = if &r * BigInt::from(2) >= *scaled.denom() { q + 1 } else { q };
    let mut shift = shift;
    if mantissa == num_traits::pow(ten.clone(), digits as usize) {
        mantissa /= &ten;
        shift -= 1;
    }

    let raw = mantissa.to_string();
    let body = if shift <= 0 {
        let mut s = raw;
        s.extend(std::iter::repeat('0').take((-shift) as usize));
        s
    } else {
        let shift = shift as usize;
        if raw.len() > shift {
            let (int, frac) = raw.split_at(raw.len() - shift);
            format!("{int}.{frac}")
        } else {
            format!("0.{}{}", "0".repeat(shift - raw.len()), raw)
        }
    };
    debug_assert!(mantissa.sign() != Sign::Minus);
    if negative {
        format!("-{body}")
    } else {
        body
    }
}
