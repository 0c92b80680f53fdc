//! Exact costs and discount factors.
//!
//! Every cost that flows through the checker is an exact rational or the
//! symbolic value [`Cost::Infinite`]. Nothing here touches floating point.

use std::cmp::Ordering;
use std::fmt;
use std::iter::Sum;
use std::ops::{Add, Mul};
use std::str::FromStr;

use num_traits::{One, Signed, Zero};
use thiserror::Error;

/// Exact rational used for all finite costs.
pub type Rational = num_rational::Ratio<i128>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NumberError {
    #[error("malformed rational `{0}`")]
    Malformed(String),
    #[error("zero denominator in `{0}`")]
    ZeroDenominator(String),
    #[error("negative value `{0}` where a nonnegative one is required")]
    Negative(String),
    #[error("discount factor `{0}` is outside (0, 1]")]
    AlphaOutOfRange(String),
}

/// Parses `p/q` or an integer into an exact rational.
pub fn parse_rational(text: &str) -> Result<Rational, NumberError> {
    let text = text.trim();
    let bad = || NumberError::Malformed(text.to_string());
    let (num, den) = match text.split_once('/') {
        Some((n, d)) => (n.trim(), d.trim()),
        None => (text, "1"),
    };
    if num.is_empty() || den.is_empty() {
        return Err(bad());
    }
    let num: i128 = num.parse().map_err(|_| bad())?;
    let den: i128 = den.parse().map_err(|_| bad())?;
    if den == 0 {
        return Err(NumberError::ZeroDenominator(text.to_string()));
    }
    Ok(Rational::new(num, den))
}

/// Prints a rational as `p/q`, or `p` when the denominator is one.
pub fn format_rational(r: &Rational) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// A nonnegative exact cost, possibly infinite.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Cost {
    Finite(Rational),
    Infinite,
}

impl Cost {
    pub fn zero() -> Self {
        Cost::Finite(Rational::zero())
    }

    pub fn from_integer(n: i128) -> Self {
        Cost::Finite(Rational::from_integer(n))
    }

    pub fn new(num: i128, den: i128) -> Self {
        Cost::Finite(Rational::new(num, den))
    }

    pub fn is_finite(&self) -> bool {
        matches!(self, Cost::Finite(_))
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Cost::Finite(r) if r.is_zero())
    }

    pub fn finite(&self) -> Option<&Rational> {
        match self {
            Cost::Finite(r) => Some(r),
            Cost::Infinite => None,
        }
    }

    /// Scales by a finite nonnegative factor. `0 * inf` stays infinite:
    /// discount factors are never zero, so that case does not arise.
    pub fn scale(&self, factor: &Rational) -> Cost {
        match self {
            Cost::Finite(r) => Cost::Finite(r * factor),
            Cost::Infinite => Cost::Infinite,
        }
    }

    pub fn min(self, other: Cost) -> Cost {
        if other < self {
            other
        } else {
            self
        }
    }
}

impl From<Rational> for Cost {
    fn from(r: Rational) -> Self {
        Cost::Finite(r)
    }
}

impl Ord for Cost {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (Cost::Finite(a), Cost::Finite(b)) => a.cmp(b),
            (Cost::Finite(_), Cost::Infinite) => Ordering::Less,
            (Cost::Infinite, Cost::Finite(_)) => Ordering::Greater,
            (Cost::Infinite, Cost::Infinite) => Ordering::Equal,
        }
    }
}

impl PartialOrd for Cost {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Add for Cost {
    type Output = Cost;
    fn add(self, rhs: Cost) -> Cost {
        match (self, rhs) {
            (Cost::Finite(a), Cost::Finite(b)) => Cost::Finite(a + b),
            _ => Cost::Infinite,
        }
    }
}

impl<'a> Add<&'a Cost> for &'a Cost {
    type Output = Cost;
    fn add(self, rhs: &'a Cost) -> Cost {
        self.clone() + rhs.clone()
    }
}

impl Mul<&Rational> for &Cost {
    type Output = Cost;
    fn mul(self, rhs: &Rational) -> Cost {
        self.scale(rhs)
    }
}

impl Sum for Cost {
    fn sum<I: Iterator<Item = Cost>>(iter: I) -> Cost {
        iter.fold(Cost::zero(), Add::add)
    }
}

impl fmt::Display for Cost {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cost::Finite(r) => f.write_str(&format_rational(r)),
            Cost::Infinite => f.write_str("inf"),
        }
    }
}

impl FromStr for Cost {
    type Err = NumberError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if matches!(s, "inf" | "infinity" | "∞") {
            return Ok(Cost::Infinite);
        }
        let r = parse_rational(s)?;
        if r.is_negative() {
            return Err(NumberError::Negative(s.to_string()));
        }
        Ok(Cost::Finite(r))
    }
}

/// Discount factor in `(0, 1]`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Alpha(Rational);

impl Alpha {
    pub fn new(value: Rational) -> Result<Self, NumberError> {
        if value <= Rational::zero() || value > Rational::one() {
            return Err(NumberError::AlphaOutOfRange(format_rational(&value)));
        }
        Ok(Alpha(value))
    }

    pub fn one() -> Self {
        Alpha(Rational::one())
    }

    pub fn half() -> Self {
        Alpha(Rational::new(1, 2))
    }

    pub fn value(&self) -> &Rational {
        &self.0
    }

    /// `alpha^exp`.
    pub fn pow(&self, exp: usize) -> Rational {
        let mut acc = Rational::one();
        for _ in 0..exp {
            acc *= self.0;
        }
        acc
    }

    /// Weight of a change made at `level` (levels start at one).
    pub fn level_weight(&self, level: usize) -> Rational {
        self.pow(level.saturating_sub(1))
    }
}

impl fmt::Display for Alpha {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&format_rational(&self.0))
    }
}

impl FromStr for Alpha {
    type Err = NumberError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Alpha::new(parse_rational(s)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn infinity_absorbs_and_dominates() {
        let two = Cost::from_integer(2);
        assert_eq!(two.clone() + Cost::Infinite, Cost::Infinite);
        assert!(Cost::Infinite > Cost::from_integer(1_000_000));
        assert!(Cost::zero() < two);
    }

    #[test]
    fn parses_and_prints_exactly() {
        let c: Cost = "6/4".parse().unwrap();
        assert_eq!(c, Cost::new(3, 2));
        assert_eq!(c.to_string(), "3/2");
        assert_eq!("inf".parse::<Cost>().unwrap(), Cost::Infinite);
        assert!("-1".parse::<Cost>().is_err());
        assert!("1/0".parse::<Cost>().is_err());
        assert!("x".parse::<Cost>().is_err());
    }

    #[test]
    fn alpha_range() {
        assert!("0".parse::<Alpha>().is_err());
        assert!("3/2".parse::<Alpha>().is_err());
        let a: Alpha = "1/2".parse().unwrap();
        assert_eq!(a.level_weight(1), Rational::one());
        assert_eq!(a.level_weight(3), Rational::new(1, 4));
    }
}
