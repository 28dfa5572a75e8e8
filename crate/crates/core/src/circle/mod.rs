//! Exact arithmetic on the circle ℝ/ℤ: points, the circle metric, finite
//! unions of half-open arcs and the radius sequences that size targets.

mod interval_set;
mod radius;

pub use interval_set::{Arc, IntervalSet};
pub use radius::{DeltaRule, HRule, RadiusSequence, RadiusValue};

use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// A point of the circle, an exact rational in `[0, 1)` kept in lowest terms.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CirclePoint(BigRational);

impl CirclePoint {
    /// Reduces any rational modulo 1.
    pub fn new(value: BigRational) -> Self {
        CirclePoint(frac(&value))
    }

    pub fn from_ratio(num: i64, den: i64) -> Self {
        Self::new(BigRational::new(num.into(), den.into()))
    }

    pub fn zero() -> Self {
        CirclePoint(BigRational::zero())
    }

    pub fn value(&self) -> &BigRational {
        &self.0
    }

    pub fn into_inner(self) -> BigRational {
        self.0
    }

    /// Adds `offset` modulo 1.
    pub fn rotate(&self, offset: &BigRational) -> Self {
        Self::new(&self.0 + offset)
    }

    pub fn to_f64(&self) -> f64 {
        rational_to_f64(&self.0)
    }
}

impl fmt::Display for CirclePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Circle distance `min(|x − y|, 1 − |x − y|)`.
pub fn circle_dist(x: &CirclePoint, y: &CirclePoint) -> BigRational {
    let d = (&x.0 - &y.0).abs();
    let other = BigRational::one() - &d;
    if other < d {
        other
    } else {
        d
    }
}

/// Fractional part in `[0, 1)`.
pub fn frac(x: &BigRational) -> BigRational {
    x - x.floor()
}

/// Nearest-integer distance `‖x‖` of a rational.
pub fn dist_to_integer(x: &BigRational) -> BigRational {
    let f = frac(x);
    let other = BigRational::one() - &f;
    if other < f {
        other
    } else {
        f
    }
}

/// Converts a rational to `f64` without overflowing on huge numerators and
/// denominators.
pub fn rational_to_f64(x: &BigRational) -> f64 {
    if let (Some(n), Some(d)) = (x.numer().to_f64(), x.denom().to_f64()) {
        if n.is_finite() && d.is_finite() && d != 0.0 {
            return n / d;
        }
    }
    let nb = x.numer().bits() as i64;
    let db = x.denom().bits() as i64;
    let shift = nb - db - 60;
    let scaled: BigInt = if shift >= 0 {
        x.numer() / (x.denom() << (shift as usize))
    } else {
        (x.numer() << ((-shift) as usize)) / x.denom()
    };
    scaled.to_f64().unwrap_or(f64::NAN) * (2f64).powi(shift as i32)
}

/// Exact rational value of a finite `f64`.
pub fn f64_to_rational(x: f64) -> Result<BigRational> {
    BigRational::from_float(x).ok_or_else(|| Error::param("value", format!("{x} is not finite")))
}

/// Parses `p/q`, an integer, or a decimal such as `0.4` (read exactly as 2/5).
pub fn parse_rational(text: &str) -> Result<BigRational> {
    let t = text.trim();
    let bad = || Error::param("rational", format!("cannot parse `{t}`"));
    if let Some((n, d)) = t.split_once('/') {
        let n = BigInt::from_str(n.trim()).map_err(|_| bad())?;
        let d = BigInt::from_str(d.trim()).map_err(|_| bad())?;
        if d.is_zero() {
            return Err(Error::param("rational", format!("zero denominator in `{t}`")));
        }
        return Ok(BigRational::new(n, d));
    }
    if let Some((int, fracpart)) = t.split_once('.') {
        let neg = int.trim_start().starts_with('-');
        let int_abs = int.trim().trim_start_matches(['-', '+']);
        let int_val = if int_abs.is_empty() {
            BigInt::zero()
        } else {
            BigInt::from_str(int_abs).map_err(|_| bad())?
        };
        if fracpart.is_empty() || !fracpart.chars().all(|c| c.is_ascii_digit()) {
            return Err(bad());
        }
        let scale = num_traits::pow(BigInt::from(10), fracpart.len());
        let f = BigInt::from_str(fracpart).map_err(|_| bad())?;
        let v = BigRational::new(int_val * &scale + f, scale);
        return Ok(if neg { -v } else { v });
    }
    let n = BigInt::from_str(t).map_err(|_| bad())?;
    Ok(BigRational::from_integer(n))
}

/// `lcm` of two positive integers.
pub(crate) fn lcm(a: &BigInt, b: &BigInt) -> BigInt {
    a.lcm(b)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    #[test]
    fn dist_examples() {
        let z = CirclePoint::zero();
        assert_eq!(circle_dist(&z, &z), q(0, 1));
        let a = CirclePoint::from_ratio(1, 10);
        let b = CirclePoint::from_ratio(9, 10);
        assert_eq!(circle_dist(&a, &b), q(1, 5));
        let c = CirclePoint::from_ratio(1, 3);
        let d = CirclePoint::from_ratio(2, 3);
        assert_eq!(circle_dist(&c, &d), q(1, 3));
    }

    #[test]
    fn point_reduced_mod_one() {
        assert_eq!(CirclePoint::from_ratio(7, 3).value(), &q(1, 3));
        assert_eq!(CirclePoint::from_ratio(-1, 4).value(), &q(3, 4));
        assert_eq!(CirclePoint::from_ratio(2, 4).value(), &q(1, 2));
    }

    #[test]
    fn parses_rationals() {
        assert_eq!(parse_rational("1/2").unwrap(), q(1, 2));
        assert_eq!(parse_rational("0.4").unwrap(), q(2, 5));
        assert_eq!(parse_rational("-1.25").unwrap(), q(-5, 4));
        assert_eq!(parse_rational("3").unwrap(), q(3, 1));
        assert!(parse_rational("1/0").is_err());
        assert!(parse_rational("abc").is_err());
    }

    #[test]
    fn huge_rational_to_f64() {
        let big = BigInt::from(3) << 2000usize;
        let x = BigRational::new(big.clone(), big * 4);
        assert_eq!(rational_to_f64(&x), 0.25);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn metric_axioms(a in 0i64..1000, b in 0i64..1000, c in 0i64..1000, d in 1i64..1000) {
                let x = CirclePoint::from_ratio(a, d);
                let y = CirclePoint::from_ratio(b, d);
                let z = CirclePoint::from_ratio(c, d + 1);
                let dxy = circle_dist(&x, &y);
                prop_assert!(dxy <= q(1, 2));
                prop_assert_eq!(dxy.is_zero(), x == y);
                prop_assert_eq!(&dxy, &circle_dist(&y, &x));
                prop_assert!(dxy <= circle_dist(&x, &z) + circle_dist(&z, &y));
            }
        }
    }
}
