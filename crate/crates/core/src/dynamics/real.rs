use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::circle::{parse_rational, rational_to_f64};
use crate::error::{Error, Result};

/// A real parameter known exactly: a rational or a quadratic surd
/// `(p + q√d) / den`. Fixed-point values to any precision come from
/// integer square roots.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Real {
    Rational(BigRational),
    Surd {
        p: BigInt,
        q: BigInt,
        d: BigInt,
        den: BigInt,
    },
}

impl Real {
    pub fn rational(q: BigRational) -> Self {
        Real::Rational(q)
    }

    /// The golden ratio `(1 + √5) / 2`.
    pub fn golden() -> Self {
        Real::Surd {
            p: 1.into(),
            q: 1.into(),
            d: 5.into(),
            den: 2.into(),
        }
    }

    /// `(p + q√d) / den`, collapsing to a rational when `d` is a square.
    pub fn surd(p: BigInt, q: BigInt, d: BigInt, den: BigInt) -> Result<Self> {
        if den.is_zero() {
            return Err(Error::param("real", "zero denominator"));
        }
        if d.is_negative() {
            return Err(Error::param("real", "square root of a negative number"));
        }
        let (p, q, den) = if den.is_negative() { (-p, -q, -den) } else { (p, q, den) };
        let s = d.sqrt();
        if &s * &s == d || q.is_zero() {
            return Ok(Real::Rational(BigRational::new(p + q * s, den)));
        }
        Ok(Real::Surd { p, q, d, den })
    }

    pub fn is_rational(&self) -> bool {
        matches!(self, Real::Rational(_))
    }

    pub fn as_rational(&self) -> Option<&BigRational> {
        match self {
            Real::Rational(q) => Some(q),
            Real::Surd { .. } => None,
        }
    }

    /// `x · 2^bits`, within one unit of the exact value.
    pub fn scaled(&self, bits: u64) -> BigInt {
        match self {
            Real::Rational(q) => (q.numer() << bits as usize).div_floor(q.denom()),
            Real::Surd { p, q, d, den } => {
                let root = (d << (2 * bits) as usize).sqrt();
                let num = (p << bits as usize) + q * root;
                num.div_floor(den)
            }
        }
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            Real::Rational(q) => rational_to_f64(q),
            Real::Surd { .. } => {
                let v = self.scaled(80);
                v.to_f64().unwrap_or(f64::NAN) / 2f64.powi(80)
            }
        }
    }

    /// `⌊x⌋`. Surds are never integers, so the 128-bit approximation settles it.
    pub fn floor(&self) -> BigInt {
        match self {
            Real::Rational(q) => q.floor().to_integer(),
            Real::Surd { .. } => self.scaled(128) >> 128usize,
        }
    }

    /// Sign of `x − c` for a rational `c`.
    pub fn cmp_rational(&self, c: &BigRational) -> std::cmp::Ordering {
        match self {
            Real::Rational(q) => q.cmp(c),
            Real::Surd { p, q, d, den } => {
                // Compare q√d with t = c·den − p exactly by squaring.
                let t = c * BigRational::from_integer(den.clone()) - BigRational::from_integer(p.clone());
                let lhs_sign = q.signum();
                let sq_l = BigRational::from_integer(q * q * d);
                let sq_t = &t * &t;
                use std::cmp::Ordering::*;
                match (lhs_sign.is_positive(), t.is_positive()) {
                    (true, false) => Greater,
                    (false, true) => Less,
                    (true, true) => sq_l.cmp(&sq_t),
                    (false, false) => sq_t.cmp(&sq_l),
                }
            }
        }
    }
}

impl fmt::Display for Real {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Real::Rational(q) => write!(f, "{q}"),
            Real::Surd { p, q, d, den } => {
                let sign = if q.is_negative() { '-' } else { '+' };
                write!(f, "({p}{sign}{}*sqrt({d}))/{den}", q.abs())
            }
        }
    }
}

impl FromStr for Real {
    type Err = Error;

    /// Accepts rationals and decimals, `golden`, `sqrt(d)` and
    /// `(p+q*sqrt(d))/den` with optional parts.
    fn from_str(text: &str) -> Result<Self> {
        let s: String = text.chars().filter(|c| !c.is_whitespace()).collect();
        let bad = || Error::param("real", format!("cannot parse `{text}`"));
        if s == "golden" {
            return Ok(Real::golden());
        }
        if !s.contains("sqrt") {
            return parse_rational(&s).map(Real::Rational);
        }
        let (inner, den) = if let Some(rest) = s.strip_prefix('(') {
            let close = rest.rfind(')').ok_or_else(bad)?;
            let tail = &rest[close + 1..];
            let den = if tail.is_empty() {
                BigInt::one()
            } else {
                let d = tail.strip_prefix('/').ok_or_else(bad)?;
                BigInt::from_str(d).map_err(|_| bad())?
            };
            // `(p+q*sqrt(d))`: the last `)` closes the outer group.
            (&rest[..close], den)
        } else {
            (s.as_str(), BigInt::one())
        };
        let at = inner.find("sqrt(").ok_or_else(bad)?;
        let radicand = inner[at + 5..].strip_suffix(')').ok_or_else(bad)?;
        let d = BigInt::from_str(radicand).map_err(|_| bad())?;
        let prefix = inner[..at].trim_end_matches('*');
        let int = |t: &str| BigInt::from_str(t.trim_start_matches('+')).map_err(|_| bad());
        let (p, q) = if prefix.is_empty() {
            (BigInt::zero(), BigInt::one())
        } else if let Some(before) = prefix.strip_suffix('+') {
            (
                if before.is_empty() {
                    BigInt::zero()
                } else {
                    int(before)?
                },
                BigInt::one(),
            )
        } else if let Some(before) = prefix.strip_suffix('-') {
            (
                if before.is_empty() {
                    BigInt::zero()
                } else {
                    int(before)?
                },
                -BigInt::one(),
            )
        } else {
            match prefix[1..].rfind(['+', '-']) {
                Some(i) => (int(&prefix[..i + 1])?, int(&prefix[i + 1..])?),
                None => (BigInt::zero(), int(prefix)?),
            }
        };
        Real::surd(p, q, d, den)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn golden_ratio_values() {
        let g = Real::golden();
        assert!((g.to_f64() - 1.618_033_988_749_895).abs() < 1e-15);
        assert_eq!(g.floor(), BigInt::from(1));
        assert_eq!(
            g.cmp_rational(&BigRational::new(8.into(), 5.into())),
            std::cmp::Ordering::Greater
        );
        assert_eq!(
            g.cmp_rational(&BigRational::new(13.into(), 8.into())),
            std::cmp::Ordering::Less
        );
    }

    #[test]
    fn parse_forms() {
        assert_eq!("golden".parse::<Real>().unwrap(), Real::golden());
        assert_eq!("(1+sqrt(5))/2".parse::<Real>().unwrap(), Real::golden());
        assert_eq!("(1 + 1*sqrt(5))/2".parse::<Real>().unwrap(), Real::golden());
        let inv: Real = "(-1+sqrt(5))/2".parse().unwrap();
        assert!((inv.to_f64() - 0.618_033_988_749_895).abs() < 1e-15);
        let r: Real = "sqrt(4)".parse().unwrap();
        assert_eq!(r, Real::Rational(BigRational::from_integer(2.into())));
        assert_eq!("3/2".parse::<Real>().unwrap().to_f64(), 1.5);
        assert!("sqrt(x)".parse::<Real>().is_err());
        let shown = Real::golden().to_string();
        assert_eq!(shown.parse::<Real>().unwrap(), Real::golden());
    }

    #[test]
    fn scaled_is_within_one_unit() {
        let g = Real::golden();
        let v = g.scaled(200);
        // (2v − 2^200)² vs 5·2^400
        let t: BigInt = (&v << 1usize) - (BigInt::one() << 200usize);
        let five = BigInt::from(5) << 400usize;
        assert!(&t * &t <= five);
        let t2 = &t + 2;
        assert!(&t2 * &t2 > five);
    }
}
