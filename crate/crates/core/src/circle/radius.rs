use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use super::{f64_to_rational, parse_rational, rational_to_f64};
use crate::error::{Error, Result};

/// A radius `r_n`: exact when the sequence admits it, otherwise an `f64`
/// with a guaranteed enclosure.
#[derive(Clone, Debug, PartialEq)]
pub struct RadiusValue {
    pub exact: Option<BigRational>,
    pub approx: f64,
}

impl RadiusValue {
    fn exact(q: BigRational) -> Self {
        let approx = rational_to_f64(&q);
        RadiusValue { exact: Some(q), approx }
    }

    fn approx(x: f64) -> Self {
        RadiusValue {
            exact: None,
            approx: x.max(0.0),
        }
    }

    pub fn is_exact(&self) -> bool {
        self.exact.is_some()
    }

    /// The exact value, or the exact dyadic rational equal to the `f64`.
    pub fn to_rational(&self) -> BigRational {
        match &self.exact {
            Some(q) => q.clone(),
            None => f64_to_rational(self.approx).unwrap_or_else(|_| BigRational::zero()),
        }
    }

    /// An interval that contains the true value. A handful of libm calls
    /// each contribute at most a few ulp, so a relative `1e-13` covers them.
    pub fn enclosure(&self) -> (f64, f64) {
        if self.exact.is_some() {
            return (self.approx, self.approx);
        }
        let slack = self.approx.abs() * 1e-13;
        ((self.approx - slack).max(0.0), self.approx + slack)
    }
}

/// Rule for `Δ_m` in an eventually-always radius `r_m = Δ_m h(Δ_m)/m`.
#[derive(Clone, Debug, PartialEq)]
pub enum DeltaRule {
    /// `Δ_m = factor · log₂ m`.
    Log2(BigRational),
    /// `Δ_m = factor · ln m`.
    Ln(BigRational),
    Constant(BigRational),
}

/// Slowly growing factor `h`. Logarithms are clamped below at 1.
#[derive(Clone, Debug, PartialEq)]
pub enum HRule {
    Constant(BigRational),
    /// `h(x) = max(ln x, 1)`.
    Log,
    /// `h(x) = max(ln ln x, 1)`.
    LogLog,
}

/// Radius families indexed by `n ≥ 1`.
#[derive(Clone, Debug, PartialEq)]
pub enum RadiusSequence {
    /// `r_n = κ n^{−γ}`.
    PowerLaw { kappa: BigRational, gamma: BigRational },
    /// `r_n = κ / (n (ln n)^θ)`, with `(ln n)^θ` read as 1 when `ln n ≤ 1`.
    PowerLog { kappa: BigRational, theta: BigRational },
    /// `r_m = Δ_m h(Δ_m) / m`.
    Ear { delta: DeltaRule, h: HRule },
    /// `r_n` is the `n`-th entry (1-based).
    ExplicitTable(Vec<BigRational>),
}

fn positive(field: &str, q: &BigRational) -> Result<()> {
    if q.is_positive() {
        Ok(())
    } else {
        Err(Error::param(field, format!("must be positive, got {q}")))
    }
}

fn non_negative(field: &str, q: &BigRational) -> Result<()> {
    if q.is_negative() {
        Err(Error::param(field, format!("must be non-negative, got {q}")))
    } else {
        Ok(())
    }
}

impl RadiusSequence {
    pub fn power_law(kappa: BigRational, gamma: BigRational) -> Result<Self> {
        positive("kappa", &kappa)?;
        non_negative("gamma", &gamma)?;
        Ok(RadiusSequence::PowerLaw { kappa, gamma })
    }

    pub fn power_log(kappa: BigRational, theta: BigRational) -> Result<Self> {
        positive("kappa", &kappa)?;
        non_negative("theta", &theta)?;
        Ok(RadiusSequence::PowerLog { kappa, theta })
    }

    pub fn ear(delta: DeltaRule, h: HRule) -> Result<Self> {
        match &delta {
            DeltaRule::Log2(f) | DeltaRule::Ln(f) => positive("delta factor", f)?,
            DeltaRule::Constant(c) => non_negative("delta", c)?,
        }
        if let HRule::Constant(c) = &h {
            non_negative("h", c)?;
        }
        Ok(RadiusSequence::Ear { delta, h })
    }

    pub fn table(entries: Vec<BigRational>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::param("table", "must have at least one entry"));
        }
        for (i, e) in entries.iter().enumerate() {
            non_negative(&format!("table[{}]", i + 1), e)?;
        }
        Ok(RadiusSequence::ExplicitTable(entries))
    }

    /// Constant radius `r_n ≡ r`.
    pub fn constant(r: BigRational) -> Result<Self> {
        Self::power_law(r, BigRational::zero())
    }

    /// Checks the parameters of a sequence built without the constructors.
    pub fn validate(&self) -> Result<()> {
        let rebuilt = match self.clone() {
            RadiusSequence::PowerLaw { kappa, gamma } => Self::power_law(kappa, gamma),
            RadiusSequence::PowerLog { kappa, theta } => Self::power_log(kappa, theta),
            RadiusSequence::Ear { delta, h } => Self::ear(delta, h),
            RadiusSequence::ExplicitTable(t) => Self::table(t),
        };
        rebuilt.map(|_| ())
    }

    /// Largest index the sequence is defined for.
    pub fn max_index(&self) -> Option<usize> {
        match self {
            RadiusSequence::ExplicitTable(t) => Some(t.len()),
            _ => None,
        }
    }

    pub fn eval(&self, n: u64) -> Result<RadiusValue> {
        if n == 0 {
            return Err(Error::param("n", "radius index starts at 1"));
        }
        self.validate()?;
        let nq = BigRational::from_integer(BigInt::from(n));
        let nf = n as f64;
        Ok(match self {
            RadiusSequence::PowerLaw { kappa, gamma } => {
                if gamma.is_integer() {
                    let g = gamma
                        .to_integer()
                        .to_u32()
                        .ok_or_else(|| Error::param("gamma", "integer exponent too large"))?;
                    RadiusValue::exact(kappa / num_traits::pow(nq, g as usize))
                } else {
                    let g = rational_to_f64(gamma);
                    RadiusValue::approx(rational_to_f64(kappa) * (-g * nf.ln()).exp())
                }
            }
            RadiusSequence::PowerLog { kappa, theta } => {
                let ln = nf.ln();
                if theta.is_zero() || ln <= 1.0 {
                    RadiusValue::exact(kappa / nq)
                } else {
                    let t = rational_to_f64(theta);
                    RadiusValue::approx(rational_to_f64(kappa) / (nf * ln.powf(t)))
                }
            }
            RadiusSequence::Ear { delta, h } => {
                if let (DeltaRule::Constant(d), HRule::Constant(c)) = (delta, h) {
                    RadiusValue::exact(d * c / nq)
                } else {
                    let d = match delta {
                        DeltaRule::Log2(f) => rational_to_f64(f) * nf.log2(),
                        DeltaRule::Ln(f) => rational_to_f64(f) * nf.ln(),
                        DeltaRule::Constant(c) => rational_to_f64(c),
                    };
                    RadiusValue::approx(d * h_value(h, d) / nf)
                }
            }
            RadiusSequence::ExplicitTable(t) => {
                let v = t
                    .get((n - 1) as usize)
                    .ok_or_else(|| Error::param("n", format!("index {n} beyond table of length {}", t.len())))?;
                RadiusValue::exact(v.clone())
            }
        })
    }

    pub fn eval_f64(&self, n: u64) -> Result<f64> {
        self.eval(n).map(|v| v.approx)
    }

    /// Exact radius, or the exact dyadic value of its `f64` evaluation.
    pub fn eval_rational(&self, n: u64) -> Result<BigRational> {
        self.eval(n).map(|v| v.to_rational())
    }

    /// `Δ_m` of an eventually-always sequence.
    pub fn ear_delta(&self, m: u64) -> Option<f64> {
        match self {
            RadiusSequence::Ear { delta, .. } => Some(match delta {
                DeltaRule::Log2(f) => rational_to_f64(f) * (m as f64).log2(),
                DeltaRule::Ln(f) => rational_to_f64(f) * (m as f64).ln(),
                DeltaRule::Constant(c) => rational_to_f64(c),
            }),
            _ => None,
        }
    }
}

fn h_value(h: &HRule, x: f64) -> f64 {
    match h {
        HRule::Constant(c) => rational_to_f64(c),
        HRule::Log => x.ln().max(1.0),
        HRule::LogLog => {
            if x <= std::f64::consts::E {
                1.0
            } else {
                x.ln().ln().max(1.0)
            }
        }
    }
}

impl fmt::Display for RadiusSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RadiusSequence::PowerLaw { kappa, gamma } => write!(f, "powerlaw:{kappa},{gamma}"),
            RadiusSequence::PowerLog { kappa, theta } => write!(f, "powerlog:{kappa},{theta}"),
            RadiusSequence::Ear { delta, h } => {
                let d = match delta {
                    DeltaRule::Log2(q) => format!("log2:{q}"),
                    DeltaRule::Ln(q) => format!("ln:{q}"),
                    DeltaRule::Constant(q) => format!("const:{q}"),
                };
                let h = match h {
                    HRule::Constant(q) => format!("const:{q}"),
                    HRule::Log => "log".into(),
                    HRule::LogLog => "loglog".into(),
                };
                write!(f, "ear:delta={d};h={h}")
            }
            RadiusSequence::ExplicitTable(t) => {
                let parts: Vec<String> = t.iter().map(|q| q.to_string()).collect();
                write!(f, "table:{}", parts.join(","))
            }
        }
    }
}

impl FromStr for RadiusSequence {
    type Err = Error;

    /// Reads the `Display` form: `powerlaw:κ,γ`, `powerlog:κ,θ`,
    /// `ear:delta=log2:f;h=log`, `table:r1,r2,…`, plus `const:r`.
    fn from_str(text: &str) -> Result<Self> {
        let s: String = text.chars().filter(|c| !c.is_whitespace()).collect();
        let bad = |why: &str| Error::param("seq", format!("cannot parse `{text}`: {why}"));
        let (kind, body) = s.split_once(':').ok_or_else(|| bad("expected `kind:parameters`"))?;
        let pair = |b: &str| -> Result<(BigRational, BigRational)> {
            let (x, y) = b
                .split_once(',')
                .ok_or_else(|| bad("expected two comma-separated values"))?;
            Ok((parse_rational(x)?, parse_rational(y)?))
        };
        match kind {
            "powerlaw" => {
                let (k, g) = pair(body)?;
                Self::power_law(k, g)
            }
            "powerlog" => {
                let (k, t) = pair(body)?;
                Self::power_log(k, t)
            }
            "const" => Self::constant(parse_rational(body)?),
            "table" => Self::table(body.split(',').map(parse_rational).collect::<Result<_>>()?),
            "ear" => {
                let (d, h) = body.split_once(';').ok_or_else(|| bad("expected `delta=…;h=…`"))?;
                let d = d.strip_prefix("delta=").ok_or_else(|| bad("missing `delta=`"))?;
                let h = h.strip_prefix("h=").ok_or_else(|| bad("missing `h=`"))?;
                let delta = match d.split_once(':') {
                    Some(("log2", f)) => DeltaRule::Log2(parse_rational(f)?),
                    Some(("ln", f)) => DeltaRule::Ln(parse_rational(f)?),
                    Some(("const", c)) => DeltaRule::Constant(parse_rational(c)?),
                    _ => return Err(bad("delta must be `log2:f`, `ln:f` or `const:c`")),
                };
                let h = match h {
                    "log" => HRule::Log,
                    "loglog" => HRule::LogLog,
                    _ => match h.strip_prefix("const:") {
                        Some(c) => HRule::Constant(parse_rational(c)?),
                        None => return Err(bad("h must be `log`, `loglog` or `const:c`")),
                    },
                };
                Self::ear(delta, h)
            }
            _ => Err(bad("unknown kind; use powerlaw, powerlog, ear, table or const")),
        }
    }
}

impl Default for RadiusSequence {
    fn default() -> Self {
        RadiusSequence::PowerLaw {
            kappa: BigRational::new(BigInt::one(), BigInt::from(4)),
            gamma: BigRational::one(),
        }
    }
}
