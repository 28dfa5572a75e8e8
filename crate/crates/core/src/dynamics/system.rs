use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use super::real::Real;
use crate::circle::{parse_rational, rational_to_f64};
use crate::error::{Error, Result};

/// Distance used for return statistics.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Metric {
    /// `|x − y|` on `[0, 1)`.
    Interval,
    /// `min(|x − y|, 1 − |x − y|)` on ℝ/ℤ.
    Circle,
}

/// `T x = slope · x + intercept` on `[left, right)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Branch {
    pub left: BigRational,
    pub right: BigRational,
    pub slope: BigRational,
    pub intercept: BigRational,
}

impl Branch {
    pub fn apply(&self, x: &BigRational) -> BigRational {
        &self.slope * x + &self.intercept
    }

    /// Image interval `[lo, hi]` of the closed branch domain.
    pub fn image(&self) -> (BigRational, BigRational) {
        let a = self.apply(&self.left);
        let b = self.apply(&self.right);
        if a <= b {
            (a, b)
        } else {
            (b, a)
        }
    }
}

/// A piecewise-linear expanding map of `[0, 1)` with rational data.
#[derive(Clone, Debug, PartialEq)]
pub struct PiecewiseLinearMap {
    branches: Vec<Branch>,
    metric: Metric,
}

impl PiecewiseLinearMap {
    /// Validates that the domains partition `[0, 1)`, every image stays in
    /// `[0, 1]` and every slope has modulus above 1.
    pub fn new(branches: Vec<Branch>, metric: Metric) -> Result<Self> {
        if branches.is_empty() {
            return Err(Error::param("branches", "at least one branch required"));
        }
        let mut cursor = BigRational::zero();
        for (i, b) in branches.iter().enumerate() {
            if b.left != cursor {
                return Err(Error::param(
                    "branches",
                    format!("branch {i} starts at {} but the previous ends at {cursor}", b.left),
                ));
            }
            if b.right <= b.left {
                return Err(Error::param("branches", format!("branch {i} is empty")));
            }
            if b.slope.abs() <= BigRational::one() {
                return Err(Error::NonExpanding {
                    index: i,
                    slope: b.slope.to_string(),
                });
            }
            let (lo, hi) = b.image();
            if lo.is_negative() || hi > BigRational::one() {
                return Err(Error::param(
                    "branches",
                    format!("branch {i} maps outside [0, 1]: image [{lo}, {hi}]"),
                ));
            }
            cursor = b.right.clone();
        }
        if !cursor.is_one() {
            return Err(Error::param("branches", format!("domains end at {cursor}, not 1")));
        }
        Ok(PiecewiseLinearMap { branches, metric })
    }

    /// `x ↦ a x mod 1` split at `k/|a|`, with the circle metric.
    pub fn from_integer_map(a: i64) -> Result<Self> {
        if a.unsigned_abs() < 2 {
            return Err(Error::param("a", format!("|a| must be at least 2, got {a}")));
        }
        let m = a.unsigned_abs() as i64;
        let branches = (0..m)
            .map(|k| Branch {
                left: BigRational::new(k.into(), m.into()),
                right: BigRational::new((k + 1).into(), m.into()),
                slope: BigRational::from_integer(a.into()),
                intercept: BigRational::from_integer(if a > 0 { -k } else { k + 1 }.into()),
            })
            .collect();
        Self::new(branches, Metric::Circle)
    }

    /// `m` full branches of slope `±m`, alternating orientation when
    /// `alternate` is set (the tent-like family).
    pub fn uniform(m: i64, alternate: bool) -> Result<Self> {
        let branches = (0..m)
            .map(|k| {
                let flip = alternate && k % 2 == 1;
                Branch {
                    left: BigRational::new(k.into(), m.into()),
                    right: BigRational::new((k + 1).into(), m.into()),
                    slope: BigRational::from_integer(if flip { -m } else { m }.into()),
                    intercept: BigRational::from_integer(if flip { k + 1 } else { -k }.into()),
                }
            })
            .collect();
        Self::new(branches, Metric::Interval)
    }

    pub fn with_metric(mut self, metric: Metric) -> Self {
        self.metric = metric;
        self
    }

    pub fn branches(&self) -> &[Branch] {
        &self.branches
    }

    pub fn metric(&self) -> Metric {
        self.metric
    }

    /// `λ = min |slope|`.
    pub fn min_expansion(&self) -> BigRational {
        self.branches.iter().map(|b| b.slope.abs()).min().expect("non-empty")
    }

    /// `Λ = max |slope|`.
    pub fn max_expansion(&self) -> BigRational {
        self.branches.iter().map(|b| b.slope.abs()).max().expect("non-empty")
    }

    /// Shortest first-level branch image, the large-image constant `c₀`.
    pub fn large_image_constant(&self) -> BigRational {
        self.branches
            .iter()
            .map(|b| {
                let (lo, hi) = b.image();
                hi - lo
            })
            .min()
            .expect("non-empty")
    }

    /// Index of the branch containing `x ∈ [0, 1)`.
    pub fn branch_index(&self, x: &BigRational) -> usize {
        self.branches
            .partition_point(|b| &b.right <= x)
            .min(self.branches.len() - 1)
    }

    /// One exact step, reduced into `[0, 1)`.
    pub fn apply(&self, x: &BigRational) -> BigRational {
        let y = self.branches[self.branch_index(x)].apply(x);
        if y.is_one() {
            BigRational::zero()
        } else {
            y
        }
    }
}

/// The dynamical systems the lab knows how to iterate.
#[derive(Clone, Debug, PartialEq)]
pub enum SystemSpec {
    /// `T x = a x mod 1`, `|a| ≥ 2`.
    IntegerCircleMap {
        a: i64,
    },
    /// `T x = β x mod 1`, `β > 1`.
    BetaMap {
        beta: Real,
    },
    PiecewiseLinear(PiecewiseLinearMap),
    /// `T x = A x mod 1` on the `d`-torus.
    ToralLinear {
        matrix: Vec<Vec<i64>>,
    },
    /// `T x = x + α mod 1`.
    Rotation {
        alpha: Real,
    },
}

impl SystemSpec {
    pub fn doubling() -> Self {
        SystemSpec::IntegerCircleMap { a: 2 }
    }

    pub fn integer_map(a: i64) -> Result<Self> {
        let s = SystemSpec::IntegerCircleMap { a };
        s.validate()?;
        Ok(s)
    }

    pub fn beta(beta: Real) -> Result<Self> {
        let s = SystemSpec::BetaMap { beta };
        s.validate()?;
        Ok(s)
    }

    /// A toral map; a 1×1 matrix becomes the integer circle map.
    pub fn toral(matrix: Vec<Vec<i64>>) -> Result<Self> {
        let s = if matrix.len() == 1 && matrix[0].len() == 1 {
            SystemSpec::IntegerCircleMap { a: matrix[0][0] }
        } else {
            SystemSpec::ToralLinear { matrix }
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            SystemSpec::IntegerCircleMap { a } => {
                if a.unsigned_abs() < 2 {
                    return Err(Error::param("a", format!("|a| must be at least 2, got {a}")));
                }
            }
            SystemSpec::BetaMap { beta } => {
                if beta.cmp_rational(&BigRational::one()) != std::cmp::Ordering::Greater {
                    return Err(Error::param("beta", format!("must exceed 1, got {beta}")));
                }
            }
            SystemSpec::PiecewiseLinear(m) => {
                PiecewiseLinearMap::new(m.branches.clone(), m.metric)?;
            }
            SystemSpec::ToralLinear { matrix } => {
                let d = matrix.len();
                if d == 0 || matrix.iter().any(|row| row.len() != d) {
                    return Err(Error::param("matrix", "must be square and non-empty"));
                }
                if integer_det(matrix).is_zero() {
                    return Err(Error::param("matrix", "determinant is zero"));
                }
            }
            SystemSpec::Rotation { .. } => {}
        }
        Ok(())
    }

    pub fn dimension(&self) -> usize {
        match self {
            SystemSpec::ToralLinear { matrix } => matrix.len(),
            _ => 1,
        }
    }

    pub fn metric(&self) -> Metric {
        match self {
            SystemSpec::IntegerCircleMap { .. } | SystemSpec::ToralLinear { .. } | SystemSpec::Rotation { .. } => {
                Metric::Circle
            }
            SystemSpec::BetaMap { .. } => Metric::Interval,
            SystemSpec::PiecewiseLinear(m) => m.metric,
        }
    }

    /// Lebesgue measure is invariant.
    pub fn preserves_lebesgue(&self) -> bool {
        match self {
            SystemSpec::IntegerCircleMap { .. } | SystemSpec::ToralLinear { .. } | SystemSpec::Rotation { .. } => true,
            SystemSpec::BetaMap { beta } => beta.as_rational().is_some_and(|q| q.is_integer()),
            SystemSpec::PiecewiseLinear(m) => m.branches.iter().all(|b| {
                let (lo, hi) = b.image();
                lo.is_zero() && hi.is_one()
            }),
        }
    }

    /// Upper bound on `log₂ Λ`, the bits of precision one step consumes.
    pub fn log2_expansion(&self) -> f64 {
        match self {
            SystemSpec::IntegerCircleMap { a } => (a.unsigned_abs() as f64).log2(),
            SystemSpec::BetaMap { beta } => beta.to_f64().log2(),
            SystemSpec::PiecewiseLinear(m) => rational_to_f64(&m.max_expansion()).log2(),
            SystemSpec::ToralLinear { matrix } => {
                // Row-sum norm bounds every coordinate's growth.
                let norm = matrix
                    .iter()
                    .map(|r| r.iter().map(|v| v.unsigned_abs() as f64).sum::<f64>())
                    .fold(0.0, f64::max);
                norm.max(1.0).log2()
            }
            SystemSpec::Rotation { .. } => 0.0,
        }
    }

    pub fn is_expanding(&self) -> bool {
        !matches!(self, SystemSpec::Rotation { .. })
    }

    pub fn name(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for SystemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SystemSpec::IntegerCircleMap { a: 2 } => write!(f, "doubling"),
            SystemSpec::IntegerCircleMap { a } => write!(f, "times:{a}"),
            SystemSpec::BetaMap { beta } => write!(f, "beta:{beta}"),
            SystemSpec::PiecewiseLinear(m) => {
                let parts: Vec<String> = m
                    .branches
                    .iter()
                    .map(|b| {
                        let sign = if b.intercept.is_negative() { "" } else { "+" };
                        format!("[{},{})->{}x{sign}{}", b.left, b.right, b.slope, b.intercept)
                    })
                    .collect();
                let kind = match m.metric {
                    Metric::Interval => "piecewise",
                    Metric::Circle => "piecewise-circle",
                };
                write!(f, "{kind}:{}", parts.join(";"))
            }
            SystemSpec::ToralLinear { matrix } => {
                let rows: Vec<String> = matrix
                    .iter()
                    .map(|r| r.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(","))
                    .collect();
                write!(f, "toral:{}", rows.join(";"))
            }
            SystemSpec::Rotation { alpha } => write!(f, "rotation:{alpha}"),
        }
    }
}

impl FromStr for SystemSpec {
    type Err = Error;

    /// Reads the `Display` form: `doubling`, `times:a`, `beta:β`,
    /// `rotation:α`, `toral:a,b;c,d`, `piecewise:[l,r)->sx+b;…` (interval
    /// metric) or `piecewise-circle:…`.
    fn from_str(text: &str) -> Result<Self> {
        let s: String = text.chars().filter(|c| !c.is_whitespace()).collect();
        let bad = |why: &str| Error::param("system", format!("cannot parse `{text}`: {why}"));
        if s == "doubling" {
            return Ok(Self::doubling());
        }
        let (kind, body) = s.split_once(':').ok_or_else(|| bad("expected `kind:parameters`"))?;
        let int = |t: &str| t.parse::<i64>().map_err(|_| bad("expected an integer"));
        match kind {
            "times" => Self::integer_map(int(body)?),
            "beta" => Self::beta(body.parse()?),
            "rotation" => Ok(SystemSpec::Rotation { alpha: body.parse()? }),
            "toral" => {
                let rows = body
                    .split(';')
                    .map(|r| r.split(',').map(int).collect::<Result<Vec<_>>>())
                    .collect::<Result<Vec<_>>>()?;
                Self::toral(rows)
            }
            "piecewise" | "piecewise-circle" => {
                let metric = if kind == "piecewise" {
                    Metric::Interval
                } else {
                    Metric::Circle
                };
                let branches = body
                    .split(';')
                    .map(|part| {
                        let shape = "each branch reads `[l,r)->sx+b` or `[l,r)->sx-b`";
                        let (dom, map) = part.split_once(")->").ok_or_else(|| bad(shape))?;
                        let (l, r) = dom
                            .strip_prefix('[')
                            .and_then(|d| d.split_once(','))
                            .ok_or_else(|| bad(shape))?;
                        let (slope, rest) = map.rsplit_once('x').ok_or_else(|| bad(shape))?;
                        let intercept = match rest.strip_prefix('+') {
                            Some(b) => b,
                            None if rest.starts_with('-') => rest,
                            None => return Err(bad(shape)),
                        };
                        Ok(Branch {
                            left: parse_rational(l)?,
                            right: parse_rational(r)?,
                            slope: parse_rational(slope)?,
                            intercept: parse_rational(intercept)?,
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(SystemSpec::PiecewiseLinear(PiecewiseLinearMap::new(branches, metric)?))
            }
            _ => Err(bad(
                "unknown kind; use doubling, times, beta, rotation, toral or piecewise",
            )),
        }
    }
}

/// Exact determinant of an integer matrix.
pub(crate) fn integer_det(m: &[Vec<i64>]) -> BigInt {
    crate::nt::to_imat(m).map(|b| crate::nt::det(&b)).unwrap_or_default()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_display_forms() {
        let specs = [
            SystemSpec::doubling(),
            SystemSpec::integer_map(-3).unwrap(),
            SystemSpec::beta(Real::golden()).unwrap(),
            SystemSpec::toral(vec![vec![2, 1], vec![1, 1]]).unwrap(),
            SystemSpec::Rotation {
                alpha: "sqrt(2)".parse().unwrap(),
            },
            SystemSpec::PiecewiseLinear(PiecewiseLinearMap::uniform(3, true).unwrap()),
            SystemSpec::PiecewiseLinear(PiecewiseLinearMap::from_integer_map(2).unwrap()),
        ];
        for spec in specs {
            let text = spec.to_string();
            assert_eq!(text.parse::<SystemSpec>().unwrap(), spec, "{text}");
        }
        assert_eq!("times:2".parse::<SystemSpec>().unwrap(), SystemSpec::doubling());
        assert_eq!(
            "toral:3".parse::<SystemSpec>().unwrap(),
            SystemSpec::integer_map(3).unwrap()
        );
        assert_eq!(
            "beta:golden".parse::<SystemSpec>().unwrap(),
            SystemSpec::beta(Real::golden()).unwrap()
        );
        let two = "piecewise:[0,1/2)->2x+0;[1/2,1)->2x-1".parse::<SystemSpec>().unwrap();
        assert_eq!(
            two,
            "piecewise:[0,1/2)->2x+0;[1/2,1)->2x+-1".parse::<SystemSpec>().unwrap()
        );
        for bad in [
            "times:1",
            "beta:1/2",
            "toral:1,2;2,4",
            "piecewise:[0,1)->x+0",
            "piecewise:[0,1)->2x1",
            "cat",
            "times:x",
        ] {
            assert!(bad.parse::<SystemSpec>().is_err(), "{bad}");
        }
    }

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    #[test]
    fn integer_map_branches() {
        let m = PiecewiseLinearMap::from_integer_map(2).unwrap();
        assert_eq!(m.branches().len(), 2);
        assert_eq!(m.apply(&q(3, 4)), q(1, 2));
        assert_eq!(m.apply(&q(1, 3)), q(2, 3));
        let neg = PiecewiseLinearMap::from_integer_map(-3).unwrap();
        assert_eq!(neg.apply(&q(1, 4)), q(1, 4));
        assert_eq!(neg.apply(&q(0, 1)), q(0, 1));
    }

    #[test]
    fn rejects_non_expanding_and_gaps() {
        let b = Branch {
            left: q(0, 1),
            right: q(1, 1),
            slope: q(1, 1),
            intercept: q(0, 1),
        };
        assert!(matches!(
            PiecewiseLinearMap::new(vec![b], Metric::Interval),
            Err(Error::NonExpanding { index: 0, .. })
        ));
        let b = Branch {
            left: q(0, 1),
            right: q(1, 2),
            slope: q(2, 1),
            intercept: q(0, 1),
        };
        assert!(PiecewiseLinearMap::new(vec![b], Metric::Interval).is_err());
    }

    #[test]
    fn tent_map_constants() {
        let t = PiecewiseLinearMap::uniform(2, true).unwrap();
        assert_eq!(t.apply(&q(3, 4)), q(1, 2));
        assert_eq!(t.min_expansion(), q(2, 1));
        assert_eq!(t.large_image_constant(), q(1, 1));
    }

    #[test]
    fn determinants() {
        assert_eq!(integer_det(&[vec![2, 1], vec![1, 1]]), BigInt::from(1));
        assert_eq!(integer_det(&[vec![0, 1], vec![1, 0]]), BigInt::from(-1));
        assert_eq!(
            integer_det(&[vec![2, 0, 1], vec![1, 3, 2], vec![1, 1, 2]]),
            BigInt::from(6)
        );
        assert!(SystemSpec::toral(vec![vec![1, 2], vec![2, 4]]).is_err());
        assert_eq!(
            SystemSpec::toral(vec![vec![3]]).unwrap(),
            SystemSpec::IntegerCircleMap { a: 3 }
        );
    }

    #[test]
    fn beta_validation() {
        assert!(SystemSpec::beta(Real::golden()).is_ok());
        assert!(SystemSpec::beta(Real::Rational(q(1, 1))).is_err());
    }
}
