use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{FromPrimitive, One, Signed, ToPrimitive, Zero};

use super::point::{biguint_to_limbs, err_precision, limbs_to_biguint, OrbitPoint, GUARD_BITS};
use super::real::Real;
use super::system::{Metric, PiecewiseLinearMap, SystemSpec};
use crate::circle::{dist_to_integer, frac};
use crate::error::{Error, Result};

/// Bits a fixed-point orbit of `n` steps needs so that the guard bits
/// survive: `n·log₂Λ + 64`, plus the rounding growth of inexact steppers.
pub fn required_precision(sys: &SystemSpec, n: usize) -> u64 {
    let nf = n as f64;
    let slack = match sys {
        SystemSpec::IntegerCircleMap { .. } | SystemSpec::ToralLinear { .. } => 0.0,
        SystemSpec::Rotation { .. } => (2.0 * nf + 2.0).log2(),
        _ => {
            let lam = sys.log2_expansion().exp2();
            1.0 + (-(lam - 1.0).log2()).max(0.0)
        }
    };
    (nf * sys.log2_expansion() + slack).ceil() as u64 + GUARD_BITS
}

/// Whether `sys` can be iterated without rounding on exact rational points.
pub fn supports_exact(sys: &SystemSpec) -> bool {
    match sys {
        SystemSpec::BetaMap { beta } => beta.is_rational(),
        SystemSpec::Rotation { alpha } => alpha.is_rational(),
        _ => true,
    }
}

/// One exact step on rational coordinates.
pub fn step_exact(sys: &SystemSpec, x: &[BigRational]) -> Result<Vec<BigRational>> {
    Ok(match sys {
        SystemSpec::IntegerCircleMap { a } => vec![frac(&(&x[0] * BigInt::from(*a)))],
        SystemSpec::BetaMap {
            beta: Real::Rational(b),
        } => vec![frac(&(&x[0] * b))],
        SystemSpec::PiecewiseLinear(m) => vec![m.apply(&x[0])],
        SystemSpec::ToralLinear { matrix } => matrix
            .iter()
            .map(|row| {
                let s = row
                    .iter()
                    .zip(x)
                    .fold(BigRational::zero(), |acc, (&c, xi)| acc + xi * BigInt::from(c));
                frac(&s)
            })
            .collect(),
        SystemSpec::Rotation {
            alpha: Real::Rational(q),
        } => vec![frac(&(&x[0] + q))],
        _ => {
            return Err(Error::Unsupported {
                system: sys.to_string(),
                operation: "exact iteration; use a fixed-point orbit point".into(),
            })
        }
    })
}

fn check_point(sys: &SystemSpec, x: &OrbitPoint) -> Result<()> {
    if x.dim() != sys.dimension() {
        return Err(Error::param(
            "x",
            format!(
                "dimension {} does not match system dimension {}",
                x.dim(),
                sys.dimension()
            ),
        ));
    }
    Ok(())
}

/// `Tⁿ x`. Exact points stay exact; fixed points carry their error bound and
/// fail with a precision error when the guard bits would not survive.
pub fn iterate(sys: &SystemSpec, x: &OrbitPoint, n: usize) -> Result<OrbitPoint> {
    check_point(sys, x)?;
    match x {
        OrbitPoint::Exact(xs) => {
            let mut cur = xs.clone();
            for _ in 0..n {
                cur = step_exact(sys, &cur)?;
            }
            Ok(OrbitPoint::Exact(cur))
        }
        OrbitPoint::Fixed { .. } => iterate_fixed(sys, x, n),
    }
}

/// Scaled return distances `⌈d(T^k x, x)·2^64⌉` for `k = 1..=n`; exact zero
/// stays zero. Fixed-point orbits read the top 64 bits of each iterate, so
/// each entry is within `2^{−63}` of the true distance of the sampled point.
pub fn return_distances(sys: &SystemSpec, x: &OrbitPoint, n: usize) -> Result<Vec<u64>> {
    check_point(sys, x)?;
    let metric = sys.metric();
    match x {
        OrbitPoint::Exact(xs) => {
            let mut out = Vec::with_capacity(n);
            let mut cur = xs.clone();
            for _ in 0..n {
                cur = step_exact(sys, &cur)?;
                let d = cur
                    .iter()
                    .zip(xs)
                    .map(|(y, x0)| exact_dist(metric, y, x0))
                    .max()
                    .unwrap_or_else(BigRational::zero);
                out.push(scale_up(&d));
            }
            Ok(out)
        }
        OrbitPoint::Fixed { .. } => {
            let d = x.dim();
            let mut st = Stepper::new(sys, x, n)?;
            let mut w0 = vec![0u64; d];
            st.windows(0, &mut w0);
            let mut wk = vec![0u64; d];
            let mut out = Vec::with_capacity(n);
            for k in 1..=n {
                st.advance(k)?;
                st.windows(k, &mut wk);
                let dist = wk
                    .iter()
                    .zip(&w0)
                    .map(|(&a, &b)| window_dist(metric, a, b))
                    .max()
                    .unwrap_or(0);
                out.push(dist);
            }
            Ok(out)
        }
    }
}

/// The orbit `x, Tx, …, Tⁿx` as `f64` coordinates.
pub fn orbit_f64(sys: &SystemSpec, x: &OrbitPoint, n: usize) -> Result<Vec<Vec<f64>>> {
    check_point(sys, x)?;
    let d = x.dim();
    let mut out = Vec::with_capacity(n + 1);
    match x {
        OrbitPoint::Exact(xs) => {
            let mut cur = xs.clone();
            out.push(OrbitPoint::Exact(cur.clone()).coords_f64());
            for _ in 0..n {
                cur = step_exact(sys, &cur)?;
                out.push(OrbitPoint::Exact(cur.clone()).coords_f64());
            }
        }
        OrbitPoint::Fixed { .. } => {
            let mut st = Stepper::new(sys, x, n)?;
            let mut w = vec![0u64; d];
            for k in 0..=n {
                if k > 0 {
                    st.advance(k)?;
                }
                st.windows(k, &mut w);
                out.push(w.iter().map(|&v| v as f64 / 2f64.powi(64)).collect());
            }
        }
    }
    Ok(out)
}

impl OrbitPoint {
    fn coords_f64(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.to_f64(i)).collect()
    }
}

/// Distance between two 64-bit windows, in units of `2^{−64}`.
pub fn window_dist(metric: Metric, a: u64, b: u64) -> u64 {
    match metric {
        Metric::Circle => {
            let d = a.wrapping_sub(b);
            d.min(d.wrapping_neg())
        }
        Metric::Interval => a.abs_diff(b),
    }
}

fn exact_dist(metric: Metric, x: &BigRational, y: &BigRational) -> BigRational {
    match metric {
        Metric::Circle => dist_to_integer(&(x - y)),
        Metric::Interval => (x - y).abs(),
    }
}

fn scale_up(d: &BigRational) -> u64 {
    let s = (d.numer() << 64usize).div_ceil(d.denom());
    s.to_u64().unwrap_or(u64::MAX)
}

/// `⌈r·2^64⌉`, saturating; compare scaled distances with `<`.
pub fn scaled_threshold(r: f64) -> u128 {
    if r <= 0.0 {
        0
    } else if r >= 1.0 {
        1u128 << 64
    } else {
        (r * 2f64.powi(64)).ceil() as u128
    }
}

/// `log₂(2^{log₂ Λ + e} + extra)` without leaving the log domain.
fn grow(err_bits: f64, log2_lambda: f64, extra: f64) -> f64 {
    let scaled = err_bits + log2_lambda;
    if scaled == f64::NEG_INFINITY {
        return extra.log2();
    }
    let (hi, lo) = if scaled > extra.log2() {
        (scaled, extra.log2())
    } else {
        (extra.log2(), scaled)
    };
    hi + (1.0 + (lo - hi).exp2()).log2()
}

enum Stepper {
    /// `a = ±2^shift`: iterates are bit windows of the starting point.
    Shift {
        bits: u64,
        limbs: Vec<u64>,
        shift: u64,
        negate: bool,
    },
    /// Integer matrices (including `1×1`) on little-endian limbs mod `2^bits`.
    Linear {
        bits: u64,
        coeffs: Vec<Vec<i64>>,
        state: Vec<Vec<u64>>,
        scratch: Vec<Vec<u64>>,
    },
    /// `x ↦ (num·x + add) / den`, reduced mod 1 by the branch choice.
    Affine(AffineStepper),
    Rotation {
        bits: u64,
        x: BigUint,
        alpha: BigUint,
        exact: bool,
        err_bits: f64,
    },
}

struct AffineStepper {
    bits: u64,
    x: BigInt,
    err_bits: f64,
    log2_lambda: f64,
    kind: AffineKind,
}

enum AffineKind {
    /// `frac(β x)`, `β = num / 2^q` truncated, or exact when rational.
    Beta { num: BigInt, den: BigInt, surd: bool },
    Piecewise {
        /// Per branch: `(⌊right·2^P⌋, right dyadic at scale P)`.
        cuts: Vec<(BigInt, bool)>,
        /// Per branch `y = (sn·cd·X + cn·sd·2^P) / (sd·cd)`.
        coeffs: Vec<(BigInt, BigInt, BigInt)>,
    },
}

impl Stepper {
    fn new(sys: &SystemSpec, x: &OrbitPoint, n: usize) -> Result<Stepper> {
        let OrbitPoint::Fixed { bits, coords, err_bits } = x else {
            unreachable!("fixed points only")
        };
        let bits = *bits;
        let required = required_precision(sys, n);
        if bits < required {
            return Err(err_precision(n, required, bits));
        }
        let xbig = || BigInt::from(limbs_to_biguint(&coords[0]));
        Ok(match sys {
            SystemSpec::IntegerCircleMap { a } if a.unsigned_abs().is_power_of_two() => Stepper::Shift {
                bits,
                limbs: coords[0].clone(),
                shift: a.unsigned_abs().trailing_zeros() as u64,
                negate: *a < 0,
            },
            SystemSpec::IntegerCircleMap { a } => Stepper::linear(bits, vec![vec![*a]], coords)?,
            SystemSpec::ToralLinear { matrix } => Stepper::linear(bits, matrix.clone(), coords)?,
            SystemSpec::BetaMap { beta } => {
                let (num, den, surd) = match beta {
                    Real::Rational(q) => (q.numer().clone(), q.denom().clone(), false),
                    Real::Surd { .. } => {
                        let q = bits + 64;
                        (beta.scaled(q), BigInt::one() << q as usize, true)
                    }
                };
                Stepper::Affine(AffineStepper {
                    bits,
                    x: xbig(),
                    err_bits: *err_bits,
                    log2_lambda: sys.log2_expansion(),
                    kind: AffineKind::Beta { num, den, surd },
                })
            }
            SystemSpec::PiecewiseLinear(m) => Stepper::Affine(AffineStepper {
                bits,
                x: xbig(),
                err_bits: *err_bits,
                log2_lambda: sys.log2_expansion(),
                kind: piecewise_kind(m, bits),
            }),
            SystemSpec::Rotation { alpha } => {
                let scaled = alpha.scaled(bits);
                let exact = match alpha {
                    Real::Rational(q) => (q * BigRational::from_integer(BigInt::one() << bits as usize)).is_integer(),
                    Real::Surd { .. } => false,
                };
                let modulus = BigInt::one() << bits as usize;
                Stepper::Rotation {
                    bits,
                    x: limbs_to_biguint(&coords[0]),
                    alpha: scaled.mod_floor(&modulus).to_biguint().expect("reduced"),
                    exact,
                    err_bits: *err_bits,
                }
            }
        })
    }

    fn linear(bits: u64, coeffs: Vec<Vec<i64>>, coords: &[Vec<u64>]) -> Result<Stepper> {
        if coeffs.iter().flatten().any(|c| c.unsigned_abs() >= 1 << 31) {
            return Err(Error::Overflow("matrix entries must stay below 2^31 in modulus".into()));
        }
        Ok(Stepper::Linear {
            bits,
            coeffs,
            state: coords.to_vec(),
            scratch: coords.to_vec(),
        })
    }

    fn advance(&mut self, step: usize) -> Result<()> {
        match self {
            Stepper::Shift { .. } => {}
            Stepper::Linear {
                coeffs, state, scratch, ..
            } => {
                let limbs = state[0].len();
                for (row, out) in coeffs.iter().zip(scratch.iter_mut()) {
                    let mut carry: i128 = 0;
                    for t in 0..limbs {
                        let mut acc = carry;
                        for (c, xj) in row.iter().zip(state.iter()) {
                            acc += *c as i128 * xj[t] as i128;
                        }
                        out[t] = acc as u64;
                        carry = acc >> 64;
                    }
                }
                std::mem::swap(state, scratch);
            }
            Stepper::Affine(a) => a.advance(step)?,
            Stepper::Rotation {
                bits,
                x,
                alpha,
                exact,
                err_bits,
            } => {
                *x += &*alpha;
                if x.bits() > *bits {
                    *x -= BigUint::one() << *bits as usize;
                }
                if !*exact {
                    *err_bits = grow(*err_bits, 0.0, 1.0);
                }
            }
        }
        Ok(())
    }

    /// Top 64 bits of each coordinate of `T^k x`.
    fn windows(&self, k: usize, out: &mut [u64]) {
        match self {
            Stepper::Shift {
                bits,
                limbs,
                shift,
                negate,
            } => {
                let lo = bits - 64 - shift * k as u64;
                let (i, off) = ((lo / 64) as usize, lo % 64);
                let mut w = limbs[i] >> off;
                if off > 0 {
                    w |= limbs[i + 1] << (64 - off);
                }
                out[0] = if *negate && k % 2 == 1 { w.wrapping_neg() } else { w };
            }
            Stepper::Linear { state, .. } => {
                for (o, s) in out.iter_mut().zip(state) {
                    *o = *s.last().expect("non-empty");
                }
            }
            Stepper::Affine(a) => {
                out[0] = top_window(&a.x, a.bits);
            }
            Stepper::Rotation { bits, x, .. } => {
                out[0] = top_window(&BigInt::from(x.clone()), *bits);
            }
        }
    }

    fn point(&self) -> OrbitPoint {
        match self {
            Stepper::Shift { .. } => unreachable!("shift points are rebuilt in `iterate`"),
            Stepper::Linear { bits, state, .. } => OrbitPoint::Fixed {
                bits: *bits,
                coords: state.clone(),
                err_bits: f64::NEG_INFINITY,
            },
            Stepper::Affine(a) => OrbitPoint::Fixed {
                bits: a.bits,
                coords: vec![biguint_to_limbs(&a.x.to_biguint().expect("in range"), a.bits)],
                err_bits: a.err_bits,
            },
            Stepper::Rotation { bits, x, err_bits, .. } => OrbitPoint::Fixed {
                bits: *bits,
                coords: vec![biguint_to_limbs(x, *bits)],
                err_bits: *err_bits,
            },
        }
    }
}

/// `⌈2^err_bits⌉ + 1` as an integer number of ulps.
fn ulps(err_bits: f64) -> BigInt {
    BigInt::from_f64(err_bits.exp2().ceil()).expect("finite error bound") + 1
}

fn top_window(x: &BigInt, bits: u64) -> u64 {
    (x >> (bits - 64) as usize).to_u64().expect("value below 2^bits")
}

fn piecewise_kind(m: &PiecewiseLinearMap, bits: u64) -> AffineKind {
    let one = BigInt::one() << bits as usize;
    let cuts = m
        .branches()
        .iter()
        .map(|b| {
            let s = b.right.numer() * &one;
            let (q, r) = s.div_mod_floor(b.right.denom());
            (q, r.is_zero())
        })
        .collect();
    let coeffs = m
        .branches()
        .iter()
        .map(|b| {
            let (sn, sd) = (b.slope.numer(), b.slope.denom());
            let (cn, cd) = (b.intercept.numer(), b.intercept.denom());
            (sn * cd, cn * sd * &one, sd * cd)
        })
        .collect();
    AffineKind::Piecewise { cuts, coeffs }
}

impl AffineStepper {
    fn advance(&mut self, step: usize) -> Result<()> {
        let one = BigInt::one() << self.bits as usize;
        let uncertain = self.err_bits > f64::NEG_INFINITY;
        // Width of the uncertainty window in ulps, rounded up.
        let slack = || ulps(self.err_bits);
        let (y, rounded) = match &self.kind {
            AffineKind::Beta { num, den, surd } => {
                let (q, r) = (num * &self.x).div_mod_floor(den);
                (q, *surd || !r.is_zero())
            }
            AffineKind::Piecewise { cuts, coeffs } => {
                let mut idx = cuts.len() - 1;
                for (i, (cut, dyadic)) in cuts.iter().enumerate().take(cuts.len() - 1) {
                    if uncertain && (&self.x - cut).abs() <= slack() {
                        return Err(Error::BranchAmbiguous { step });
                    }
                    let before = if *dyadic { &self.x < cut } else { &self.x <= cut };
                    if before {
                        idx = i;
                        break;
                    }
                }
                let (mul, add, den) = &coeffs[idx];
                let (q, r) = (mul * &self.x + add).div_mod_floor(den);
                (q, !r.is_zero())
            }
        };
        let mut err = self.err_bits;
        if uncertain || rounded {
            err = grow(err, self.log2_lambda, if rounded { 2.0 } else { 0.0 });
        }
        let frac_part = y.mod_floor(&one);
        if matches!(self.kind, AffineKind::Beta { .. }) && err > f64::NEG_INFINITY {
            let s = ulps(err);
            if frac_part < s || &one - &frac_part < s {
                return Err(Error::BranchAmbiguous { step });
            }
        }
        if err > self.bits as f64 - GUARD_BITS as f64 {
            return Err(err_precision(step, err.ceil() as u64 + GUARD_BITS, self.bits));
        }
        self.x = frac_part;
        self.err_bits = err;
        Ok(())
    }
}

/// Rebuilds `Tⁿ x` for shift steppers, which never materialise iterates.
fn shift_point(bits: u64, limbs: &[u64], shift: u64, negate: bool, n: usize) -> OrbitPoint {
    let one = BigUint::one() << bits as usize;
    let x = limbs_to_biguint(limbs);
    let mut y = (x << (shift as usize * n)) % &one;
    if negate && n % 2 == 1 && !y.is_zero() {
        y = &one - y;
    }
    OrbitPoint::Fixed {
        bits,
        coords: vec![biguint_to_limbs(&y, bits)],
        err_bits: f64::NEG_INFINITY,
    }
}

/// Fixed-point iterate that also handles the shift fast path.
pub(crate) fn iterate_fixed(sys: &SystemSpec, x: &OrbitPoint, n: usize) -> Result<OrbitPoint> {
    let st = Stepper::new(sys, x, n)?;
    if let Stepper::Shift {
        bits,
        limbs,
        shift,
        negate,
    } = &st
    {
        return Ok(shift_point(*bits, limbs, *shift, *negate, n));
    }
    let mut st = st;
    for k in 1..=n {
        st.advance(k)?;
    }
    Ok(st.point())
}
