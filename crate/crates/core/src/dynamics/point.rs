use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::circle::{frac, rational_to_f64};
use crate::error::Error;

/// Guard bits that must remain accurate after the declared horizon.
pub const GUARD_BITS: u64 = 64;

/// A point of `[0, 1)^d`: exact rationals, or `bits`-bit binary fixed point
/// with a forward error bound of `2^{err_bits − bits}` (`err_bits = −∞` when exact).
#[derive(Clone, Debug, PartialEq)]
pub enum OrbitPoint {
    Exact(Vec<BigRational>),
    Fixed {
        bits: u64,
        /// Per coordinate, little-endian limbs; `bits / 64` of them.
        coords: Vec<Vec<u64>>,
        err_bits: f64,
    },
}

/// Rounds a precision up to whole 64-bit limbs.
pub fn round_bits(bits: u64) -> u64 {
    bits.div_ceil(64).max(2) * 64
}

impl OrbitPoint {
    pub fn exact(x: BigRational) -> Self {
        OrbitPoint::Exact(vec![frac(&x)])
    }

    pub fn exact_vec(xs: Vec<BigRational>) -> Self {
        OrbitPoint::Exact(xs.iter().map(frac).collect())
    }

    pub fn from_ratio(num: i64, den: i64) -> Self {
        Self::exact(BigRational::new(num.into(), den.into()))
    }

    /// Fixed-point rounding of exact coordinates to `bits` (rounded up to
    /// whole limbs); exact when the coordinates are dyadic at that scale.
    pub fn to_fixed(&self, bits: u64) -> OrbitPoint {
        match self {
            OrbitPoint::Exact(xs) => {
                let bits = round_bits(bits);
                let mut err = f64::NEG_INFINITY;
                let coords = xs
                    .iter()
                    .map(|x| {
                        let scaled = x.numer() << bits as usize;
                        let (q, r) = scaled.div_mod_floor(x.denom());
                        if !r.is_zero() {
                            err = 0.0;
                        }
                        biguint_to_limbs(&q.to_biguint().expect("non-negative"), bits)
                    })
                    .collect();
                OrbitPoint::Fixed {
                    bits,
                    coords,
                    err_bits: err,
                }
            }
            OrbitPoint::Fixed { .. } => self.clone(),
        }
    }

    /// Uniform `bits`-bit dyadic point, limbs drawn most significant first.
    pub fn sample<R: RngCore>(rng: &mut R, dim: usize, bits: u64) -> OrbitPoint {
        let bits = round_bits(bits);
        let limbs = (bits / 64) as usize;
        let coords = (0..dim)
            .map(|_| {
                let mut v = vec![0u64; limbs];
                for i in (0..limbs).rev() {
                    v[i] = rng.next_u64();
                }
                v
            })
            .collect();
        OrbitPoint::Fixed {
            bits,
            coords,
            err_bits: f64::NEG_INFINITY,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            OrbitPoint::Exact(xs) => xs.len(),
            OrbitPoint::Fixed { coords, .. } => coords.len(),
        }
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, OrbitPoint::Exact(_))
    }

    /// Top 64 fractional bits of a coordinate.
    pub fn window(&self, coord: usize) -> u64 {
        match self {
            OrbitPoint::Exact(xs) => {
                let x = &xs[coord];
                ((x.numer() << 64usize) / x.denom()).to_u64().unwrap_or(u64::MAX)
            }
            OrbitPoint::Fixed { coords, .. } => *coords[coord].last().expect("non-empty"),
        }
    }

    pub fn to_f64(&self, coord: usize) -> f64 {
        match self {
            OrbitPoint::Exact(xs) => rational_to_f64(&xs[coord]),
            OrbitPoint::Fixed { .. } => self.window(coord) as f64 / 2f64.powi(64),
        }
    }

    /// Exact value of a fixed-point coordinate (or the exact coordinate).
    pub fn to_rational(&self, coord: usize) -> BigRational {
        match self {
            OrbitPoint::Exact(xs) => xs[coord].clone(),
            OrbitPoint::Fixed { bits, coords, .. } => BigRational::new(
                BigInt::from(limbs_to_biguint(&coords[coord])),
                BigInt::from(1) << *bits as usize,
            ),
        }
    }

    /// Forward error bound as `log₂` of its absolute size; `−∞` when exact.
    pub fn error_log2(&self) -> f64 {
        match self {
            OrbitPoint::Exact(_) => f64::NEG_INFINITY,
            OrbitPoint::Fixed { bits, err_bits, .. } => err_bits - *bits as f64,
        }
    }
}

/// Deterministic per-sample stream derived from `(master seed, index)`.
pub fn sample_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

pub(crate) fn limbs_to_biguint(limbs: &[u64]) -> BigUint {
    let mut bytes = Vec::with_capacity(limbs.len() * 8);
    for l in limbs {
        bytes.extend_from_slice(&l.to_le_bytes());
    }
    BigUint::from_bytes_le(&bytes)
}

pub(crate) fn biguint_to_limbs(v: &BigUint, bits: u64) -> Vec<u64> {
    let mut out = v.to_u64_digits();
    out.resize((bits / 64) as usize, 0);
    out
}

pub(crate) fn err_precision(steps: usize, required: u64, available: u64) -> Error {
    Error::PrecisionExhausted {
        steps,
        required_bits: required,
        available_bits: available,
    }
}
