//! Arithmetic behind the exact correlation bounds: the gcd lemma for
//! `aⁿ − 1`, the scalar and matrix solution lattices, and the Bézout
//! polynomials for geometric sums.

mod matrix;
mod poly;

pub use matrix::{
    char_poly, check_matrix_lattice, det, eigen_moduli, generator_growth, mat_pow, matrix_lattice,
    matrix_lattice_bruteforce, screen_roots_of_unity, to_imat, GrowthReport, IMat, LatticeCheck, MatrixLattice,
};
pub use poly::Poly;

use std::collections::BTreeSet;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{Signed, ToPrimitive, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exact::mersenne;

fn ser_bigint<S: serde::Serializer>(v: &BigInt, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&v.to_string())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GcdCheck {
    pub a: i64,
    pub m: u64,
    pub n: u64,
    #[serde(serialize_with = "ser_bigint")]
    pub gcd: BigInt,
    #[serde(serialize_with = "ser_bigint")]
    pub predicted: BigInt,
    pub holds: bool,
}

/// `gcd(aᵐ − 1, aⁿ − 1)` by big-integer gcd, compared with `a^{gcd(m,n)} − 1`.
pub fn gcd_mersenne(a: i64, m: u64, n: u64) -> Result<GcdCheck> {
    if a < 2 {
        return Err(Error::param("a", format!("must be at least 2, got {a}")));
    }
    if m == 0 || n == 0 {
        return Err(Error::param("m, n", "must be positive"));
    }
    let gcd = mersenne(a, m).gcd(&mersenne(a, n));
    let predicted = mersenne(a, m.gcd(&n));
    Ok(GcdCheck {
        a,
        m,
        n,
        holds: gcd == predicted,
        gcd,
        predicted,
    })
}

/// Every `(m, n)` in `[1, max]²` for one `a`.
pub fn gcd_sweep(a: i64, max: u64) -> Result<Vec<GcdCheck>> {
    let mut out = Vec::new();
    for m in 1..=max {
        for n in 1..=max {
            out.push(gcd_mersenne(a, m, n)?);
        }
    }
    Ok(out)
}

/// Solutions of `k(aᵐ − 1) + l(aⁿ − 1) = 0` are `j · (k₀, l₀)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScalarLattice {
    pub a: i64,
    pub m: u64,
    pub n: u64,
    pub p: u64,
    #[serde(serialize_with = "ser_bigint")]
    pub k0: BigInt,
    #[serde(serialize_with = "ser_bigint")]
    pub l0: BigInt,
}

impl ScalarLattice {
    /// `k₀(aᵐ − 1) + l₀(aⁿ − 1) = 0`.
    pub fn verify(&self) -> bool {
        (&self.k0 * mersenne(self.a, self.m) + &self.l0 * mersenne(self.a, self.n)).is_zero()
    }
}

pub fn scalar_lattice(a: i64, m: u64, n: u64) -> Result<ScalarLattice> {
    if a.unsigned_abs() < 2 {
        return Err(Error::param("a", format!("|a| must be at least 2, got {a}")));
    }
    if m == 0 || n == 0 {
        return Err(Error::param("m, n", "must be positive"));
    }
    let (am, an) = (mersenne(a, m), mersenne(a, n));
    let g = am.gcd(&an);
    let (mut k0, mut l0) = (&an / &g, -(&am / &g));
    if k0.is_negative() {
        k0 = -k0;
        l0 = -l0;
    }
    Ok(ScalarLattice {
        a,
        m,
        n,
        p: m.gcd(&n),
        k0,
        l0,
    })
}

/// All `(k, l)` with `|k|, |l| ≤ bound` solving the equation, by exhaustive search.
pub fn scalar_lattice_bruteforce(a: i64, m: u64, n: u64, bound: i64) -> Result<Vec<(i64, i64)>> {
    let pairs = (2 * bound as i128 + 1).pow(2);
    if bound < 0 || pairs > 1_000_000 {
        return Err(Error::param(
            "bound",
            format!("{pairs} pairs exceeds the 10^6 enumeration limit"),
        ));
    }
    let overflow = || Error::Overflow(format!("{a}^max({m},{n}) in brute-force lattice"));
    let am = mersenne(a, m).to_i128().ok_or_else(overflow)?;
    let an = mersenne(a, n).to_i128().ok_or_else(overflow)?;
    if am
        .unsigned_abs()
        .checked_mul(bound as u128)
        .is_none_or(|v| v > i128::MAX as u128 / 2)
        || an
            .unsigned_abs()
            .checked_mul(bound as u128)
            .is_none_or(|v| v > i128::MAX as u128 / 2)
    {
        return Err(overflow());
    }
    let mut out = Vec::new();
    for k in -bound..=bound {
        for l in -bound..=bound {
            if k as i128 * am + l as i128 * an == 0 {
                out.push((k, l));
            }
        }
    }
    Ok(out)
}

/// Both inclusions between brute force and `{j(k₀, l₀)}` inside the box.
pub fn check_scalar_lattice(lat: &ScalarLattice, bound: i64) -> Result<matrix::LatticeCheck> {
    let oracle = scalar_lattice_bruteforce(lat.a, lat.m, lat.n, bound)?;
    let k0 = lat.k0.to_i64().ok_or_else(|| Error::Overflow("k0".into()))?;
    let l0 = lat.l0.to_i64().ok_or_else(|| Error::Overflow("l0".into()))?;
    let generated: BTreeSet<(i64, i64)> = (-bound..=bound)
        .map(|j| (j * k0, j * l0))
        .filter(|&(k, l)| k.abs() <= bound && l.abs() <= bound)
        .collect();
    let oracle_set: BTreeSet<(i64, i64)> = oracle.iter().copied().collect();
    Ok(matrix::LatticeCheck {
        box_radius: bound,
        oracle_count: oracle_set.len(),
        generated_count: generated.len(),
        oracle_in_generated: oracle_set.is_subset(&generated),
        generated_in_oracle: generated.is_subset(&oracle_set),
    })
}

/// `u, v` with `u·S_m + v·S_n = 1`, `S_k = 1 + x + … + x^{k−1}`, by the
/// Euclidean descent `(m, n) → (m − n, n)`.
pub fn bezout_polynomials(m: u64, n: u64) -> Result<(Poly, Poly)> {
    if m == 0 || n == 0 {
        return Err(Error::param("m, n", "must be positive"));
    }
    if m.gcd(&n) != 1 {
        return Err(Error::param("m, n", format!("gcd({m}, {n}) ≠ 1")));
    }
    Ok(descend(m, n))
}

fn descend(m: u64, n: u64) -> (Poly, Poly) {
    if m == 1 {
        return (Poly::one(), Poly::zero());
    }
    if n == 1 {
        return (Poly::zero(), Poly::one());
    }
    if m > n {
        // S_{m−n} = S_m − x^{m−n} S_n
        let (u, v) = descend(m - n, n);
        let v = &v - &u.shift((m - n) as usize);
        (u, v)
    } else {
        // S_{n−m} = S_n − x^{n−m} S_m
        let (u, v) = descend(m, n - m);
        let u = &u - &v.shift((n - m) as usize);
        (u, v)
    }
}

/// `u·S_m + v·S_n`, expanded.
pub fn bezout_expand(m: u64, n: u64, u: &Poly, v: &Poly) -> Poly {
    &(u * &Poly::geometric(m as usize)) + &(v * &Poly::geometric(n as usize))
}
