use std::collections::{BTreeSet, HashMap};

use nalgebra::{DMatrix, DVector};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::poly::Poly;
use crate::error::{Error, Result};

pub type IMat = DMatrix<BigInt>;

pub fn to_imat(rows: &[Vec<i64>]) -> Result<IMat> {
    let d = rows.len();
    if d == 0 || rows.iter().any(|r| r.len() != d) {
        return Err(Error::param("matrix", "must be square and non-empty"));
    }
    Ok(DMatrix::from_fn(d, d, |i, j| BigInt::from(rows[i][j])))
}

pub fn mat_pow(b: &IMat, k: u64) -> IMat {
    let d = b.nrows();
    let mut out = IMat::identity(d, d);
    let mut base = b.clone();
    let mut e = k;
    while e > 0 {
        if e & 1 == 1 {
            out = &out * &base;
        }
        e >>= 1;
        if e > 0 {
            base = &base * &base;
        }
    }
    out
}

/// Determinant by Bareiss fraction-free elimination.
pub fn det(m: &IMat) -> BigInt {
    let n = m.nrows();
    let mut a = m.clone();
    let mut sign = BigInt::one();
    let mut prev = BigInt::one();
    for k in 0..n {
        if a[(k, k)].is_zero() {
            match (k + 1..n).find(|&i| !a[(i, k)].is_zero()) {
                Some(i) => {
                    a.swap_rows(i, k);
                    sign = -sign;
                }
                None => return BigInt::zero(),
            }
        }
        for i in k + 1..n {
            for j in k + 1..n {
                a[(i, j)] = (&a[(i, j)] * &a[(k, k)] - &a[(i, k)] * &a[(k, j)]) / &prev;
            }
        }
        prev = a[(k, k)].clone();
    }
    sign * &a[(n - 1, n - 1)]
}

/// Characteristic polynomial `det(xI − B)` by Faddeev–LeVerrier.
pub fn char_poly(b: &IMat) -> Poly {
    let n = b.nrows();
    let mut c = vec![BigInt::zero(); n + 1];
    c[n] = BigInt::one();
    let mut m = IMat::zeros(n, n);
    for k in 1..=n {
        m = b * &m;
        for i in 0..n {
            m[(i, i)] += &c[n - k + 1];
        }
        let am = b * &m;
        let tr: BigInt = (0..n).map(|i| am[(i, i)].clone()).sum();
        c[n - k] = -tr / BigInt::from(k);
    }
    Poly::new(c)
}

fn euler_phi(mut k: u64) -> u64 {
    let mut result = k;
    let mut p = 2;
    while p * p <= k {
        if k % p == 0 {
            while k % p == 0 {
                k /= p;
            }
            result -= result / p;
        }
        p += 1;
    }
    if k > 1 {
        result -= result / k;
    }
    result
}

/// Rejects matrices with an eigenvalue that is a root of unity. Checks
/// `det(B^q − I) ≠ 0` for `q ≤ 2d²` and that no cyclotomic `Φ_k` of
/// degree `≤ d` divides the characteristic polynomial.
pub fn screen_roots_of_unity(b: &IMat) -> Result<()> {
    let d = b.nrows() as u64;
    let bound = 2 * d * d;
    let id = IMat::identity(b.nrows(), b.nrows());
    let mut pw = id.clone();
    for q in 1..=bound {
        pw = &pw * b;
        if det(&(&pw - &id)).is_zero() {
            return Err(Error::RootOfUnity { order: q });
        }
    }
    let cp = char_poly(b);
    // φ(k) ≥ √(k/2), so every k with φ(k) ≤ d is at most 2d².
    for k in 1..=bound.max(2) {
        if euler_phi(k) <= d {
            let (_, r) = cp.div_rem_monic(&Poly::cyclotomic(k as usize));
            if r.is_zero() {
                return Err(Error::RootOfUnity { order: k });
            }
        }
    }
    Ok(())
}

/// `I + B^p + B^{2p} + … + B^{top}`.
fn geometric_sum(b: &IMat, p: u64, top: u64) -> IMat {
    let d = b.nrows();
    let bp = mat_pow(b, p);
    let mut term = IMat::identity(d, d);
    let mut acc = term.clone();
    let mut e = 0;
    while e + p <= top {
        term = &term * &bp;
        acc += &term;
        e += p;
    }
    acc
}

fn imat_rows(m: &IMat) -> Vec<Vec<String>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)].to_string()).collect())
        .collect()
}

fn ser_imat<S: serde::Serializer>(m: &IMat, s: S) -> std::result::Result<S::Ok, S::Error> {
    serde::Serialize::serialize(&imat_rows(m), s)
}

/// Generators of `{(k, l) : (Bᵐ − I)k = (Bⁿ − I)l}`: `k = K j`, `l = L j`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MatrixLattice {
    pub matrix: Vec<Vec<i64>>,
    pub m: u64,
    pub n: u64,
    pub p: u64,
    #[serde(serialize_with = "ser_imat")]
    pub k_gen: IMat,
    #[serde(serialize_with = "ser_imat")]
    pub l_gen: IMat,
    pub identity_holds: bool,
}

pub fn matrix_lattice(rows: &[Vec<i64>], m: u64, n: u64) -> Result<MatrixLattice> {
    if m == 0 || n == 0 {
        return Err(Error::param("m, n", "must be positive"));
    }
    let b = to_imat(rows)?;
    screen_roots_of_unity(&b)?;
    let p = num_integer::gcd(m, n);
    let k_gen = geometric_sum(&b, p, n - p);
    let l_gen = geometric_sum(&b, p, m - p);
    let id = IMat::identity(b.nrows(), b.nrows());
    let lhs = (mat_pow(&b, m) - &id) * &k_gen;
    let rhs = (mat_pow(&b, n) - &id) * &l_gen;
    Ok(MatrixLattice {
        matrix: rows.to_vec(),
        m,
        n,
        p,
        identity_holds: lhs == rhs,
        k_gen,
        l_gen,
    })
}

fn box_vectors(d: usize, r: i64) -> Vec<Vec<i64>> {
    let side = (2 * r + 1) as usize;
    let total = side.pow(d as u32);
    (0..total)
        .map(|mut idx| {
            (0..d)
                .map(|_| {
                    let c = (idx % side) as i64 - r;
                    idx /= side;
                    c
                })
                .collect()
        })
        .collect()
}

fn apply(m: &IMat, v: &[i64]) -> Vec<BigInt> {
    let v = DVector::from_iterator(v.len(), v.iter().map(|&x| BigInt::from(x)));
    (m * v).iter().cloned().collect()
}

/// Every `(k, l)` with entries in `[−r, r]` solving `(Bᵐ − I)k = (Bⁿ − I)l`.
pub fn matrix_lattice_bruteforce(rows: &[Vec<i64>], m: u64, n: u64, r: i64) -> Result<Vec<(Vec<i64>, Vec<i64>)>> {
    let b = to_imat(rows)?;
    let d = b.nrows();
    let count = ((2 * r + 1) as f64).powi(d as i32);
    if r < 0 || count > 1e6 {
        return Err(Error::param(
            "box",
            format!("{count} vectors exceeds the 10^6 enumeration limit"),
        ));
    }
    let id = IMat::identity(d, d);
    let am = mat_pow(&b, m) - &id;
    let an = mat_pow(&b, n) - &id;
    let vs = box_vectors(d, r);
    let mut by_image: HashMap<Vec<BigInt>, Vec<usize>> = HashMap::new();
    for (i, l) in vs.iter().enumerate() {
        by_image.entry(apply(&an, l)).or_default().push(i);
    }
    let mut out = Vec::new();
    for k in &vs {
        if let Some(ls) = by_image.get(&apply(&am, k)) {
            for &i in ls {
                out.push((k.clone(), vs[i].clone()));
            }
        }
    }
    out.sort();
    Ok(out)
}

/// Exact solution of `M x = rhs` over ℚ, when unique.
fn solve_exact(m: &IMat, rhs: &[BigInt]) -> Option<Vec<BigRational>> {
    let n = m.nrows();
    let mut a: Vec<Vec<BigRational>> = (0..n)
        .map(|i| {
            let mut row: Vec<BigRational> = (0..n).map(|j| BigRational::from_integer(m[(i, j)].clone())).collect();
            row.push(BigRational::from_integer(rhs[i].clone()));
            row
        })
        .collect();
    for c in 0..n {
        let piv = (c..n).find(|&i| !a[i][c].is_zero())?;
        a.swap(piv, c);
        let pv = a[c][c].clone();
        for v in a[c].iter_mut() {
            *v /= &pv;
        }
        for i in 0..n {
            if i != c && !a[i][c].is_zero() {
                let f = a[i][c].clone();
                let pivot_row = a[c].clone();
                for (x, y) in a[i].iter_mut().zip(pivot_row.iter()) {
                    *x -= &f * y;
                }
            }
        }
    }
    Some(a.into_iter().map(|row| row[n].clone()).collect())
}

/// Both inclusions between the oracle and the generated lattice in a box.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LatticeCheck {
    pub box_radius: i64,
    pub oracle_count: usize,
    pub generated_count: usize,
    pub oracle_in_generated: bool,
    pub generated_in_oracle: bool,
}

impl LatticeCheck {
    pub fn complete(&self) -> bool {
        self.oracle_in_generated && self.generated_in_oracle
    }
}

pub fn check_matrix_lattice(lat: &MatrixLattice, r: i64) -> Result<LatticeCheck> {
    let oracle = matrix_lattice_bruteforce(&lat.matrix, lat.m, lat.n, r)?;
    let d = lat.matrix.len();
    let oracle_in_generated = oracle.iter().all(|(k, l)| {
        let kb: Vec<BigInt> = k.iter().map(|&x| BigInt::from(x)).collect();
        match solve_exact(&lat.k_gen, &kb) {
            Some(j) if j.iter().all(|x| x.is_integer()) => {
                let j: Vec<i64> = j.iter().map(|x| x.to_integer().to_i64().unwrap_or(i64::MAX)).collect();
                apply(&lat.l_gen, &j) == l.iter().map(|&x| BigInt::from(x)).collect::<Vec<_>>()
            }
            _ => false,
        }
    });
    // Every j with K j in the box satisfies |j|∞ ≤ ‖K⁻¹‖∞ r.
    let kf = DMatrix::from_fn(d, d, |i, j| lat.k_gen[(i, j)].to_f64().unwrap_or(f64::INFINITY));
    let inv = kf
        .try_inverse()
        .ok_or_else(|| Error::param("matrix", "K generator is singular"))?;
    let norm = (0..d)
        .map(|i| (0..d).map(|j| inv[(i, j)].abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let rj = (norm * r as f64 + 1e-9).ceil() as i64;
    let oracle_set: BTreeSet<(Vec<i64>, Vec<i64>)> = oracle.iter().cloned().collect();
    let in_box = |v: &[BigInt]| v.iter().all(|x| x.abs() <= BigInt::from(r));
    let mut generated = 0;
    let mut generated_in_oracle = true;
    for j in box_vectors(d, rj) {
        let k = apply(&lat.k_gen, &j);
        let l = apply(&lat.l_gen, &j);
        if in_box(&k) && in_box(&l) {
            generated += 1;
            let key = (
                k.iter().map(|x| x.to_i64().expect("in box")).collect(),
                l.iter().map(|x| x.to_i64().expect("in box")).collect(),
            );
            if !oracle_set.contains(&key) {
                generated_in_oracle = false;
            }
        }
    }
    Ok(LatticeCheck {
        box_radius: r,
        oracle_count: oracle.len(),
        generated_count: generated,
        oracle_in_generated,
        generated_in_oracle,
    })
}

/// Empirical lower growth of `‖K j‖ / ‖j‖`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GrowthReport {
    pub n: u64,
    pub p: u64,
    pub samples: usize,
    pub min_ratio: f64,
    /// Smallest eigenvalue modulus of `B`.
    pub lambda: f64,
    /// `min_ratio / λ^{n−p}`.
    pub fitted_c: f64,
    /// Every eigenvalue lies strictly outside the unit circle.
    pub all_expanding: bool,
}

pub fn eigen_moduli(rows: &[Vec<i64>]) -> Result<Vec<f64>> {
    let d = rows.len();
    to_imat(rows)?;
    let f = DMatrix::from_fn(d, d, |i, j| rows[i][j] as f64);
    let ev = f.complex_eigenvalues();
    let mut out: Vec<f64> = ev.iter().map(|z| z.norm()).collect();
    out.sort_by(|a, b| a.total_cmp(b));
    Ok(out)
}

pub fn generator_growth(rows: &[Vec<i64>], n: u64, p: u64, samples: usize, seed: u64) -> Result<GrowthReport> {
    if p == 0 || n < p || n % p != 0 {
        return Err(Error::param("p", "need p ≥ 1 dividing n"));
    }
    if samples == 0 {
        return Err(Error::param("samples", "must be positive"));
    }
    let moduli = eigen_moduli(rows)?;
    if let Some(&bad) = moduli.iter().find(|&&m| (m - 1.0).abs() < 1e-9) {
        return Err(Error::NotExpanding { modulus: bad });
    }
    let b = to_imat(rows)?;
    let k = geometric_sum(&b, p, n - p);
    let d = rows.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut min_ratio = f64::INFINITY;
    let mut drawn = 0;
    while drawn < samples {
        let j: Vec<i64> = (0..d).map(|_| rng.random_range(-20..=20)).collect();
        if j.iter().all(|&x| x == 0) {
            continue;
        }
        drawn += 1;
        let kj = apply(&k, &j);
        let num = kj
            .iter()
            .map(|x| x.to_f64().unwrap_or(f64::INFINITY).powi(2))
            .sum::<f64>()
            .sqrt();
        let den = j.iter().map(|&x| (x as f64).powi(2)).sum::<f64>().sqrt();
        min_ratio = min_ratio.min(num / den);
    }
    let lambda = moduli[0];
    Ok(GrowthReport {
        n,
        p,
        samples,
        min_ratio,
        lambda,
        fitted_c: min_ratio / lambda.powi((n - p) as i32),
        all_expanding: lambda > 1.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fib() -> Vec<Vec<i64>> {
        vec![vec![1, 1], vec![1, 0]]
    }

    #[test]
    fn char_poly_and_det() {
        let b = to_imat(&fib()).unwrap();
        assert_eq!(char_poly(&b), Poly::from_i64(&[-1, -1, 1]));
        assert_eq!(det(&b), BigInt::from(-1));
        let c = to_imat(&[vec![2, 0, 1], vec![1, 3, 2], vec![1, 1, 2]]).unwrap();
        assert_eq!(det(&c), BigInt::from(6));
        assert_eq!(char_poly(&c).eval(&BigInt::zero()), -BigInt::from(6));
    }

    #[test]
    fn screening() {
        assert!(screen_roots_of_unity(&to_imat(&fib()).unwrap()).is_ok());
        let rot = to_imat(&[vec![0, -1], vec![1, 0]]).unwrap();
        assert_eq!(screen_roots_of_unity(&rot), Err(Error::RootOfUnity { order: 4 }));
        let shear = to_imat(&[vec![1, 1], vec![0, 1]]).unwrap();
        assert_eq!(screen_roots_of_unity(&shear), Err(Error::RootOfUnity { order: 1 }));
        let order3 = to_imat(&[vec![0, -1], vec![1, -1]]).unwrap();
        assert_eq!(screen_roots_of_unity(&order3), Err(Error::RootOfUnity { order: 3 }));
    }

    #[test]
    fn fibonacci_telescoping() {
        let lat = matrix_lattice(&fib(), 2, 1).unwrap();
        assert!(lat.identity_holds);
        let b = to_imat(&fib()).unwrap();
        assert_eq!(lat.k_gen, IMat::identity(2, 2));
        assert_eq!(lat.l_gen, IMat::identity(2, 2) + b);
    }

    #[test]
    fn fibonacci_box_check() {
        let lat = matrix_lattice(&fib(), 3, 2).unwrap();
        let c = check_matrix_lattice(&lat, 5).unwrap();
        assert!(c.complete(), "{c:?}");
        assert!(c.oracle_count >= 1);
    }

    #[test]
    fn growth_scalar() {
        let g = generator_growth(&[vec![2]], 3, 1, 50, 1).unwrap();
        assert_eq!(g.min_ratio, 7.0);
        assert!(g.min_ratio >= 4.0);
        let cat = vec![vec![2, 1], vec![1, 1]];
        let g4 = generator_growth(&cat, 4, 1, 1000, 9).unwrap();
        let g6 = generator_growth(&cat, 6, 1, 1000, 9).unwrap();
        assert!(g4.min_ratio > 0.0);
        assert!(g6.min_ratio > g4.min_ratio);
        assert!(!g4.all_expanding);
        assert!(generator_growth(&[vec![1, 1], vec![0, 1]], 3, 1, 10, 1).is_err());
    }
}
