//! Ulam discretisation of the transfer operator of an expanding interval map:
//! invariant density, second eigenvalue, correlation decay and the
//! Borel–Cantelli series for balls.

mod decay;
mod series;

pub use decay::{correlation_decay_fit, triple_correlation, DecayFit, TestFamily};
pub use series::{ball_measure_series, SeriesReport, SeriesVerdict};

use std::ops::{Add, Div, Mul, Sub};

use nalgebra::DMatrix;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive};
use rayon::prelude::*;
use serde::Serialize;

use crate::circle::rational_to_f64;
use crate::dynamics::{Metric, PiecewiseLinearMap, Real, SystemSpec};
use crate::error::{Error, Result};

pub const DENSITY_TOLERANCE: f64 = 1e-10;
pub const MAX_ITERATIONS: usize = 100_000;
const PAR_CHUNK: usize = 2048;

/// Row-stochastic `P_{ij} = m(B_i ∩ T^{−1}B_j) / m(B_i)` in CSR form, with its
/// transpose kept for deterministic left products.
#[derive(Clone, Debug)]
pub struct UlamOperator {
    pub bins: usize,
    pub metric: Metric,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
    t_ptr: Vec<usize>,
    t_cols: Vec<usize>,
    t_vals: Vec<f64>,
    /// Bin densities `h_i`, `Σ h_i / N = 1`.
    pub density: Vec<f64>,
    /// `‖hP − h‖₁ / N` at the last power iteration.
    pub density_residual: f64,
    pub density_iterations: usize,
    pub second: SecondEigenvalue,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SecondEigenvalue {
    pub modulus: f64,
    pub converged: bool,
    pub iterations: usize,
}

impl UlamOperator {
    pub fn gap(&self) -> f64 {
        1.0 - self.second.modulus
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[r.clone()].iter().copied().zip(self.vals[r].iter().copied())
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn max_row_defect(&self) -> f64 {
        (0..self.bins)
            .map(|i| (self.row(i).map(|(_, v)| v).sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// `w ↦ wP`.
    pub fn left_mul(&self, w: &[f64]) -> Vec<f64> {
        (0..self.bins)
            .into_par_iter()
            .with_min_len(PAR_CHUNK)
            .map(|j| {
                let r = self.t_ptr[j]..self.t_ptr[j + 1];
                self.t_cols[r.clone()]
                    .iter()
                    .zip(&self.t_vals[r])
                    .map(|(&i, &v)| w[i] * v)
                    .sum()
            })
            .collect()
    }

    /// `f ↦ Pf`, the conditional expectation of `f ∘ T` on bins.
    pub fn right_mul(&self, f: &[f64]) -> Vec<f64> {
        (0..self.bins)
            .into_par_iter()
            .with_min_len(PAR_CHUNK)
            .map(|i| self.row(i).map(|(j, v)| v * f[j]).sum())
            .collect()
    }

    /// Invariant probabilities of the bins, `π_i = h_i / N`.
    pub fn stationary(&self) -> Vec<f64> {
        self.density.iter().map(|h| h / self.bins as f64).collect()
    }

    pub fn density_at(&self, x: f64) -> f64 {
        let i = ((x * self.bins as f64) as usize).min(self.bins - 1);
        self.density[i]
    }

    /// `(c_lower, c_upper, c)` over bins carrying mass.
    pub fn density_bounds(&self) -> Result<DensityBounds> {
        if self.density_residual > DENSITY_TOLERANCE {
            return Err(Error::NotConverged {
                residual: self.density_residual,
                tolerance: DENSITY_TOLERANCE,
            });
        }
        let max = self.density.iter().copied().fold(0.0, f64::max);
        let support = self.density.iter().filter(|&&h| h > 1e-12 * max);
        let lower = support.clone().copied().fold(f64::INFINITY, f64::min);
        Ok(DensityBounds {
            lower,
            upper: max,
            c: max.max(1.0 / lower).max(1.0),
            support_bins: support.count(),
        })
    }

    pub fn matrix_csv(&self) -> String {
        let mut s = String::from("i,j,p\n");
        for i in 0..self.bins {
            for (j, v) in self.row(i) {
                s.push_str(&format!("{i},{j},{v}\n"));
            }
        }
        s
    }

    pub fn density_csv(&self) -> String {
        let n = self.bins as f64;
        let mut s = String::from("bin,left,right,density\n");
        for (i, h) in self.density.iter().enumerate() {
            s.push_str(&format!("{i},{},{},{h}\n", i as f64 / n, (i + 1) as f64 / n));
        }
        s
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DensityBounds {
    pub lower: f64,
    pub upper: f64,
    pub c: f64,
    pub support_bins: usize,
}

/// Scalar arithmetic used for the preimage geometry: exact rationals or `f64`.
trait Geometry:
    Clone + PartialOrd + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Div<Output = Self>
{
    fn int(v: i64) -> Self;
    fn floor_i64(&self) -> i64;
    fn ceil_i64(&self) -> i64;
    fn abs_val(&self) -> Self;
    fn as_f64(&self) -> f64;
}

impl Geometry for BigRational {
    fn int(v: i64) -> Self {
        BigRational::from_integer(v.into())
    }
    fn floor_i64(&self) -> i64 {
        self.floor().to_integer().to_i64().expect("bin index")
    }
    fn ceil_i64(&self) -> i64 {
        self.ceil().to_integer().to_i64().expect("bin index")
    }
    fn abs_val(&self) -> Self {
        self.abs()
    }
    fn as_f64(&self) -> f64 {
        rational_to_f64(self)
    }
}

impl Geometry for f64 {
    fn int(v: i64) -> Self {
        v as f64
    }
    fn floor_i64(&self) -> i64 {
        self.floor() as i64
    }
    fn ceil_i64(&self) -> i64 {
        self.ceil() as i64
    }
    fn abs_val(&self) -> Self {
        self.abs()
    }
    fn as_f64(&self) -> f64 {
        *self
    }
}

/// `(left, right, slope, intercept)`.
type AffinePiece<T> = (T, T, T, T);

fn row_entries<T: Geometry>(pieces: &[AffinePiece<T>], i: usize, n: usize) -> Vec<(usize, f64)> {
    let nn = T::int(n as i64);
    let a = T::int(i as i64) / nn.clone();
    let b = T::int(i as i64 + 1) / nn.clone();
    let mut out: Vec<(usize, T)> = Vec::new();
    for (l, r, s, c) in pieces {
        let lo = if *l > a { l.clone() } else { a.clone() };
        let hi = if *r < b { r.clone() } else { b.clone() };
        if lo >= hi {
            continue;
        }
        let (mut y0, mut y1) = (s.clone() * lo + c.clone(), s.clone() * hi + c.clone());
        if y0 > y1 {
            std::mem::swap(&mut y0, &mut y1);
        }
        let scale = nn.clone() / s.abs_val();
        let j0 = (y0.clone() * nn.clone()).floor_i64().max(0);
        let j1 = (y1.clone() * nn.clone()).ceil_i64().min(n as i64);
        for j in j0..j1 {
            let bl = T::int(j) / nn.clone();
            let br = T::int(j + 1) / nn.clone();
            let ol = if bl > y0 { bl } else { y0.clone() };
            let or = if br < y1 { br } else { y1.clone() };
            if ol < or {
                let p = (or - ol) * scale.clone();
                match out.iter_mut().find(|e| e.0 == j as usize) {
                    Some(e) => e.1 = e.1.clone() + p,
                    None => out.push((j as usize, p)),
                }
            }
        }
    }
    out.sort_by_key(|e| e.0);
    out.into_iter().map(|(j, p)| (j, p.as_f64())).collect()
}

fn rational_pieces(m: &PiecewiseLinearMap) -> Vec<AffinePiece<BigRational>> {
    m.branches()
        .iter()
        .map(|b| (b.left.clone(), b.right.clone(), b.slope.clone(), b.intercept.clone()))
        .collect()
}

fn beta_pieces_f64(beta: f64) -> Vec<AffinePiece<f64>> {
    let k_max = beta.ceil() as i64;
    (0..k_max)
        .map(|k| (k as f64 / beta, ((k + 1) as f64 / beta).min(1.0), beta, -(k as f64)))
        .filter(|p| p.0 < 1.0)
        .collect()
}

fn beta_pieces_exact(beta: &BigRational) -> Vec<AffinePiece<BigRational>> {
    let one = BigRational::from_integer(1.into());
    let k_max = beta.ceil().to_integer().to_i64().expect("small beta");
    (0..k_max)
        .map(|k| {
            let kq = BigRational::from_integer(k.into());
            let l = &kq / beta;
            let r = ((&kq + &one) / beta).min(one.clone());
            (l, r, beta.clone(), -kq)
        })
        .filter(|p| p.0 < one)
        .collect()
}

/// Builds the Ulam matrix with `n` equal bins and solves for its density and
/// second eigenvalue.
pub fn build_ulam(sys: &SystemSpec, n: usize) -> Result<UlamOperator> {
    let mut op = assemble(sys, n)?;
    op.second = second_eigenvalue(&op);
    Ok(op)
}

/// Matrix and invariant density only.
fn assemble(sys: &SystemSpec, n: usize) -> Result<UlamOperator> {
    if n < 2 {
        return Err(Error::param("bins", format!("need at least 2, got {n}")));
    }
    let rows: Vec<Vec<(usize, f64)>> = match sys {
        SystemSpec::IntegerCircleMap { a } => {
            let p = rational_pieces(&PiecewiseLinearMap::from_integer_map(*a)?);
            (0..n).into_par_iter().map(|i| row_entries(&p, i, n)).collect()
        }
        SystemSpec::PiecewiseLinear(m) => {
            let p = rational_pieces(m);
            (0..n).into_par_iter().map(|i| row_entries(&p, i, n)).collect()
        }
        SystemSpec::BetaMap {
            beta: Real::Rational(q),
        } => {
            let p = beta_pieces_exact(q);
            (0..n).into_par_iter().map(|i| row_entries(&p, i, n)).collect()
        }
        SystemSpec::BetaMap { beta } => {
            let p = beta_pieces_f64(beta.to_f64());
            (0..n).into_par_iter().map(|i| row_entries(&p, i, n)).collect()
        }
        SystemSpec::Rotation { .. } => {
            return Err(Error::NonExpanding {
                index: 0,
                slope: "1".into(),
            })
        }
        SystemSpec::ToralLinear { .. } => {
            return Err(Error::Unsupported {
                system: sys.to_string(),
                operation: "Ulam discretisation (interval systems only)".into(),
            })
        }
    };
    let mut op = from_rows(rows, n, sys.metric());
    solve_density(&mut op);
    Ok(op)
}

fn from_rows(rows: Vec<Vec<(usize, f64)>>, n: usize, metric: Metric) -> UlamOperator {
    let mut row_ptr = vec![0];
    let mut cols = Vec::new();
    let mut vals = Vec::new();
    let mut counts = vec![0usize; n];
    for r in &rows {
        for &(j, v) in r {
            cols.push(j);
            vals.push(v);
            counts[j] += 1;
        }
        row_ptr.push(cols.len());
    }
    let mut t_ptr = vec![0usize; n + 1];
    for j in 0..n {
        t_ptr[j + 1] = t_ptr[j] + counts[j];
    }
    let mut fill = t_ptr.clone();
    let mut t_cols = vec![0usize; cols.len()];
    let mut t_vals = vec![0f64; cols.len()];
    for (i, r) in rows.iter().enumerate() {
        for &(j, v) in r {
            t_cols[fill[j]] = i;
            t_vals[fill[j]] = v;
            fill[j] += 1;
        }
    }
    UlamOperator {
        bins: n,
        metric,
        row_ptr,
        cols,
        vals,
        t_ptr,
        t_cols,
        t_vals,
        density: vec![1.0; n],
        density_residual: f64::INFINITY,
        density_iterations: 0,
        second: SecondEigenvalue {
            modulus: f64::NAN,
            converged: false,
            iterations: 0,
        },
    }
}

fn solve_density(op: &mut UlamOperator) {
    let n = op.bins;
    let mut pi = vec![1.0 / n as f64; n];
    for it in 1..=MAX_ITERATIONS {
        let mut next = op.left_mul(&pi);
        let total: f64 = next.iter().sum();
        next.iter_mut().for_each(|v| *v /= total);
        let residual: f64 = next.iter().zip(&pi).map(|(a, b)| (a - b).abs()).sum();
        pi = next;
        op.density_iterations = it;
        op.density_residual = residual;
        if residual <= DENSITY_TOLERANCE * 1e-2 {
            break;
        }
    }
    op.density = pi.iter().map(|p| p * n as f64).collect();
}

/// Subspace iteration on `{w : Σ w_i = 0}`, which `P` preserves; the largest
/// Ritz value modulus estimates `|λ₂|`, complex pairs included. Directions
/// that `P` annihilates are dropped, so nilpotent restrictions report 0. When
/// many eigenvalues share the top modulus the Ritz values never settle; the
/// growth rate of the leading vector over the second half is reported instead.
fn second_eigenvalue(op: &UlamOperator) -> SecondEigenvalue {
    const BLOCK: usize = 6;
    let n = op.bins;
    let k = BLOCK.min(n - 1);
    let mut q: Vec<Vec<f64>> = (0..k)
        .map(|j| {
            let phase = 0.618_033_988_749_895 * (j as f64 + 1.0);
            (0..n)
                .map(|i| ((i as f64 + 1.0) * phase + 0.5 * j as f64).sin())
                .collect()
        })
        .collect();
    orthonormalise(&mut q);
    let mut prev = f64::NAN;
    let mut growth = Vec::new();
    for it in 1..=MAX_ITERATIONS {
        if q.is_empty() {
            return SecondEigenvalue {
                modulus: 0.0,
                converged: true,
                iterations: it,
            };
        }
        let z: Vec<Vec<f64>> = q.iter().map(|w| op.left_mul(w)).collect();
        let m = q.len();
        let h = DMatrix::from_fn(m, m, |a, b| dot(&q[a], &z[b]));
        let est = h.complex_eigenvalues().iter().map(|c| c.norm()).fold(0.0, f64::max);
        if (est - prev).abs() <= 1e-10 {
            return SecondEigenvalue {
                modulus: est,
                converged: true,
                iterations: it,
            };
        }
        prev = est;
        growth.push(dot(&z[0], &z[0]).sqrt().ln());
        q = z;
        orthonormalise(&mut q);
    }
    let tail = &growth[growth.len() / 2..];
    SecondEigenvalue {
        modulus: (tail.iter().sum::<f64>() / tail.len() as f64).exp(),
        converged: false,
        iterations: MAX_ITERATIONS,
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Modified Gram–Schmidt inside the mean-zero subspace. Inputs have norm at
/// most about 1, so a residual below `10⁻¹²` means the direction collapsed.
fn orthonormalise(q: &mut Vec<Vec<f64>>) {
    let n = q.first().map_or(1, |v| v.len()) as f64;
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(q.len());
    for mut v in q.drain(..) {
        let mean = v.iter().sum::<f64>() / n;
        v.iter_mut().for_each(|x| *x -= mean);
        for u in &out {
            let c = dot(u, &v);
            v.iter_mut().zip(u).for_each(|(x, y)| *x -= c * y);
        }
        let norm = dot(&v, &v).sqrt();
        if norm > 1e-12 {
            v.iter_mut().for_each(|x| *x /= norm);
            out.push(v);
        }
    }
    *q = out;
}

/// `‖h_N − h_{2N}‖_{L¹}` between the piecewise-constant densities.
pub fn refinement_l1(sys: &SystemSpec, n: usize) -> Result<f64> {
    let a = assemble(sys, n)?;
    let b = assemble(sys, 2 * n)?;
    Ok((0..2 * n)
        .map(|j| (a.density[j / 2] - b.density[j]).abs() / (2 * n) as f64)
        .sum())
}

/// Closed-form Parry density of `β = (1+√5)/2`: `(a, b)` on `[0, 1/β)` and `[1/β, 1)`.
pub fn golden_parry_density() -> (f64, f64) {
    let beta = (1.0 + 5f64.sqrt()) / 2.0;
    let a = 1.0 / (2.0 / beta - 1.0 / (beta * beta));
    (a, a / beta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::Branch;
    use num_bigint::BigInt;
    use num_traits::Zero;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    // Oracle: bin masses from explicit preimage intervals.
    fn exact_row(sys: &SystemSpec, i: usize, n: usize) -> Result<Vec<(usize, BigRational)>> {
        let pieces = match sys {
            SystemSpec::IntegerCircleMap { a } => rational_pieces(&PiecewiseLinearMap::from_integer_map(*a)?),
            SystemSpec::PiecewiseLinear(m) => rational_pieces(m),
            _ => return Err(Error::param("sys", "exact rows need rational geometry")),
        };
        let nn = BigRational::from_integer(BigInt::from(n));
        let a = BigRational::from_integer(BigInt::from(i)) / &nn;
        let b = BigRational::from_integer(BigInt::from(i + 1)) / &nn;
        let mut out: Vec<(usize, BigRational)> = Vec::new();
        for j in 0..n {
            let bl = BigRational::from_integer(BigInt::from(j)) / &nn;
            let br = BigRational::from_integer(BigInt::from(j + 1)) / &nn;
            let mut mass = BigRational::zero();
            for (l, r, s, c) in &pieces {
                let lo = l.clone().max(a.clone());
                let hi = r.clone().min(b.clone());
                if lo >= hi {
                    continue;
                }
                // x ∈ [lo, hi) with s x + c ∈ [bl, br)
                let (mut u, mut v) = ((&bl - c) / s, (&br - c) / s);
                if u > v {
                    std::mem::swap(&mut u, &mut v);
                }
                let (p, q) = (u.max(lo), v.min(hi));
                if p < q {
                    mass += q - p;
                }
            }
            if !mass.is_zero() {
                out.push((j, mass * &nn));
            }
        }
        Ok(out)
    }

    #[test]
    fn doubling_two_bins() {
        let op = build_ulam(&SystemSpec::doubling(), 2).unwrap();
        assert_eq!(op.row(0).collect::<Vec<_>>(), vec![(0, 0.5), (1, 0.5)]);
        assert_eq!(op.row(1).collect::<Vec<_>>(), vec![(0, 0.5), (1, 0.5)]);
        assert_eq!(op.density, vec![1.0, 1.0]);
        assert_eq!(op.second.modulus, 0.0);
    }

    #[test]
    fn doubling_dyadic_density_exactly_uniform() {
        let op = build_ulam(&SystemSpec::doubling(), 1024).unwrap();
        assert!(op.density.iter().all(|&h| h == 1.0));
        assert_eq!(op.max_row_defect(), 0.0);
        // Rank-one after log₂N steps: the second eigenvalue vanishes.
        assert!(op.second.modulus < 1e-6, "{:?}", op.second);
        let b = op.density_bounds().unwrap();
        assert_eq!(b.c, 1.0);
    }

    #[test]
    fn doubling_non_dyadic_bins_see_half() {
        let op = build_ulam(&SystemSpec::doubling(), 100).unwrap();
        assert!(op.max_row_defect() < 1e-12);
        // 2 has order 20 mod 25: a large family of eigenvalues of modulus 1/2.
        assert!((op.second.modulus - 0.5).abs() < 0.01, "{:?}", op.second);
    }

    #[test]
    fn integer_maps_have_unit_c() {
        for a in [3i64, -2, -3] {
            let op = build_ulam(&SystemSpec::integer_map(a).unwrap(), 243).unwrap();
            assert!(op.max_row_defect() < 1e-12);
            let b = op.density_bounds().unwrap();
            assert!((b.c - 1.0).abs() < 1e-9, "a = {a}: {b:?}");
        }
    }

    #[test]
    fn rows_match_exact_geometry() {
        let m = PiecewiseLinearMap::new(
            vec![
                Branch {
                    left: q(0, 1),
                    right: q(1, 3),
                    slope: q(3, 1),
                    intercept: q(0, 1),
                },
                Branch {
                    left: q(1, 3),
                    right: q(1, 1),
                    slope: q(-3, 2),
                    intercept: q(3, 2),
                },
            ],
            Metric::Interval,
        )
        .unwrap();
        let sys = SystemSpec::PiecewiseLinear(m);
        let op = build_ulam(&sys, 48).unwrap();
        for i in [0usize, 15, 16, 17, 47] {
            let ex = exact_row(&sys, i, 48).unwrap();
            let got: Vec<_> = op.row(i).collect();
            assert_eq!(got.len(), ex.len());
            for ((j, v), (k, w)) in got.iter().zip(&ex) {
                assert_eq!(j, k);
                assert_eq!(*v, rational_to_f64(w));
            }
        }
    }

    #[test]
    fn golden_beta_matches_parry_density() {
        let op = build_ulam(&SystemSpec::beta(Real::golden()).unwrap(), 4096).unwrap();
        assert!(op.max_row_defect() < 1e-12);
        let (a, b) = golden_parry_density();
        let cut = 1.0 / ((1.0 + 5f64.sqrt()) / 2.0);
        let mut worst: f64 = 0.0;
        for (i, h) in op.density.iter().enumerate() {
            let (l, r) = (i as f64 / 4096.0, (i + 1) as f64 / 4096.0);
            if r <= cut {
                worst = worst.max((h - a).abs());
            } else if l >= cut {
                worst = worst.max((h - b).abs());
            }
        }
        let l1 = |n: usize| {
            let op = assemble(&SystemSpec::beta(Real::golden()).unwrap(), n).unwrap();
            let w = 1.0 / n as f64;
            op.density
                .iter()
                .enumerate()
                .map(|(i, h)| {
                    let (l, r) = (i as f64 * w, (i + 1) as f64 * w);
                    let exact = if r <= cut {
                        a * w
                    } else if l >= cut {
                        b * w
                    } else {
                        a * (cut - l) + b * (r - cut)
                    };
                    (h * w - exact).abs()
                })
                .sum::<f64>()
        };
        let errs = [l1(64), l1(512), l1(4096)];
        assert!(errs[0] > errs[1] && errs[1] > errs[2] && errs[2] < 1e-3, "{errs:?}");
        assert!(worst < 0.5, "worst deviation {worst}");
        let bounds = op.density_bounds().unwrap();
        // Bin extremes overshoot the Parry ratio 1/b near the orbit of the cut.
        assert!(bounds.c >= 1.0 / b - 1e-9 && bounds.c < 1.8, "{bounds:?}");
    }

    #[test]
    fn refinement_trend_decreases() {
        let sys = SystemSpec::beta(Real::golden()).unwrap();
        let d: Vec<f64> = [64usize, 512, 4096]
            .iter()
            .map(|&n| refinement_l1(&sys, n).unwrap())
            .collect();
        assert!(d[0] > d[1] && d[1] > d[2], "{d:?}");
    }

    #[test]
    fn rejects_rotation_and_torus() {
        assert!(matches!(
            build_ulam(&SystemSpec::Rotation { alpha: Real::golden() }, 64),
            Err(Error::NonExpanding { .. })
        ));
        assert!(build_ulam(&SystemSpec::toral(vec![vec![2, 1], vec![1, 1]]).unwrap(), 64).is_err());
    }

    #[test]
    fn csv_dumps() {
        let op = build_ulam(&SystemSpec::doubling(), 2).unwrap();
        assert_eq!(op.matrix_csv(), "i,j,p\n0,0,0.5\n0,1,0.5\n1,0,0.5\n1,1,0.5\n");
        assert_eq!(op.density_csv(), "bin,left,right,density\n0,0,0.5,1\n1,0.5,1,1\n");
    }
}
