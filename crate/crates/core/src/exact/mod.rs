//! Exact recurrence sets `E_n = {x : d(Tⁿx, x) < r}` for integer circle
//! maps and rational piecewise-linear maps, with the correlation and
//! eventually-always quantities built on them.

mod correlation;
mod ear;

pub use correlation::{
    pair_correlation, pair_correlation_bound, pairs_to_csv, petrov_bound_sum, petrov_pairs, petrov_ratio,
    PairCorrelation, PetrovSummary,
};
pub use ear::{build_ear_sets, ear_truncated_a, EarSet, EarTruncation};

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::Serialize;

use crate::circle::{frac, rational_to_f64, IntervalSet};
use crate::dynamics::{Metric, PiecewiseLinearMap};
use crate::error::{Error, Result};

/// Default cap on the number of arcs one exact construction may produce.
pub const DEFAULT_ARC_BUDGET: usize = 1 << 22;

#[derive(Clone, Debug, PartialEq)]
pub struct RecurrenceSetResult {
    pub n: u64,
    pub r: BigRational,
    pub set: IntervalSet,
    pub measure: BigRational,
    pub arc_count: usize,
}

impl RecurrenceSetResult {
    fn new(n: u64, r: BigRational, set: IntervalSet) -> Self {
        RecurrenceSetResult {
            n,
            measure: set.measure(),
            arc_count: set.arc_count(),
            r,
            set,
        }
    }
}

fn check_radius(r: &BigRational) -> Result<()> {
    if r.is_negative() {
        return Err(Error::param("r", format!("radius must be non-negative, got {r}")));
    }
    Ok(())
}

/// `aⁿ − 1`.
pub fn mersenne(a: i64, n: u64) -> BigInt {
    num_traits::pow(BigInt::from(a), n as usize) - 1
}

/// `E_n` for `T x = a x mod 1`: arcs of radius `r/|aⁿ−1|` around the
/// `|aⁿ−1|` fixed points `j/|aⁿ−1|` of `Tⁿ`.
pub fn build_recurrence_set(a: i64, n: u64, r: &BigRational, budget: usize) -> Result<RecurrenceSetResult> {
    if a.unsigned_abs() < 2 {
        return Err(Error::param("a", format!("|a| must be at least 2, got {a}")));
    }
    if n == 0 {
        return Err(Error::param("n", "must be at least 1"));
    }
    check_radius(r)?;
    let q = mersenne(a, n).abs();
    if r.is_zero() {
        return Ok(RecurrenceSetResult::new(n, r.clone(), IntervalSet::empty()));
    }
    if r * BigInt::from(2) >= BigRational::one() {
        return Ok(RecurrenceSetResult::new(n, r.clone(), IntervalSet::full()));
    }
    let count = q
        .to_usize()
        .filter(|&c| c <= budget)
        .ok_or_else(|| Error::ArcBudgetExceeded {
            what: format!("E_{n} for a = {a}"),
            required: q.to_string(),
            limit: budget,
        })?;
    // Endpoints (j·v ± u) / (v·q) with r = u/v.
    let (u, v) = (r.numer(), r.denom());
    let den = v * &q;
    let set = match (u.to_i128(), v.to_i128(), den.to_i128()) {
        (Some(u), Some(v), Some(d)) if den.bits() <= 120 => {
            let mut flat = Vec::with_capacity(2 * count + 2);
            flat.extend([0, u]);
            for j in 1..count as i128 {
                flat.extend([j * v - u, j * v + u]);
            }
            flat.extend([d - u, d]);
            IntervalSet::from_small_flat(d, flat)
        }
        _ => {
            let mut flat = Vec::with_capacity(2 * count + 2);
            flat.extend([BigInt::zero(), u.clone()]);
            for j in 1..count {
                let c = v * BigInt::from(j);
                flat.push(&c - u);
                flat.push(c + u);
            }
            flat.extend([&den - u, den.clone()]);
            IntervalSet::from_big_flat(den, flat)
        }
    };
    Ok(RecurrenceSetResult::new(n, r.clone(), set))
}

/// A branch of `Tⁿ`: `x ↦ slope·x + intercept` on `[left, right)`.
#[derive(Clone, Debug, PartialEq)]
pub struct IterateBranch {
    pub left: BigRational,
    pub right: BigRational,
    pub slope: BigRational,
    pub intercept: BigRational,
}

/// All maximal affine branches of `Tⁿ`, by composing branch words.
pub fn iterate_branches(map: &PiecewiseLinearMap, n: u64, budget: usize) -> Result<Vec<IterateBranch>> {
    let mut current = vec![IterateBranch {
        left: BigRational::zero(),
        right: BigRational::one(),
        slope: BigRational::one(),
        intercept: BigRational::zero(),
    }];
    for _ in 0..n {
        let mut next = Vec::with_capacity(current.len() * map.branches().len());
        for f in &current {
            for b in map.branches() {
                // Preimage of b's domain under f, intersected with f's domain.
                let p0 = (&b.left - &f.intercept) / &f.slope;
                let p1 = (&b.right - &f.intercept) / &f.slope;
                let (lo, hi) = if p0 <= p1 { (p0, p1) } else { (p1, p0) };
                let lo = lo.max(f.left.clone());
                let hi = hi.min(f.right.clone());
                if lo >= hi {
                    continue;
                }
                next.push(IterateBranch {
                    left: lo,
                    right: hi,
                    slope: &b.slope * &f.slope,
                    intercept: &b.slope * &f.intercept + &b.intercept,
                });
            }
            if next.len() > budget {
                return Err(Error::BranchBudgetExceeded {
                    required: format!("more than {budget}"),
                    limit: budget,
                });
            }
        }
        next.sort_by(|x, y| x.left.cmp(&y.left));
        current = next;
    }
    Ok(current)
}

/// Solution set of `d(g(x), x) < r` within one branch of `Tⁿ`.
fn branch_solutions(br: &IterateBranch, r: &BigRational, metric: Metric) -> Vec<(BigRational, BigRational)> {
    if r.is_zero() {
        return Vec::new();
    }
    // h(x) = g(x) − x = s·x + c is monotone on the branch.
    let s = &br.slope - BigRational::one();
    let c = &br.intercept;
    let preimage = |lo: &BigRational, hi: &BigRational| {
        let x0 = (lo - c) / &s;
        let x1 = (hi - c) / &s;
        let (a, b) = if x0 <= x1 { (x0, x1) } else { (x1, x0) };
        let a = a.max(br.left.clone());
        let b = b.min(br.right.clone());
        (a < b).then_some((a, b))
    };
    match metric {
        Metric::Interval => preimage(&-r, r).into_iter().collect(),
        Metric::Circle => {
            let h0 = &s * &br.left + c;
            let h1 = &s * &br.right + c;
            let (lo, hi) = if h0 <= h1 { (h0, h1) } else { (h1, h0) };
            let kmin = (&lo - r).floor().to_integer();
            let kmax = (&hi + r).ceil().to_integer();
            let mut out = Vec::new();
            let mut k = kmin;
            while k <= kmax {
                let kq = BigRational::from_integer(k.clone());
                if let Some(piece) = preimage(&(&kq - r), &(&kq + r)) {
                    out.push(piece);
                }
                k += 1;
            }
            out
        }
    }
}

/// `E_n` for a rational piecewise-linear map, assembled branch by branch.
pub fn build_recurrence_set_piecewise(
    map: &PiecewiseLinearMap,
    n: u64,
    r: &BigRational,
    budget: usize,
) -> Result<RecurrenceSetResult> {
    if n == 0 {
        return Err(Error::param("n", "must be at least 1"));
    }
    check_radius(r)?;
    let branches = iterate_branches(map, n, budget)?;
    let pieces: Vec<_> = branches
        .iter()
        .flat_map(|b| branch_solutions(b, r, map.metric()))
        .collect();
    if pieces.len() > budget {
        return Err(Error::ArcBudgetExceeded {
            what: format!("E_{n}"),
            required: pieces.len().to_string(),
            limit: budget,
        });
    }
    Ok(RecurrenceSetResult::new(n, r.clone(), IntervalSet::from_arcs(pieces)))
}

/// Largest `|J| / (|I| r)` over branches `I` of `Tⁿ`, where `J ⊆ I` solves
/// `d(Tⁿx, x) < r`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BranchRatio {
    pub n: u64,
    #[serde(serialize_with = "crate::report::ser_rational")]
    pub max_ratio: BigRational,
    pub branches: usize,
    pub branches_with_solutions: usize,
}

pub fn branch_ratio_check(map: &PiecewiseLinearMap, n: u64, r: &BigRational, budget: usize) -> Result<BranchRatio> {
    if !r.is_positive() {
        return Err(Error::param("r", "must be positive"));
    }
    let branches = iterate_branches(map, n, budget)?;
    let mut best = BigRational::zero();
    let mut hit = 0;
    for b in &branches {
        let j: BigRational = branch_solutions(b, r, map.metric())
            .iter()
            .map(|(l, h)| h - l)
            .fold(BigRational::zero(), |acc, x| acc + x);
        if j.is_positive() {
            hit += 1;
        }
        let ratio = j / ((&b.right - &b.left) * r);
        if ratio > best {
            best = ratio;
        }
    }
    Ok(BranchRatio {
        n,
        max_ratio: best,
        branches: branches.len(),
        branches_with_solutions: hit,
    })
}

/// Fourier coefficient `c_l = sin(2π l r)/(π l)` of the indicator of
/// `{‖x‖ < r}`; `l = 0` gives the mean `2r`.
pub fn fourier_indicator_coeff(r: &BigRational, l: i64) -> Result<f64> {
    if !r.is_positive() || r * BigInt::from(2) > BigRational::one() {
        return Err(Error::param("r", "must lie in (0, 1/2]"));
    }
    if l == 0 {
        return Ok(rational_to_f64(&(r * BigInt::from(2))));
    }
    // Reduce l·r mod 1 exactly before the transcendental step.
    let t = frac(&(r * BigInt::from(l)));
    let angle = 2.0 * std::f64::consts::PI * rational_to_f64(&t);
    Ok(angle.sin() / (std::f64::consts::PI * l as f64))
}

/// Exact orbit step `a x mod 1`.
pub fn integer_map_step(a: i64, x: &BigRational) -> BigRational {
    frac(&(x * BigInt::from(a)))
}

/// `gcd(i, j)` as used in the pair bound.
pub(crate) fn gcd_u64(i: u64, j: u64) -> u64 {
    i.gcd(&j)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circle::{circle_dist, CirclePoint};

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    fn iterate_exact(a: i64, x: &BigRational, n: u64) -> BigRational {
        (0..n).fold(x.clone(), |y, _| integer_map_step(a, &y))
    }

    #[test]
    fn e1_doubling() {
        let e = build_recurrence_set(2, 1, &q(1, 10), DEFAULT_ARC_BUDGET).unwrap();
        assert_eq!(e.set.to_canonical_text(), "0/1,1/10\n9/10,1/1\n");
        assert_eq!(e.measure, q(1, 5));
        assert_eq!(e.arc_count, 1);
    }

    #[test]
    fn e2_doubling_matches_fixed_point_arcs() {
        let e = build_recurrence_set(2, 2, &q(1, 10), DEFAULT_ARC_BUDGET).unwrap();
        assert_eq!(e.arc_count, 3);
        assert_eq!(e.measure, q(1, 5));
        for arc in e.set.arcs() {
            assert!(arc.length() == q(1, 15) || arc.length() == q(1, 30));
        }
        // Fixed points of T² by direct iteration of every j/3.
        for j in 0..3 {
            let x = q(j, 3);
            assert_eq!(iterate_exact(2, &x, 2), x);
            assert!(e.set.contains(&CirclePoint::new(x)));
        }
    }

    #[test]
    fn measure_is_two_r_exactly() {
        for a in [2i64, 3, 4, -2, -3] {
            for n in 1..=8u64 {
                for r in [q(1, 4), q(1, 7), q(1, 100)] {
                    let e = build_recurrence_set(a, n, &r, DEFAULT_ARC_BUDGET).unwrap();
                    assert_eq!(e.measure, &r * BigInt::from(2), "a={a} n={n}");
                    assert_eq!(BigInt::from(e.arc_count as u64), mersenne(a, n).abs());
                }
            }
        }
        let e = build_recurrence_set(2, 5, &q(1, 4), DEFAULT_ARC_BUDGET).unwrap();
        assert_eq!(e.measure, q(1, 2));
    }

    #[test]
    fn degenerate_radii() {
        assert!(build_recurrence_set(2, 3, &q(0, 1), 100).unwrap().set.is_empty());
        assert!(build_recurrence_set(2, 3, &q(1, 2), 100).unwrap().set.is_full());
        assert!(build_recurrence_set(1, 3, &q(1, 4), 100).is_err());
        assert!(matches!(
            build_recurrence_set(2, 20, &q(1, 4), 1000),
            Err(Error::ArcBudgetExceeded { .. })
        ));
    }

    #[test]
    fn membership_oracle() {
        let r = q(1, 9);
        for n in 1..=5u64 {
            let e = build_recurrence_set(3, n, &r, DEFAULT_ARC_BUDGET).unwrap();
            for k in 0..200i64 {
                let x = q(k * 7 + 1, 1409);
                let y = iterate_exact(3, &x, n);
                let inside = circle_dist(&CirclePoint::new(y), &CirclePoint::new(x.clone())) < r;
                assert_eq!(e.set.contains(&CirclePoint::new(x)), inside);
            }
        }
    }

    #[test]
    fn piecewise_matches_circle_map() {
        let m = PiecewiseLinearMap::from_integer_map(2).unwrap();
        for n in 1..=6 {
            let a = build_recurrence_set(2, n, &q(1, 10), DEFAULT_ARC_BUDGET).unwrap();
            let b = build_recurrence_set_piecewise(&m, n, &q(1, 10), DEFAULT_ARC_BUDGET).unwrap();
            assert_eq!(a.set, b.set);
        }
        // The interval-metric doubling map agrees at n = 2.
        let iv = PiecewiseLinearMap::uniform(2, false).unwrap();
        let b = build_recurrence_set_piecewise(&iv, 2, &q(1, 10), DEFAULT_ARC_BUDGET).unwrap();
        let a = build_recurrence_set(2, 2, &q(1, 10), DEFAULT_ARC_BUDGET).unwrap();
        assert_eq!(a.set, b.set);
    }

    #[test]
    fn three_branch_slope_three() {
        let m = PiecewiseLinearMap::uniform(3, false).unwrap();
        let e = build_recurrence_set_piecewise(&m, 1, &q(1, 12), DEFAULT_ARC_BUDGET).unwrap();
        // Fixed points 0 and 1/2 (1 is excluded by the half-open domain,
        // its one-sided neighbourhood is kept): |2x − k| < 1/12.
        let arcs = e.set.arcs();
        assert_eq!(arcs[0].left, q(0, 1));
        assert_eq!(arcs[0].right, q(1, 24));
        assert_eq!(arcs[1].length(), q(1, 12));
        assert_eq!(e.measure, q(1, 6));
    }

    #[test]
    fn tent_zero_radius_is_empty() {
        let t = PiecewiseLinearMap::uniform(2, true).unwrap();
        let e = build_recurrence_set_piecewise(&t, 1, &q(0, 1), 100).unwrap();
        assert!(e.set.is_empty());
    }

    #[test]
    fn branch_budget_enforced() {
        let m = PiecewiseLinearMap::uniform(3, false).unwrap();
        assert!(matches!(
            build_recurrence_set_piecewise(&m, 8, &q(1, 10), 1000),
            Err(Error::BranchBudgetExceeded { .. })
        ));
    }

    #[test]
    fn doubling_branch_ratios() {
        let m = PiecewiseLinearMap::uniform(2, false).unwrap();
        let r = q(1, 100);
        let one = branch_ratio_check(&m, 1, &r, 1 << 12).unwrap();
        assert_eq!(one.max_ratio, q(2, 1));
        let two = branch_ratio_check(&m, 2, &r, 1 << 12).unwrap();
        assert_eq!(two.max_ratio, q(8, 3));
        let three = branch_ratio_check(&m, 3, &r, 1 << 12).unwrap();
        assert_eq!(three.max_ratio, q(16, 7));
        let six = branch_ratio_check(&m, 6, &r, 1 << 12).unwrap();
        assert!(six.max_ratio <= three.max_ratio);
        for n in 1..=8 {
            assert!(branch_ratio_check(&m, n, &r, 1 << 12).unwrap().max_ratio <= q(4, 1));
        }
    }

    #[test]
    fn fourier_coefficients() {
        let c = fourier_indicator_coeff(&q(1, 4), 1).unwrap();
        assert!((c - 1.0 / std::f64::consts::PI).abs() < 1e-15);
        // Midpoint-rule quadrature of ∫ G(x) e^{−2πix} dx.
        let n = 200_000;
        let mut acc = 0.0;
        for k in 0..n {
            let x = (k as f64 + 0.5) / n as f64;
            let inside = x.min(1.0 - x) < 0.25;
            if inside {
                acc += (2.0 * std::f64::consts::PI * x).cos();
            }
        }
        assert!((acc / n as f64 - c).abs() < 1e-4);
        assert!(fourier_indicator_coeff(&q(1, 2), 1).unwrap().abs() < 1e-15);
        assert_eq!(fourier_indicator_coeff(&q(1, 10), 0).unwrap(), 0.2);
        assert!(fourier_indicator_coeff(&q(0, 1), 1).is_err());
    }
}
