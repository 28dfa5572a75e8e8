use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, Zero};
use rayon::prelude::*;
use serde::Serialize;

use super::{build_recurrence_set, gcd_u64, RecurrenceSetResult};
use crate::circle::{rational_to_f64, RadiusSequence};
use crate::error::{Error, Result};
use crate::report::ser_rational;

/// Exact correlation data for one pair `(E_i, E_j)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PairCorrelation {
    pub i: u64,
    pub j: u64,
    #[serde(serialize_with = "ser_rational")]
    pub intersection: BigRational,
    #[serde(serialize_with = "ser_rational")]
    pub excess: BigRational,
    #[serde(serialize_with = "ser_rational")]
    pub bound: BigRational,
    pub bound_ok: bool,
}

/// `2|a|^{2p−(i+j)}` with `p = gcd(i, j)`.
pub fn pair_correlation_bound(a: i64, i: u64, j: u64) -> BigRational {
    let p = gcd_u64(i, j);
    let exp = 2 * p as i64 - (i + j) as i64;
    let base = BigInt::from(a.unsigned_abs());
    let pow = num_traits::pow(base, exp.unsigned_abs() as usize);
    let two = BigRational::from_integer(2.into());
    if exp >= 0 {
        two * pow
    } else {
        two / pow
    }
}

fn correlate(a: i64, ei: &RecurrenceSetResult, ej: &RecurrenceSetResult) -> PairCorrelation {
    let intersection = ei.set.intersection_measure(&ej.set);
    let excess = &intersection - &ei.measure * &ej.measure;
    let bound = pair_correlation_bound(a, ei.n, ej.n);
    PairCorrelation {
        i: ei.n,
        j: ej.n,
        bound_ok: excess <= bound,
        intersection,
        excess,
        bound,
    }
}

pub fn pair_correlation(
    a: i64,
    i: u64,
    j: u64,
    r_i: &BigRational,
    r_j: &BigRational,
    budget: usize,
) -> Result<PairCorrelation> {
    if i == j {
        return Err(Error::param("j", "pair correlation needs i ≠ j"));
    }
    let ei = build_recurrence_set(a, i, r_i, budget)?;
    let ej = build_recurrence_set(a, j, r_j, budget)?;
    Ok(correlate(a, &ei, &ej))
}

/// The quasi-independence sums of the Petrov criterion.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PetrovSummary {
    pub horizon: u64,
    #[serde(serialize_with = "ser_rational")]
    pub h: BigRational,
    #[serde(serialize_with = "ser_rational")]
    pub s_n: BigRational,
    #[serde(serialize_with = "ser_rational")]
    pub r_n: BigRational,
    pub ratio: Option<f64>,
}

fn sets_for(a: i64, seq: &RadiusSequence, horizon: u64, budget: usize) -> Result<Vec<RecurrenceSetResult>> {
    (1..=horizon)
        .into_par_iter()
        .map(|n| build_recurrence_set(a, n, &seq.eval_rational(n)?, budget))
        .collect()
}

/// Every pair `1 ≤ i < j ≤ horizon` in lexicographic order.
pub fn petrov_pairs(a: i64, seq: &RadiusSequence, horizon: u64, budget: usize) -> Result<Vec<PairCorrelation>> {
    let sets = sets_for(a, seq, horizon, budget)?;
    let idx: Vec<(usize, usize)> = (0..sets.len())
        .flat_map(|i| (i + 1..sets.len()).map(move |j| (i, j)))
        .collect();
    Ok(idx.par_iter().map(|&(i, j)| correlate(a, &sets[i], &sets[j])).collect())
}

/// `S_N = Σ_{i<j≤N} (μ(E_i∩E_j) − H μ(E_i)μ(E_j))` and `R_N = (Σ μ(E_i))²`.
pub fn petrov_ratio(
    a: i64,
    seq: &RadiusSequence,
    horizon: u64,
    h: &BigRational,
    budget: usize,
) -> Result<PetrovSummary> {
    if horizon == 0 {
        return Err(Error::param("N", "must be at least 1"));
    }
    let sets = sets_for(a, seq, horizon, budget)?;
    let idx: Vec<(usize, usize)> = (0..sets.len())
        .flat_map(|i| (i + 1..sets.len()).map(move |j| (i, j)))
        .collect();
    let terms: Vec<BigRational> = idx
        .par_iter()
        .map(|&(i, j)| sets[i].set.intersection_measure(&sets[j].set) - h * &sets[i].measure * &sets[j].measure)
        .collect();
    let s_n = terms.into_iter().fold(BigRational::zero(), |acc, t| acc + t);
    let total = sets.iter().fold(BigRational::zero(), |acc, e| acc + &e.measure);
    let r_n = &total * &total;
    let ratio = r_n.is_positive().then(|| rational_to_f64(&(&s_n / &r_n)));
    Ok(PetrovSummary {
        horizon,
        h: h.clone(),
        s_n,
        r_n,
        ratio,
    })
}

/// `Σ_{i<j≤N} 2|a|^{2 gcd(i,j) − (i+j)}`.
pub fn petrov_bound_sum(a: i64, horizon: u64) -> BigRational {
    let mut acc = BigRational::zero();
    for i in 1..=horizon {
        for j in i + 1..=horizon {
            acc += pair_correlation_bound(a, i, j);
        }
    }
    acc
}

/// CSV with exact numerator/denominator columns and decimal renderings.
pub fn pairs_to_csv(rows: &[PairCorrelation]) -> String {
    let mut out = String::from(
        "i,j,intersection_num,intersection_den,excess_num,excess_den,bound_num,bound_den,intersection,excess,bound,bound_ok\n",
    );
    for p in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{:.12e},{:.12e},{:.12e},{}\n",
            p.i,
            p.j,
            p.intersection.numer(),
            p.intersection.denom(),
            p.excess.numer(),
            p.excess.denom(),
            p.bound.numer(),
            p.bound.denom(),
            rational_to_f64(&p.intersection),
            rational_to_f64(&p.excess),
            rational_to_f64(&p.bound),
            p.bound_ok
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::DEFAULT_ARC_BUDGET;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    fn quarter_over_n() -> RadiusSequence {
        RadiusSequence::power_law(q(1, 4), q(1, 1)).unwrap()
    }

    #[test]
    fn first_pair() {
        let p = pair_correlation(2, 1, 2, &q(1, 10), &q(1, 10), DEFAULT_ARC_BUDGET).unwrap();
        assert_eq!(p.intersection, q(1, 15));
        assert_eq!(p.excess, q(2, 75));
        assert_eq!(p.bound, q(1, 1));
        assert!(p.bound_ok);
        assert!(pair_correlation(2, 3, 3, &q(1, 10), &q(1, 10), 100).is_err());
    }

    #[test]
    fn intersection_matches_materialised_set() {
        // Independent oracle: build E_1 ∩ E_2 as an explicit arc list.
        let e1 = crate::circle::IntervalSet::from_arcs([(q(-1, 10), q(1, 10))]);
        let e2 = crate::circle::IntervalSet::from_arcs((0..3).map(|j| (q(j, 3) - q(1, 30), q(j, 3) + q(1, 30))));
        assert_eq!(e1.intersect(&e2).measure(), q(1, 15));
    }

    #[test]
    fn all_pairs_within_bound() {
        let rows = petrov_pairs(2, &quarter_over_n(), 14, DEFAULT_ARC_BUDGET).unwrap();
        assert_eq!(rows.len(), 91);
        assert!(rows.iter().all(|p| p.bound_ok));
    }

    #[test]
    fn petrov_sums() {
        let one = petrov_ratio(2, &quarter_over_n(), 1, &q(1, 1), DEFAULT_ARC_BUDGET).unwrap();
        assert!(one.s_n.is_zero());
        let s = petrov_ratio(2, &quarter_over_n(), 20, &q(1, 1), DEFAULT_ARC_BUDGET).unwrap();
        assert!(s.s_n <= petrov_bound_sum(2, 20));
        let ratios: Vec<f64> = [8u64, 12, 16, 20]
            .iter()
            .map(|&n| {
                petrov_ratio(2, &quarter_over_n(), n, &q(1, 1), DEFAULT_ARC_BUDGET)
                    .unwrap()
                    .ratio
                    .unwrap()
            })
            .collect();
        // The sets are negatively correlated: S_N < 0 and |S_N/R_N| shrinks.
        assert!(ratios.iter().all(|&r| r < 0.0), "{ratios:?}");
        assert!(ratios.windows(2).all(|w| w[1].abs() < w[0].abs()), "{ratios:?}");
    }

    #[test]
    fn csv_rows() {
        let rows = petrov_pairs(2, &quarter_over_n(), 3, DEFAULT_ARC_BUDGET).unwrap();
        let csv = pairs_to_csv(&rows);
        assert_eq!(csv.lines().count(), 4);
        assert!(csv.lines().nth(1).unwrap().starts_with("1,2,"));
    }
}
