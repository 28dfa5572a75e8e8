use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, Zero};
use serde::Serialize;

use super::build_recurrence_set;
use crate::circle::{IntervalSet, RadiusSequence};
use crate::error::{Error, Result};
use crate::report::ser_rational;

/// `C_m = ∪_{k=1}^m E_{k,m}`, every term using the radius `r_m`.
#[derive(Clone, Debug, PartialEq)]
pub struct EarSet {
    pub m: u64,
    pub r_m: BigRational,
    pub set: IntervalSet,
    pub measure: BigRational,
}

impl EarSet {
    /// `2 m r_m`, the union bound on `μ(C_m)`.
    pub fn union_bound(&self) -> BigRational {
        &self.r_m * BigInt::from(2 * self.m)
    }
}

fn arcs_needed(a: i64, m: u64) -> BigInt {
    (1..=m).map(|k| super::mersenne(a, k).abs()).sum()
}

pub fn build_ear_sets(a: i64, m: u64, seq: &RadiusSequence, budget: usize) -> Result<EarSet> {
    if m == 0 {
        return Err(Error::param("m", "must be at least 1"));
    }
    let need = arcs_needed(a, m);
    if need > BigInt::from(budget) {
        return Err(Error::ArcBudgetExceeded {
            what: format!("C_{m}"),
            required: need.to_string(),
            limit: budget,
        });
    }
    let r_m = seq.eval_rational(m)?;
    let parts = (1..=m)
        .map(|k| build_recurrence_set(a, k, &r_m, budget).map(|e| e.set))
        .collect::<Result<Vec<_>>>()?;
    let set = IntervalSet::union_all(parts.iter());
    Ok(EarSet {
        m,
        measure: set.measure(),
        r_m,
        set,
    })
}

/// `A_{n₀,M} = ∩_{m=n₀}^M C_m` with the running measures.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EarTruncation {
    pub n0: u64,
    pub horizon: u64,
    #[serde(skip)]
    pub set: IntervalSet,
    #[serde(serialize_with = "ser_rational")]
    pub measure: BigRational,
    /// `(M', μ(A_{n₀,M'}))` for `M' = n₀..=M`, non-increasing.
    #[serde(serialize_with = "crate::report::ser_rational_pairs")]
    pub running: Vec<(u64, BigRational)>,
}

pub fn ear_truncated_a(a: i64, n0: u64, horizon: u64, seq: &RadiusSequence, budget: usize) -> Result<EarTruncation> {
    if n0 == 0 || horizon < n0 {
        return Err(Error::param(
            "window",
            format!("need 1 ≤ n0 ≤ M, got n0 = {n0}, M = {horizon}"),
        ));
    }
    let mut acc = IntervalSet::full();
    let mut running = Vec::new();
    for m in n0..=horizon {
        let c = build_ear_sets(a, m, seq, budget)?;
        acc = acc.intersect(&c.set);
        running.push((m, acc.measure()));
        if acc.is_empty() {
            for later in m + 1..=horizon {
                running.push((later, BigRational::zero()));
            }
            break;
        }
    }
    Ok(EarTruncation {
        n0,
        horizon,
        measure: acc.measure(),
        set: acc,
        running,
    })
}
