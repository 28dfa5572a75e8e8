//! Exact pair correlations of the doubling map and the Petrov ratio S_N / R_N.

use num_rational::BigRational;
use recurlab::circle::RadiusSequence;
use recurlab::exact::{pair_correlation, petrov_ratio, DEFAULT_ARC_BUDGET};

fn main() -> recurlab::error::Result<()> {
    let q = |n: i64, d: i64| BigRational::new(n.into(), d.into());
    for (i, j) in [(1, 2), (2, 4), (3, 5), (4, 8)] {
        let p = pair_correlation(2, i, j, &q(1, 4 * i as i64), &q(1, 4 * j as i64), DEFAULT_ARC_BUDGET)?;
        println!("({i}, {j}): excess {} ≤ bound {}: {}", p.excess, p.bound, p.bound_ok);
    }
    let seq = RadiusSequence::power_law(q(1, 4), q(1, 1))?;
    for horizon in [4, 8, 12] {
        let s = petrov_ratio(2, &seq, horizon, &q(1, 1), DEFAULT_ARC_BUDGET)?;
        match s.ratio {
            Some(r) => println!("N = {horizon:>2}: S_N/R_N = {r:.5}"),
            None => println!("N = {horizon:>2}: R_N = 0"),
        }
    }
    Ok(())
}
