//! Exact recurrence sets E_n of x ↦ ax mod 1, and the same set rebuilt from
//! a piecewise-linear description.

use num_rational::BigRational;
use recurlab::dynamics::PiecewiseLinearMap;
use recurlab::exact::{build_recurrence_set, build_recurrence_set_piecewise, DEFAULT_ARC_BUDGET};

fn main() -> recurlab::error::Result<()> {
    let r = BigRational::new(1.into(), 10.into());
    for a in [2, 3, -2] {
        for n in 1..=4 {
            let e = build_recurrence_set(a, n, &r, DEFAULT_ARC_BUDGET)?;
            println!(
                "a = {a:>2}, n = {n}: {} arcs, μ(E_n) = {}",
                e.set.arc_count(),
                e.measure
            );
        }
    }
    let map = PiecewiseLinearMap::from_integer_map(2)?;
    let pl = build_recurrence_set_piecewise(&map, 3, &r, DEFAULT_ARC_BUDGET)?;
    let circle = build_recurrence_set(2, 3, &r, DEFAULT_ARC_BUDGET)?;
    println!(
        "piecewise and circle constructions agree at n = 3: {}",
        pl.set == circle.set
    );
    println!(
        "E_2 for the doubling map: {}",
        build_recurrence_set(2, 2, &r, DEFAULT_ARC_BUDGET)?.set
    );
    Ok(())
}
