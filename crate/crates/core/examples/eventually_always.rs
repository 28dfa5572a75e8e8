//! Eventually-always sets: C_m = ∪_{k≤m} E_k(r_m) and A_{n₀,M} = ∩ C_m, exactly.

use num_rational::BigRational;
use recurlab::circle::RadiusSequence;
use recurlab::exact::{build_ear_sets, ear_truncated_a, DEFAULT_ARC_BUDGET};

fn main() -> recurlab::error::Result<()> {
    let seq = RadiusSequence::power_law(
        BigRational::new(1.into(), 4.into()),
        BigRational::from_integer(1.into()),
    )?;
    for m in [2, 6, 10, 14] {
        let c = build_ear_sets(2, m, &seq, DEFAULT_ARC_BUDGET)?;
        println!(
            "m = {m:>2}: μ(C_m) = {:.6} ≤ 2m r_m = {}",
            recurlab::circle::rational_to_f64(&c.measure),
            c.union_bound()
        );
    }
    let a = ear_truncated_a(2, 4, 12, &seq, DEFAULT_ARC_BUDGET)?;
    for (m, mu) in &a.running {
        println!("μ(A_4,{m}) = {mu}");
    }
    Ok(())
}
