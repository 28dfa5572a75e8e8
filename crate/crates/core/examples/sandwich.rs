//! μ(E_n) for the golden β-map against the density and decay bounds.

use recurlab::circle::RadiusSequence;
use recurlab::dynamics::{Real, SystemSpec};
use recurlab::experiments::{measure_sandwich, SampleOptions};

fn main() -> recurlab::error::Result<()> {
    let sys = SystemSpec::beta(Real::golden())?;
    let seq: RadiusSequence = "powerlaw:1/4,1".parse()?;
    let (rep, rows) = measure_sandwich(&sys, &seq, 20, &SampleOptions::new(5000, 1))?;
    for r in &rows {
        println!(
            "n = {:>2}: {:.5} ≤ {:.5} ≤ {:.5} {}",
            r.n,
            r.lower,
            r.estimate.estimate,
            r.upper,
            if r.within { "" } else { "outside" }
        );
    }
    println!("{} {}", rep.verdicts[0].claim, rep.verdicts[0].detail);
    Ok(())
}
