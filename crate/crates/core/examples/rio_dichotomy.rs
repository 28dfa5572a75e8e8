//! Monte Carlo truncated infinitely-often recurrence: a convergent and a
//! divergent radius sequence on the same sample points.

use recurlab::circle::RadiusSequence;
use recurlab::dynamics::SystemSpec;
use recurlab::experiments::{rio_dichotomy, SampleOptions};

fn main() -> recurlab::error::Result<()> {
    let conv: RadiusSequence = "powerlog:1,2".parse()?;
    let div: RadiusSequence = "powerlaw:1/2,1".parse()?;
    let rep = rio_dichotomy(
        &SystemSpec::doubling(),
        &conv,
        &div,
        50,
        5000,
        &SampleOptions::new(2000, 7),
    )?;
    for v in &rep.verdicts {
        println!("{:?}: {} ({})", v.outcome, v.claim, v.detail);
    }
    println!("{}", rep.details["separation"]);
    Ok(())
}
