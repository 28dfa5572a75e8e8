//! Medians of min_{k≤N} k^{1/α} d(T^k x, x) for the doubling map.

use recurlab::dynamics::SystemSpec;
use recurlab::experiments::{boshernitzan_scan, SampleOptions};

fn main() -> recurlab::error::Result<()> {
    let rep = boshernitzan_scan(
        &SystemSpec::doubling(),
        &[0.5, 1.0, 2.0],
        &[100, 1000, 10_000],
        &SampleOptions::new(500, 3),
    )?;
    print!("{}", rep.to_tsv());
    Ok(())
}
