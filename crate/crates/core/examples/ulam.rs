//! Ulam discretisation of the transfer operator: invariant density, second
//! eigenvalue and correlation decay, for the doubling and golden β-maps.

use recurlab::dynamics::{Real, SystemSpec};
use recurlab::transfer::{build_ulam, correlation_decay_fit, golden_parry_density, TestFamily};

fn main() -> recurlab::error::Result<()> {
    for sys in [SystemSpec::doubling(), SystemSpec::beta(Real::golden())?] {
        let op = build_ulam(&sys, 1024)?;
        let b = op.density_bounds()?;
        let fam = TestFamily::for_bins(op.bins);
        let fit = correlation_decay_fit(&op, fam, fam.default_n_max())?;
        println!(
            "{sys}: density in [{:.4}, {:.4}], c = {:.4}, |λ₂| = {:.4}, τ = {:.4}, C = {:.4}",
            b.lower, b.upper, b.c, op.second.modulus, fit.tau, fit.c
        );
    }
    let (lo, hi) = golden_parry_density();
    println!("Parry density of the golden map takes the values {lo:.4} and {hi:.4}");
    Ok(())
}
