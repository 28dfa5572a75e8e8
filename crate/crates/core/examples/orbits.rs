//! Fixed-point orbits: return distances, return times and the Boshernitzan
//! statistic for a few systems.

use recurlab::dynamics::{
    boshernitzan_statistic, min_return_distance, orbit_f64, return_time, sample_rng, OrbitPoint, Real, SystemSpec,
};

fn main() -> recurlab::error::Result<()> {
    let systems = [
        SystemSpec::doubling(),
        SystemSpec::beta(Real::golden())?,
        "toral:2,1;1,1".parse::<SystemSpec>()?,
    ];
    for sys in &systems {
        let x = OrbitPoint::sample(&mut sample_rng(42, 0), sys.dimension(), 2048);
        let first: Vec<Vec<f64>> = orbit_f64(sys, &x, 3)?;
        let rho = min_return_distance(sys, &x, 1000)?;
        let tau = return_time(sys, &x, 0.01, 1000)?;
        let b = boshernitzan_statistic(sys, &x, 2.0, 1000)?;
        println!(
            "{sys}\n  orbit {first:.4?}\n  ρ_1000 = {:.3e} at k = {}, τ_0.01 = {tau:?}, B_2 = {b:.4}",
            rho.rho, rho.argmin
        );
    }
    Ok(())
}
