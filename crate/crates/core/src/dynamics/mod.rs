mod orbit;
mod point;
mod real;
mod stats;
mod system;

pub use orbit::{
    iterate, orbit_f64, required_precision, return_distances, scaled_threshold, step_exact, supports_exact, window_dist,
};
pub use point::{round_bits, sample_rng, OrbitPoint, GUARD_BITS};
pub use real::Real;
pub use stats::{
    boshernitzan_running, boshernitzan_statistic, exponents_from_distances, first_return, min_return_distance,
    orbit_csv, return_exponents, return_time, unscale, ReturnDistance, ReturnExponents, ReturnTime,
};
pub use system::{Branch, Metric, PiecewiseLinearMap, SystemSpec};
