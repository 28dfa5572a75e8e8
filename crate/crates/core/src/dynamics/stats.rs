use serde::Serialize;

use super::orbit::{orbit_f64, return_distances, scaled_threshold};
use super::point::OrbitPoint;
use super::system::SystemSpec;
use crate::error::{Error, Result};

const TWO64: f64 = 18_446_744_073_709_551_616.0;

pub fn unscale(d: u64) -> f64 {
    d as f64 / TWO64
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReturnDistance {
    pub m: usize,
    /// `min_{1≤k≤m} d(T^k x, x)`.
    pub rho: f64,
    /// First `k` attaining the minimum.
    pub argmin: usize,
}

/// `ρ_m(x)`.
pub fn min_return_distance(sys: &SystemSpec, x: &OrbitPoint, m: usize) -> Result<ReturnDistance> {
    if m == 0 {
        return Err(Error::param("m", "must be positive"));
    }
    let d = return_distances(sys, x, m)?;
    let (k, v) = d.iter().enumerate().min_by_key(|&(i, v)| (*v, i)).expect("m ≥ 1");
    Ok(ReturnDistance {
        m,
        rho: unscale(*v),
        argmin: k + 1,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", content = "k", rename_all = "snake_case")]
pub enum ReturnTime {
    Returned(usize),
    /// No return within the stated horizon.
    BeyondHorizon(usize),
}

impl ReturnTime {
    pub fn value(self) -> Option<usize> {
        match self {
            ReturnTime::Returned(k) => Some(k),
            ReturnTime::BeyondHorizon(_) => None,
        }
    }
}

/// First `k ≥ 1` with `d(T^k x, x) < r` among precomputed scaled distances.
pub fn first_return(dists: &[u64], r: f64) -> ReturnTime {
    let t = scaled_threshold(r);
    match dists.iter().position(|&d| (d as u128) < t) {
        Some(i) => ReturnTime::Returned(i + 1),
        None => ReturnTime::BeyondHorizon(dists.len()),
    }
}

/// `τ_r(x)` up to `horizon`.
pub fn return_time(sys: &SystemSpec, x: &OrbitPoint, r: f64, horizon: usize) -> Result<ReturnTime> {
    if !(r > 0.0) {
        return Err(Error::param("r", format!("must be positive, got {r}")));
    }
    Ok(first_return(&return_distances(sys, x, horizon)?, r))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReturnExponents {
    /// Least-squares slope of `log τ_r` against `−log r` over the grid.
    pub slope: f64,
    /// Smaller of the slopes fitted on the coarse and fine halves.
    pub lower: f64,
    /// Larger of the two half-grid slopes.
    pub upper: f64,
    pub rms_residual: f64,
    pub points_used: usize,
    /// Radii whose return time exceeded the horizon.
    pub beyond_horizon: Vec<f64>,
}

fn ls_fit(pts: &[(f64, f64)]) -> (f64, f64) {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    (slope, my - slope * mx)
}

/// Return-time exponents `R̲, R̄` estimated from `τ_r` on a radius grid.
pub fn return_exponents(sys: &SystemSpec, x: &OrbitPoint, r_grid: &[f64], horizon: usize) -> Result<ReturnExponents> {
    if r_grid.iter().any(|&r| !(r > 0.0 && r < 1.0)) {
        return Err(Error::param("r_grid", "radii must lie in (0, 1)"));
    }
    let dists = return_distances(sys, x, horizon)?;
    exponents_from_distances(&dists, r_grid)
}

pub fn exponents_from_distances(dists: &[u64], r_grid: &[f64]) -> Result<ReturnExponents> {
    let mut pts = Vec::new();
    let mut beyond = Vec::new();
    for &r in r_grid {
        match first_return(dists, r) {
            ReturnTime::Returned(k) => pts.push((-r.ln(), (k as f64).ln())),
            ReturnTime::BeyondHorizon(_) => beyond.push(r),
        }
    }
    if pts.len() < 2 {
        return Err(Error::param(
            "r_grid",
            format!("only {} radii returned within the horizon; need 2", pts.len()),
        ));
    }
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let (slope, icept) = ls_fit(&pts);
    let rms = (pts.iter().map(|p| (p.1 - slope * p.0 - icept).powi(2)).sum::<f64>() / pts.len() as f64).sqrt();
    let half = pts.len() / 2;
    let (lower, upper) = if half >= 2 && pts.len() - half >= 2 {
        let a = ls_fit(&pts[..half]).0;
        let b = ls_fit(&pts[half..]).0;
        (a.min(b), a.max(b))
    } else {
        (slope, slope)
    };
    Ok(ReturnExponents {
        slope,
        lower,
        upper,
        rms_residual: rms,
        points_used: pts.len(),
        beyond_horizon: beyond,
    })
}

/// `min_{1≤k≤n} k^{1/α} d(T^k x, x)`.
pub fn boshernitzan_statistic(sys: &SystemSpec, x: &OrbitPoint, alpha: f64, n: usize) -> Result<f64> {
    if !(alpha > 0.0) {
        return Err(Error::param("alpha", format!("must be positive, got {alpha}")));
    }
    if n == 0 {
        return Err(Error::param("n", "must be positive"));
    }
    let d = return_distances(sys, x, n)?;
    Ok(boshernitzan_running(&d, alpha, &[n])[0])
}

/// The statistic at each checkpoint `N` (ascending, each `≤ dists.len()`).
pub fn boshernitzan_running(dists: &[u64], alpha: f64, checkpoints: &[usize]) -> Vec<f64> {
    let inv = 1.0 / alpha;
    let mut out = Vec::with_capacity(checkpoints.len());
    let mut best = f64::INFINITY;
    let mut k = 0;
    for &c in checkpoints {
        while k < c.min(dists.len()) {
            let v = ((k + 1) as f64).powf(inv) * unscale(dists[k]);
            best = best.min(v);
            k += 1;
        }
        out.push(best);
    }
    out
}

/// `k,x_0[,x_1…],dist` for `k = 0..=n`, distance to the starting point.
pub fn orbit_csv(sys: &SystemSpec, x: &OrbitPoint, n: usize) -> Result<String> {
    let orbit = orbit_f64(sys, x, n)?;
    let d = return_distances(sys, x, n)?;
    let dim = x.dim();
    let mut s = String::from("k");
    for i in 0..dim {
        s.push_str(&format!(",x{i}"));
    }
    s.push_str(",dist\n");
    for (k, p) in orbit.iter().enumerate() {
        s.push_str(&k.to_string());
        for v in p {
            s.push_str(&format!(",{v}"));
        }
        let dist = if k == 0 { 0.0 } else { unscale(d[k - 1]) };
        s.push_str(&format!(",{dist}\n"));
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::point::sample_rng;

    #[test]
    fn periodic_examples() {
        let sys = SystemSpec::doubling();
        let third = OrbitPoint::from_ratio(1, 3);
        let r = min_return_distance(&sys, &third, 2).unwrap();
        assert_eq!((r.rho, r.argmin), (0.0, 2));
        assert_eq!(
            min_return_distance(&sys, &third, 1).unwrap().rho,
            unscale(scale_third())
        );
        let fifth = OrbitPoint::from_ratio(1, 5);
        let r = min_return_distance(&sys, &fifth, 4).unwrap();
        assert_eq!((r.rho, r.argmin), (0.0, 4));
        assert_eq!(return_time(&sys, &third, 0.1, 100).unwrap(), ReturnTime::Returned(2));
        assert_eq!(return_time(&sys, &fifth, 0.01, 100).unwrap(), ReturnTime::Returned(4));
        assert_eq!(
            return_time(&sys, &fifth, 0.01, 3).unwrap(),
            ReturnTime::BeyondHorizon(3)
        );
    }

    fn scale_third() -> u64 {
        // d(2/3, 1/3) = 1/3, rounded up at 2^-64.
        u64::MAX / 3 + 1
    }

    #[test]
    fn periodic_exponents_vanish() {
        let sys = SystemSpec::doubling();
        let grid: Vec<f64> = (1..=8).map(|i| 2f64.powi(-3 * i)).collect();
        let e = return_exponents(&sys, &OrbitPoint::from_ratio(1, 7), &grid, 50).unwrap();
        assert_eq!((e.slope, e.lower, e.upper), (0.0, 0.0, 0.0));
    }

    #[test]
    fn typical_doubling_exponent_near_one() {
        let sys = SystemSpec::doubling();
        let grid: Vec<f64> = (4..=14).map(|i| 2f64.powi(-i)).collect();
        let mut slopes = Vec::new();
        for s in 0..40 {
            let x = OrbitPoint::sample(&mut sample_rng(99, s), 1, 1 << 20);
            let e = return_exponents(&sys, &x, &grid, 1 << 19).unwrap();
            slopes.push(e.slope);
        }
        let mean = slopes.iter().sum::<f64>() / slopes.len() as f64;
        assert!((mean - 1.0).abs() < 0.2, "mean slope {mean}");
    }

    #[test]
    fn boshernitzan_checkpoints() {
        let d = vec![1u64 << 62, 1 << 60, 1 << 63];
        let v = boshernitzan_running(&d, 1.0, &[1, 2, 3]);
        assert_eq!(v, vec![0.25, 2.0 * 2f64.powi(-4), 2.0 * 2f64.powi(-4)]);
        let sys = SystemSpec::doubling();
        assert_eq!(
            boshernitzan_statistic(&sys, &OrbitPoint::from_ratio(1, 3), 1.0, 5).unwrap(),
            0.0
        );
    }

    #[test]
    fn csv_shape() {
        let s = orbit_csv(&SystemSpec::doubling(), &OrbitPoint::from_ratio(1, 5), 4).unwrap();
        let lines: Vec<_> = s.lines().collect();
        assert_eq!(lines.len(), 6);
        assert_eq!(lines[0], "k,x0,dist");
        assert_eq!(lines[5], "4,0.2,0");
        assert_eq!(lines[1], "0,0.2,0");
    }
}
