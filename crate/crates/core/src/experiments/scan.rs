use serde::Serialize;

use super::{
    map_samples, sample_bits, Estimate, ExperimentReport, Outcome, Row, SampleOptions, Verdict, Weighting, Window, Z95,
};
use crate::circle::RadiusSequence;
use crate::dynamics::{boshernitzan_running, scaled_threshold, SystemSpec};
use crate::error::{Error, Result};
use crate::transfer::{build_ulam, correlation_decay_fit, TestFamily};

/// Median of sorted values with the distribution-free 95% interval from
/// binomial order statistics.
fn median_ci(sorted: &[f64]) -> (f64, f64, f64) {
    let n = sorted.len();
    let med = if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    };
    let half = Z95 * (n as f64).sqrt() / 2.0;
    let lo = ((n as f64 / 2.0 - half).floor() as usize).clamp(1, n);
    let hi = ((n as f64 / 2.0 + half).ceil() as usize).clamp(1, n);
    (med, sorted[lo - 1], sorted[hi - 1])
}

/// Per-`α` medians of `min_{k≤N} k^{1/α} d(T^k x, x)` at each checkpoint `N`.
/// Samples that return exactly (periodic points) are excluded.
pub fn boshernitzan_scan(
    sys: &SystemSpec,
    alphas: &[f64],
    checkpoints: &[u64],
    opts: &SampleOptions,
) -> Result<ExperimentReport> {
    opts.check(10)?;
    if alphas.is_empty() || alphas.iter().any(|&a| !(a > 0.0)) {
        return Err(Error::param("alpha", "grid must be non-empty and positive"));
    }
    if checkpoints.is_empty() || checkpoints[0] == 0 || checkpoints.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::param("checkpoints", "must be positive and strictly increasing"));
    }
    let cps: Vec<usize> = checkpoints.iter().map(|&c| c as usize).collect();
    let horizon = *cps.last().expect("non-empty");
    let (stats, _) = map_samples(sys, horizon, opts, &Weighting::Lebesgue, |d| {
        (!d.contains(&0)).then(|| {
            alphas
                .iter()
                .map(|&a| boshernitzan_running(d, a, &cps))
                .collect::<Vec<_>>()
        })
    })?;
    let kept: Vec<&Vec<Vec<f64>>> = stats.iter().flatten().collect();
    let excluded = stats.len() - kept.len();
    if kept.len() < 10 {
        return Err(Error::param(
            "samples",
            format!("only {} non-periodic samples", kept.len()),
        ));
    }

    let mut rep = ExperimentReport::new(
        "boshernitzan",
        sys,
        Window::Checkpoints {
            n: checkpoints.to_vec(),
        },
        opts,
    );
    rep.precision_bits = Some(sample_bits(sys, horizon, opts.precision_bits)?);
    let dim = sys.dimension() as f64;
    let mut medians = Vec::new();
    for (ai, &alpha) in alphas.iter().enumerate() {
        let series = format!("alpha={alpha}");
        let mut meds = Vec::new();
        for (ci, &n) in checkpoints.iter().enumerate() {
            let mut v: Vec<f64> = kept.iter().map(|s| s[ai][ci]).collect();
            v.sort_by(f64::total_cmp);
            let (m, lo, hi) = median_ci(&v);
            rep.rows.push(Row {
                series: series.clone(),
                x: n as f64,
                estimate: m,
                ci_low: lo,
                ci_high: hi,
                samples: v.len(),
            });
            meds.push(m);
        }
        let (first, last) = (meds[0], *meds.last().expect("non-empty"));
        let label = format!("α = {alpha}");
        if alpha > dim {
            rep.verdicts.push(Verdict::check(
                format!("{label} > dimension: median decreases in N"),
                last < first,
                format!("median {first} at N = {} vs {last} at N = {}", checkpoints[0], horizon),
            ));
        } else if alpha == dim {
            let max = meds.iter().copied().fold(f64::MIN, f64::max);
            let min = meds.iter().copied().fold(f64::MAX, f64::min);
            rep.verdicts.push(Verdict::check(
                format!("{label} = dimension: medians bounded within a factor 2"),
                max <= 2.0 * min,
                format!("medians range over [{min}, {max}]"),
            ));
        } else {
            rep.verdicts.push(Verdict::with(
                format!("{label} < dimension"),
                Outcome::Exploratory,
                "no finiteness claim",
            ));
        }
        medians.push((alpha, meds));
    }
    if !sys.preserves_lebesgue() {
        rep.warnings
            .push("medians are over Lebesgue-sampled points, not the invariant measure".into());
    }
    rep.detail("excluded_periodic", excluded);
    rep.detail("medians", medians);
    Ok(rep)
}

/// `μ(E_n)` against `[c⁻¹r_n − Ce^{−τn}, 2c r_n + Ce^{−τn}]`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SandwichRow {
    pub n: u64,
    pub r: f64,
    pub estimate: Estimate,
    pub lower: f64,
    pub upper: f64,
    pub within: bool,
}

/// Fraction of tested `n` that must fall inside the sandwich.
const SANDWICH_FRACTION: f64 = 0.95;

/// Monte Carlo `μ(E_n)` for `n = 1..=n_max`, weighted by the Ulam density,
/// checked against the density constant `c` and the fitted decay `(C, τ)`.
pub fn measure_sandwich(
    sys: &SystemSpec,
    seq: &RadiusSequence,
    n_max: u64,
    opts: &SampleOptions,
) -> Result<(ExperimentReport, Vec<SandwichRow>)> {
    opts.check(100)?;
    if n_max == 0 {
        return Err(Error::param("n_max", "must be positive"));
    }
    let op = build_ulam(sys, opts.ulam_bins)?;
    let c = op.density_bounds()?.c;
    let fam = TestFamily::for_bins(op.bins);
    let fit = correlation_decay_fit(&op, fam, fam.default_n_max())?;
    if !(fit.tau > 0.0) {
        return Err(Error::param(
            "system",
            format!("correlation fit gives no decay (τ = {})", fit.tau),
        ));
    }
    let t: Vec<u128> = (1..=n_max)
        .map(|n| seq.eval_f64(n).map(scaled_threshold))
        .collect::<Result<_>>()?;
    let weighting = Weighting::Ulam(Box::new(op));
    let (hits, w) = map_samples(sys, n_max as usize, opts, &weighting, |d| {
        d.iter().zip(&t).map(|(&di, &ti)| (di as u128) < ti).collect::<Vec<_>>()
    })?;

    let mut rep = ExperimentReport::new("sandwich", sys, Window::Steps { n_max }, opts);
    rep.precision_bits = Some(sample_bits(sys, n_max as usize, opts.precision_bits)?);
    rep.sequences.push(seq.to_string());
    let mut rows = Vec::new();
    for n in 1..=n_max {
        let i = (n - 1) as usize;
        let e = Estimate::weighted(&w, hits.iter().map(|h| h[i]));
        let r = seq.eval_f64(n)?;
        let tail = fit.c * (-fit.tau * n as f64).exp();
        let lower = r / c - tail;
        let upper = 2.0 * c * r + tail;
        rep.rows.push(Row::from_estimate("estimate", n as f64, &e));
        rep.rows.push(Row::exact("lower", n as f64, lower));
        rep.rows.push(Row::exact("upper", n as f64, upper));
        rows.push(SandwichRow {
            n,
            r,
            estimate: e,
            lower,
            upper,
            within: lower <= e.estimate && e.estimate <= upper,
        });
    }
    let inside = rows.iter().filter(|r| r.within).count();
    let frac = inside as f64 / rows.len() as f64;
    rep.verdicts.push(Verdict::check(
        format!("μ(E_n) inside the sandwich for ≥ {}% of n", SANDWICH_FRACTION * 100.0),
        frac >= SANDWICH_FRACTION,
        format!("{inside} of {} inside", rows.len()),
    ));
    rep.detail("c", c);
    rep.detail("decay_c", fit.c);
    rep.detail("tau", fit.tau);
    rep.detail("fraction_inside", frac);
    Ok((rep, rows))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::Real;
    use num_rational::BigRational;

    #[test]
    fn median_interval_ranks() {
        let v: Vec<f64> = (1..=100).map(|i| i as f64).collect();
        let (m, lo, hi) = median_ci(&v);
        assert_eq!(m, 50.5);
        // 50 ∓ 1.96·5 → ranks 40 and 60.
        assert_eq!((lo, hi), (40.0, 60.0));
    }

    #[test]
    fn doubling_medians_trend() {
        let rep = boshernitzan_scan(
            &SystemSpec::doubling(),
            &[1.0, 2.0],
            &[100, 1000, 10_000],
            &SampleOptions::new(300, 8),
        )
        .unwrap();
        assert!(rep.passed(), "{:?}", rep.verdicts);
        assert_eq!(rep.rows.len(), 6);
    }

    #[test]
    fn periodic_points_excluded() {
        // At 128 bits every sample is dyadic, and 2^{128}x = 0; the horizon
        // stays below that, so nothing is excluded.
        let rep = boshernitzan_scan(&SystemSpec::doubling(), &[1.0], &[10, 20], &SampleOptions::new(50, 1)).unwrap();
        assert_eq!(rep.details["excluded_periodic"], serde_json::json!(0));
        let rational_rotation = SystemSpec::Rotation {
            alpha: Real::rational(BigRational::new(1.into(), 4.into())),
        };
        let err = boshernitzan_scan(&rational_rotation, &[1.0], &[10], &SampleOptions::new(50, 1)).unwrap_err();
        assert!(matches!(err, Error::InvalidParameter { .. }));
    }

    #[test]
    fn golden_sandwich_small() {
        let sys = SystemSpec::beta(Real::golden()).unwrap();
        let seq = RadiusSequence::default();
        let (rep, rows) = measure_sandwich(&sys, &seq, 12, &SampleOptions::new(2000, 3)).unwrap();
        assert_eq!(rows.len(), 12);
        assert!(rep.passed(), "{:?}", rows);
    }
}
