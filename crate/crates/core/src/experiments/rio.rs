use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::Serialize;

use super::{
    log_grid, map_samples, sample_bits, Estimate, ExperimentReport, Outcome, Row, SampleOptions, Verdict, Weighting,
    Window, FULL_MEASURE_FLOOR,
};
use crate::circle::{rational_to_f64, IntervalSet, RadiusSequence};
use crate::dynamics::{scaled_threshold, SystemSpec};
use crate::error::{Error, Result};
use crate::exact::build_recurrence_set;
use crate::nt::{eigen_moduli, screen_roots_of_unity, to_imat};
use crate::transfer::{correlation_decay_fit, TestFamily};

/// Terms summed explicitly before the integral tail takes over.
const TAIL_TERMS: u64 = 100_000;

/// Upper bounds on `μ(E_n)` available for a system.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub(crate) struct MeasureModel {
    /// Density bound: `μ(E_n) ≤ c·(2r_n)^d` up to the terms below.
    pub c: f64,
    /// Fitted `(C, τ)` adding `C e^{−τn}`.
    pub decay: Option<(f64, f64)>,
    /// Smallest branch slope of a full-branch map; adds the factor `sⁿ/(sⁿ − 1)`.
    pub min_slope: Option<f64>,
    pub dim: usize,
}

impl MeasureModel {
    /// `None` when no bound on `μ(E_n)` is known (rotations, toral maps with
    /// a root-of-unity eigenvalue).
    pub fn for_system(sys: &SystemSpec, weighting: &Weighting) -> Result<Option<Self>> {
        let dim = sys.dimension();
        let base = MeasureModel {
            c: 1.0,
            decay: None,
            min_slope: None,
            dim,
        };
        Ok(match sys {
            SystemSpec::IntegerCircleMap { .. } => Some(base),
            SystemSpec::ToralLinear { matrix } => match screen_roots_of_unity(&to_imat(matrix)?) {
                Ok(()) => Some(base),
                Err(Error::RootOfUnity { .. }) => None,
                Err(e) => return Err(e),
            },
            SystemSpec::Rotation { .. } => None,
            SystemSpec::PiecewiseLinear(m) if sys.preserves_lebesgue() => Some(MeasureModel {
                min_slope: Some(rational_to_f64(&m.min_expansion())),
                ..base
            }),
            _ => {
                let Some(op) = weighting.operator() else {
                    return Ok(None);
                };
                let c = op.density_bounds()?.c;
                let fam = TestFamily::for_bins(op.bins);
                let decay = correlation_decay_fit(op, fam, fam.default_n_max())
                    .ok()
                    .filter(|f| f.tau.is_finite() && f.tau > 0.0)
                    .map(|f| (f.c, f.tau));
                Some(MeasureModel { c, decay, ..base })
            }
        })
    }

    /// Upper bound on `μ(E_n)` at radius `r`.
    pub fn term(&self, n: u64, r: f64) -> f64 {
        let mut t = self.c * (2.0 * r).powi(self.dim as i32);
        if let Some(s) = self.min_slope {
            let sn = s.powf(n as f64);
            t *= sn / (sn - 1.0);
        }
        if let Some((c, tau)) = self.decay {
            t += c * (-tau * n as f64).exp();
        }
        t.min(1.0)
    }
}

/// `Σ_{n=k}^{N} min(1, bound on μ(E_n))`, the easy Borel–Cantelli bound on
/// `μ(⋃_{n=k}^N E_n)` for the Lebesgue case (`c = 1`, no decay term).
pub fn easy_bound(seq: &RadiusSequence, k: u64, n: u64, dim: usize) -> Result<f64> {
    let m = MeasureModel {
        c: 1.0,
        decay: None,
        min_slope: None,
        dim,
    };
    sum_terms(&m, seq, k, n)
}

fn sum_terms(m: &MeasureModel, seq: &RadiusSequence, k: u64, n: u64) -> Result<f64> {
    let mut s = 0.0;
    for i in k..=n {
        s += m.term(i, seq.eval_f64(i)?);
    }
    Ok(s)
}

/// Whether `Σ r_n^d` diverges; `None` when the family gives no answer.
fn diverges(seq: &RadiusSequence, dim: usize) -> Option<bool> {
    let d = BigRational::from_integer(dim.into());
    match seq {
        RadiusSequence::PowerLaw { gamma, .. } => Some(gamma * &d <= BigRational::one()),
        RadiusSequence::PowerLog { theta, .. } => Some(dim == 1 && *theta <= BigRational::one()),
        RadiusSequence::Ear { .. } => (dim == 1).then_some(true),
        RadiusSequence::ExplicitTable(_) => Some(false),
    }
}

/// `Σ_{n≥k} min(1, (2r_n)^d)`: explicit terms, then `f(K) + ∫_K^∞ f` for the
/// decreasing families. `None` when the series diverges or has no closed tail.
pub fn tail_sum(seq: &RadiusSequence, k: u64, dim: usize) -> Result<Option<f64>> {
    if k == 0 {
        return Err(Error::param("k", "must be at least 1"));
    }
    if let Some(len) = seq.max_index() {
        return Ok(Some(if k as usize > len {
            0.0
        } else {
            easy_bound(seq, k, len as u64, dim)?
        }));
    }
    if diverges(seq, dim) != Some(false) {
        return Ok(None);
    }
    let big_k = k.max(3) + TAIL_TERMS;
    let head = easy_bound(seq, k, big_k - 1, dim)?;
    let df = dim as f64;
    let kf = big_k as f64;
    let at_k = (2.0 * seq.eval_f64(big_k)?).powf(df);
    let integral = match seq {
        RadiusSequence::PowerLaw { kappa, gamma } => {
            let e = rational_to_f64(gamma) * df;
            (2.0 * rational_to_f64(kappa)).powf(df) * kf.powf(1.0 - e) / (e - 1.0)
        }
        RadiusSequence::PowerLog { kappa, theta } if dim == 1 => {
            let t = rational_to_f64(theta);
            2.0 * rational_to_f64(kappa) * kf.ln().powf(1.0 - t) / (t - 1.0)
        }
        // (ln x)^θ ≥ 1 past e, so x^{−d} dominates.
        RadiusSequence::PowerLog { kappa, .. } => {
            (2.0 * rational_to_f64(kappa)).powf(df) * kf.powf(1.0 - df) / (df - 1.0)
        }
        _ => return Ok(None),
    };
    Ok(Some(head + at_k + integral))
}

/// Which result predicts full measure for a divergent sequence, if any.
fn full_measure_theorem(sys: &SystemSpec, seq: &RadiusSequence) -> Result<Option<&'static str>> {
    if diverges(seq, sys.dimension()) != Some(true) {
        return Ok(None);
    }
    Ok(match sys {
        SystemSpec::IntegerCircleMap { .. } => Some("dichotomy for integer maps: Σ r_n = ∞ ⇒ full measure"),
        SystemSpec::ToralLinear { matrix } => {
            let outside = eigen_moduli(matrix)?.iter().all(|&m| m > 1.0 + 1e-9);
            outside.then_some("toral dichotomy, every eigenvalue outside the unit circle: Σ r_n^d = ∞ ⇒ full measure")
        }
        SystemSpec::BetaMap { .. } | SystemSpec::PiecewiseLinear(_) => {
            let rate_ok = match seq {
                RadiusSequence::PowerLaw { gamma, .. } => *gamma <= BigRational::one(),
                RadiusSequence::PowerLog { theta, .. } => *theta < BigRational::new(1.into(), 2.into()),
                _ => false,
            };
            rate_ok.then_some("expanding interval maps: r_n ≥ κ/(n (log n)^θ), θ < 1/2 ⇒ full measure")
        }
        SystemSpec::Rotation { .. } => None,
    })
}

/// Structural warnings for the expanding-map hypotheses.
fn hypothesis_warnings(sys: &SystemSpec) -> Vec<String> {
    let mut w = Vec::new();
    if let SystemSpec::PiecewiseLinear(m) = sys {
        let ok = m
            .branches()
            .iter()
            .all(|b| b.slope > BigRational::zero() && b.image().0.is_zero());
        if !ok {
            w.push(
                "large-image property not established: some branch is decreasing or its image does not start at 0"
                    .into(),
            );
        }
    }
    if !sys.is_expanding() {
        w.push("system is not expanding; recurrence predictions do not apply".into());
    }
    w
}

/// `μ(⋃_{n=k}^{N'} E_n)` at each checkpoint `N'`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RioEstimate {
    pub sequence: String,
    pub k: u64,
    pub n: u64,
    pub estimate: Estimate,
    pub by_horizon: Vec<(u64, Estimate)>,
}

fn check_window(seq: &RadiusSequence, k: u64, n: u64, opts: &SampleOptions) -> Result<()> {
    opts.check(100)?;
    if k == 0 || n < k {
        return Err(Error::param("window", format!("need 1 ≤ k ≤ N, got k = {k}, N = {n}")));
    }
    if let Some(len) = seq.max_index() {
        if n as usize > len {
            return Err(Error::param("N", format!("radius table has only {len} entries")));
        }
    }
    Ok(())
}

fn thresholds(seq: &RadiusSequence, k: u64, n: u64) -> Result<Vec<u128>> {
    (k..=n).map(|i| seq.eval_f64(i).map(scaled_threshold)).collect()
}

/// First `n ≥ k` with `d(Tⁿx, x) < r_n`.
fn first_hit(d: &[u64], k: u64, t: &[u128]) -> Option<u64> {
    let off = (k - 1) as usize;
    d[off..off + t.len()]
        .iter()
        .zip(t)
        .position(|(&di, &ti)| (di as u128) < ti)
        .map(|i| k + i as u64)
}

fn tabulate(sequence: String, k: u64, n: u64, hits: &[Option<u64>], weights: &[f64]) -> RioEstimate {
    let by_horizon: Vec<(u64, Estimate)> = log_grid(k, n, 4)
        .into_iter()
        .map(|h| {
            (
                h,
                Estimate::weighted(weights, hits.iter().map(|f| f.is_some_and(|v| v <= h))),
            )
        })
        .collect();
    RioEstimate {
        sequence,
        k,
        n,
        estimate: by_horizon.last().expect("non-empty grid").1,
        by_horizon,
    }
}

/// Monte Carlo `μ(⋃_{n=k}^N E_n)`, reweighted by the Ulam density when
/// Lebesgue measure is not invariant.
pub fn rio_estimate(
    sys: &SystemSpec,
    seq: &RadiusSequence,
    k: u64,
    n: u64,
    opts: &SampleOptions,
) -> Result<RioEstimate> {
    check_window(seq, k, n, opts)?;
    let weighting = Weighting::for_system(sys, opts.ulam_bins)?;
    rio_with(sys, seq, k, n, opts, &weighting)
}

fn rio_with(
    sys: &SystemSpec,
    seq: &RadiusSequence,
    k: u64,
    n: u64,
    opts: &SampleOptions,
    weighting: &Weighting,
) -> Result<RioEstimate> {
    let t = thresholds(seq, k, n)?;
    let (hits, w) = map_samples(sys, n as usize, opts, weighting, |d| first_hit(d, k, &t))?;
    Ok(tabulate(seq.to_string(), k, n, &hits, &w))
}

fn push_rows(rep: &mut ExperimentReport, e: &RioEstimate) {
    for (h, est) in &e.by_horizon {
        rep.rows.push(Row::from_estimate(&e.sequence, *h as f64, est));
    }
}

/// Verdicts for one truncated estimate: the easy-direction bound, and the
/// full-measure prediction when the sum diverges and a result covers it.
fn judge(
    sys: &SystemSpec,
    seq: &RadiusSequence,
    e: &RioEstimate,
    model: Option<&MeasureModel>,
) -> Result<(Vec<Verdict>, Option<f64>)> {
    let mut out = Vec::new();
    let bound = match model {
        Some(m) => {
            let b = sum_terms(m, seq, e.k, e.n)?;
            out.push(Verdict::check(
                format!("{}: estimate ≤ Σ_{{n=k}}^N μ(E_n) bound", e.sequence),
                e.estimate.below(b),
                format!("estimate {} vs bound {b}", e.estimate.estimate),
            ));
            Some(b)
        }
        None => None,
    };
    match full_measure_theorem(sys, seq)? {
        Some(th) => out.push(Verdict::check(
            format!("{}: {th}", e.sequence),
            e.estimate.ci_high >= FULL_MEASURE_FLOOR,
            format!("ci_high {} vs floor {FULL_MEASURE_FLOOR}", e.estimate.ci_high),
        )),
        None if diverges(seq, sys.dimension()) == Some(true) => out.push(Verdict::with(
            format!("{}: divergent sum", e.sequence),
            Outcome::Exploratory,
            "no result covers this system and rate",
        )),
        None => {}
    }
    Ok((out, bound))
}

fn base_report(name: &str, sys: &SystemSpec, k: u64, n: u64, opts: &SampleOptions) -> Result<ExperimentReport> {
    let mut rep = ExperimentReport::new(name, sys, Window::Recurrence { k, n }, opts);
    rep.precision_bits = Some(sample_bits(sys, n as usize, opts.precision_bits)?);
    rep.warnings = hypothesis_warnings(sys);
    Ok(rep)
}

/// Truncated `μ(R_io)`: the fraction of points with some `n ∈ [k, N]` and
/// `d(Tⁿx, x) < r_n`.
pub fn rio_truncated_measure(
    sys: &SystemSpec,
    seq: &RadiusSequence,
    k: u64,
    n: u64,
    opts: &SampleOptions,
) -> Result<ExperimentReport> {
    check_window(seq, k, n, opts)?;
    let weighting = Weighting::for_system(sys, opts.ulam_bins)?;
    let model = MeasureModel::for_system(sys, &weighting)?;
    let e = rio_with(sys, seq, k, n, opts, &weighting)?;
    let mut rep = base_report("rio", sys, k, n, opts)?;
    rep.sequences.push(seq.to_string());
    push_rows(&mut rep, &e);
    let (verdicts, bound) = judge(sys, seq, &e, model.as_ref())?;
    rep.verdicts = verdicts;
    rep.detail("estimate", e.estimate);
    rep.detail("window_bound", bound);
    rep.detail("tail_sum", tail_sum(seq, k, sys.dimension())?);
    rep.detail("measure_model", &model);
    Ok(rep)
}

/// Convergent and divergent sequences on the same sample points.
pub fn rio_dichotomy(
    sys: &SystemSpec,
    seq_conv: &RadiusSequence,
    seq_div: &RadiusSequence,
    k: u64,
    n: u64,
    opts: &SampleOptions,
) -> Result<ExperimentReport> {
    check_window(seq_conv, k, n, opts)?;
    check_window(seq_div, k, n, opts)?;
    let dim = sys.dimension();
    if diverges(seq_conv, dim) == Some(true) {
        return Err(Error::param("seq_conv", format!("Σ r_n^{dim} diverges for {seq_conv}")));
    }
    if diverges(seq_div, dim) == Some(false) {
        return Err(Error::param("seq_div", format!("Σ r_n^{dim} converges for {seq_div}")));
    }
    let weighting = Weighting::for_system(sys, opts.ulam_bins)?;
    let model = MeasureModel::for_system(sys, &weighting)?;
    let (tc, td) = (thresholds(seq_conv, k, n)?, thresholds(seq_div, k, n)?);
    let (hits, w) = map_samples(sys, n as usize, opts, &weighting, |d| {
        (first_hit(d, k, &tc), first_hit(d, k, &td))
    })?;
    let hc: Vec<Option<u64>> = hits.iter().map(|h| h.0).collect();
    let hd: Vec<Option<u64>> = hits.iter().map(|h| h.1).collect();
    let ec = tabulate(seq_conv.to_string(), k, n, &hc, &w);
    let ed = tabulate(seq_div.to_string(), k, n, &hd, &w);

    let mut rep = base_report("rio-dichotomy", sys, k, n, opts)?;
    rep.sequences = vec![ec.sequence.clone(), ed.sequence.clone()];
    push_rows(&mut rep, &ec);
    push_rows(&mut rep, &ed);
    let tail = tail_sum(seq_conv, k, dim)?;
    if let Some(t) = tail {
        let slack = super::CI_SLACK_WIDTHS * ec.estimate.width();
        rep.verdicts.push(Verdict::check(
            format!(
                "{}: estimate ≤ Σ_{{n≥k}} (2r_n)^d + {} CI widths",
                ec.sequence,
                super::CI_SLACK_WIDTHS
            ),
            ec.estimate.estimate <= t + slack,
            format!("estimate {} vs tail {t} + {slack}", ec.estimate.estimate),
        ));
    }
    let (vc, _) = judge(sys, seq_conv, &ec, model.as_ref())?;
    let (vd, _) = judge(sys, seq_div, &ed, model.as_ref())?;
    rep.verdicts.extend(vc);
    rep.verdicts.extend(vd);
    let sep = ed.estimate.estimate - ec.estimate.estimate;
    rep.verdicts.push(Verdict::check(
        "separation ≥ 1/2",
        sep >= 0.5,
        format!(
            "divergent {} − convergent {} = {sep}",
            ed.estimate.estimate, ec.estimate.estimate
        ),
    ));
    rep.detail("convergent", ec.estimate);
    rep.detail("divergent", ed.estimate);
    rep.detail("separation", sep);
    rep.detail("tail_sum", tail);
    Ok(rep)
}

/// `r_n = κ/(n (ln n)^θ)` over a grid of `θ`, one sample set for all.
pub fn rio_rate_scan(
    sys: &SystemSpec,
    thetas: &[BigRational],
    kappa: &BigRational,
    k: u64,
    n: u64,
    opts: &SampleOptions,
) -> Result<ExperimentReport> {
    if thetas.is_empty() {
        return Err(Error::param("theta", "grid is empty"));
    }
    let seqs = thetas
        .iter()
        .map(|t| RadiusSequence::power_log(kappa.clone(), t.clone()))
        .collect::<Result<Vec<_>>>()?;
    check_window(&seqs[0], k, n, opts)?;
    let weighting = Weighting::for_system(sys, opts.ulam_bins)?;
    let model = MeasureModel::for_system(sys, &weighting)?;
    let ts = seqs.iter().map(|s| thresholds(s, k, n)).collect::<Result<Vec<_>>>()?;
    let (hits, w) = map_samples(sys, n as usize, opts, &weighting, |d| {
        ts.iter().map(|t| first_hit(d, k, t)).collect::<Vec<_>>()
    })?;
    let mut rep = base_report("rio-rate-scan", sys, k, n, opts)?;
    let half = BigRational::new(1.into(), 2.into());
    let mut estimates = Vec::new();
    for (i, (seq, theta)) in seqs.iter().zip(thetas).enumerate() {
        let h: Vec<Option<u64>> = hits.iter().map(|v| v[i]).collect();
        let e = tabulate(seq.to_string(), k, n, &h, &w);
        rep.sequences.push(e.sequence.clone());
        rep.rows
            .push(Row::from_estimate("theta", rational_to_f64(theta), &e.estimate));
        let label = format!("θ = {theta}");
        if *theta < half {
            let (v, _) = judge(sys, seq, &e, model.as_ref())?;
            rep.verdicts.extend(v.into_iter().map(|mut v| {
                v.claim = format!("{label}: {}", v.claim);
                v
            }));
        } else if *theta > BigRational::one() {
            let (v, _) = judge(sys, seq, &e, model.as_ref())?;
            rep.verdicts.extend(v);
        } else {
            rep.verdicts.push(Verdict::with(
                format!("{label}: between the proven rates"),
                Outcome::Open,
                format!(
                    "estimate {}; full measure is neither proven nor excluded for 1/2 ≤ θ ≤ 1",
                    e.estimate.estimate
                ),
            ));
        }
        estimates.push((rational_to_f64(theta), e.estimate));
    }
    rep.detail("kappa", rational_to_f64(kappa));
    rep.detail("estimates", estimates);
    Ok(rep)
}

/// Exact `μ(⋃_{n=k}^N E_n)` for `T x = a x mod 1`.
pub fn rio_exact(a: i64, seq: &RadiusSequence, k: u64, n: u64, budget: usize) -> Result<BigRational> {
    if k == 0 || n < k {
        return Err(Error::param("window", format!("need 1 ≤ k ≤ N, got k = {k}, N = {n}")));
    }
    let sets = (k..=n)
        .map(|i| build_recurrence_set(a, i, &seq.eval_rational(i)?, budget).map(|e| e.set))
        .collect::<Result<Vec<_>>>()?;
    let u = IntervalSet::union_all(sets.iter());
    if u.arc_count() > budget {
        return Err(Error::ArcBudgetExceeded {
            what: format!("⋃_{{n={k}}}^{n} E_n"),
            required: u.arc_count().to_string(),
            limit: budget,
        });
    }
    Ok(u.measure())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::Real;
    use crate::exact::DEFAULT_ARC_BUDGET;
    use crate::experiments::Z99;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    #[test]
    fn constant_half_hits_everything() {
        let seq = RadiusSequence::constant(q(1, 2)).unwrap();
        let e = rio_estimate(&SystemSpec::doubling(), &seq, 1, 1, &SampleOptions::new(200, 3)).unwrap();
        assert_eq!(e.estimate.estimate, 1.0);
    }

    #[test]
    fn matches_exact_union_within_ci() {
        let seq = RadiusSequence::power_law(q(1, 4), q(1, 1)).unwrap();
        for (k, n) in [(1u64, 6u64), (3, 12), (8, 14)] {
            let exact = rational_to_f64(&rio_exact(2, &seq, k, n, DEFAULT_ARC_BUDGET).unwrap());
            let opts = SampleOptions::new(4000, 11 + k);
            let e = rio_estimate(&SystemSpec::doubling(), &seq, k, n, &opts).unwrap();
            let (lo, hi) = crate::experiments::wilson(e.estimate.estimate, 4000.0, Z99);
            assert!(
                lo <= exact && exact <= hi,
                "k={k} N={n}: {} vs {exact}",
                e.estimate.estimate
            );
        }
    }

    #[test]
    fn exact_union_of_single_set_is_two_r() {
        let seq = RadiusSequence::power_law(q(1, 4), q(1, 1)).unwrap();
        assert_eq!(rio_exact(3, &seq, 5, 5, DEFAULT_ARC_BUDGET).unwrap(), q(1, 10));
    }

    #[test]
    fn monotone_in_horizon_and_start() {
        let seq = RadiusSequence::power_law(q(1, 2), q(1, 1)).unwrap();
        let opts = SampleOptions::new(500, 5);
        let e = rio_estimate(&SystemSpec::doubling(), &seq, 10, 2000, &opts).unwrap();
        assert!(e.by_horizon.windows(2).all(|w| w[0].1.estimate <= w[1].1.estimate));
        let later = rio_estimate(&SystemSpec::doubling(), &seq, 100, 2000, &opts).unwrap();
        assert!(later.estimate.estimate <= e.estimate.estimate);
    }

    #[test]
    fn tail_sums_against_closed_forms() {
        // Σ_{n≥50} 1/n² = π²/6 − Σ_{n<50} 1/n².
        let zeta_tail = std::f64::consts::PI.powi(2) / 6.0 - (1..50).map(|n| 1.0 / (n * n) as f64).sum::<f64>();
        let seq = RadiusSequence::power_law(q(1, 1), q(2, 1)).unwrap();
        let t = tail_sum(&seq, 50, 1).unwrap().unwrap();
        assert!((t - 2.0 * zeta_tail).abs() < 1e-9, "{t}");
        let div = RadiusSequence::power_law(q(1, 2), q(1, 1)).unwrap();
        assert_eq!(tail_sum(&div, 50, 1).unwrap(), None);
        // In two dimensions 1/(2n) is summable: Σ_{n≥k} 1/n² again.
        let t2 = tail_sum(&div, 50, 2).unwrap().unwrap();
        assert!((t2 - zeta_tail).abs() < 1e-9, "{t2}");
        let conv = RadiusSequence::power_log(q(1, 1), q(2, 1)).unwrap();
        let t = tail_sum(&conv, 50, 1).unwrap().unwrap();
        // ∫_{50}^∞ 2/(x ln² x) = 2/ln 50 ≈ 0.511 brackets the sum.
        assert!(
            t > 2.0 / 51f64.ln() && t < 2.0 / 49f64.ln() + 2.0 / (50.0 * 50f64.ln().powi(2)),
            "{t}"
        );
    }

    #[test]
    fn divergent_doubling_is_high() {
        let seq = RadiusSequence::power_law(q(1, 2), q(1, 1)).unwrap();
        let rep = rio_truncated_measure(&SystemSpec::doubling(), &seq, 50, 5000, &SampleOptions::new(2000, 1)).unwrap();
        assert!(rep.details["estimate"]["estimate"].as_f64().unwrap() >= 0.9);
        assert!(rep.passed(), "{:?}", rep.verdicts);
    }

    #[test]
    fn convergent_doubling_under_tail() {
        let seq = RadiusSequence::power_law(q(1, 1), q(2, 1)).unwrap();
        let rep = rio_truncated_measure(&SystemSpec::doubling(), &seq, 50, 5000, &SampleOptions::new(2000, 2)).unwrap();
        assert!(rep.passed(), "{:?}", rep.verdicts);
        let e = rep.rows.last().unwrap();
        assert!(e.estimate <= 0.04 + 3.0 * (e.ci_high - e.ci_low));
    }

    #[test]
    fn rate_scan_flags_open_gap() {
        let grid = [q(2, 5), q(3, 4), q(3, 2)];
        let rep = rio_rate_scan(
            &SystemSpec::doubling(),
            &grid,
            &q(1, 1),
            50,
            2000,
            &SampleOptions::new(400, 9),
        )
        .unwrap();
        assert_eq!(rep.rows.len(), 3);
        assert!(rep
            .verdicts
            .iter()
            .any(|v| v.outcome == Outcome::Open && v.claim.contains("3/4")));
        assert!(rep.rows[0].estimate >= rep.rows[2].estimate);
    }

    #[test]
    fn dichotomy_rejects_swapped_sequences() {
        let conv = RadiusSequence::power_log(q(1, 1), q(2, 1)).unwrap();
        let div = RadiusSequence::power_law(q(1, 2), q(1, 1)).unwrap();
        let o = SampleOptions::new(100, 0);
        assert!(rio_dichotomy(&SystemSpec::doubling(), &div, &conv, 10, 100, &o).is_err());
    }

    #[test]
    fn beta_map_weighted_by_density() {
        let sys = SystemSpec::beta(Real::golden()).unwrap();
        let seq = RadiusSequence::power_law(q(1, 2), q(1, 1)).unwrap();
        let rep = rio_truncated_measure(
            &sys,
            &seq,
            20,
            400,
            &SampleOptions {
                ulam_bins: 1024,
                ..SampleOptions::new(300, 4)
            },
        )
        .unwrap();
        assert!(rep.details["measure_model"]["c"].as_f64().unwrap() > 1.38);
        assert!(rep.passed(), "{:?}", rep.verdicts);
    }

    #[test]
    fn rotation_has_no_bound() {
        let sys = SystemSpec::Rotation { alpha: Real::golden() };
        let seq = RadiusSequence::power_law(q(1, 2), q(1, 1)).unwrap();
        let rep = rio_truncated_measure(&sys, &seq, 1, 50, &SampleOptions::new(100, 0)).unwrap();
        assert!(rep.verdicts.iter().all(|v| v.outcome == Outcome::Exploratory));
        assert!(!rep.warnings.is_empty());
    }
}
