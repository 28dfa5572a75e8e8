use num_rational::BigRational;
use num_traits::One;
use serde::Serialize;

use super::rio::MeasureModel;
use super::{
    log_grid, map_samples, sample_bits, wilson, Estimate, ExperimentReport, Outcome, Row, SampleOptions, Verdict,
    Weighting, Window, Z99,
};
use crate::circle::{rational_to_f64, HRule, RadiusSequence};
use crate::dynamics::{scaled_threshold, SystemSpec};
use crate::error::{Error, Result};
use crate::exact::{build_ear_sets, ear_truncated_a};
use crate::report::ser_rational;

/// Horizons past this skip the exact cross-check (`C_m` has about `2^{m+1}` arcs).
const EXACT_EAR_MAX: u64 = 20;

fn check_window(seq: &RadiusSequence, n0: u64, horizon: u64) -> Result<()> {
    if n0 == 0 || horizon < n0 {
        return Err(Error::param(
            "window",
            format!("need 1 ≤ n0 ≤ M, got n0 = {n0}, M = {horizon}"),
        ));
    }
    if let Some(len) = seq.max_index() {
        if horizon as usize > len {
            return Err(Error::param("M", format!("radius table has only {len} entries")));
        }
    }
    Ok(())
}

/// First and last `m ∈ [n0, M]` with `ρ_m(x) ≥ r_m`.
fn failures(d: &[u64], n0: u64, t: &[u128]) -> Option<(u64, u64)> {
    let mut rho = u64::MAX;
    let mut first = None;
    let mut last = 0;
    for (i, &di) in d.iter().enumerate() {
        rho = rho.min(di);
        let m = i as u64 + 1;
        if m >= n0 && rho as u128 >= t[(m - n0) as usize] {
            first.get_or_insert(m);
            last = m;
        }
    }
    first.map(|f| (f, last))
}

/// Monte Carlo `μ(⋂_{m=n0}^M C_m)`, `C_m = {x : ρ_m(x) < r_m}`, with the
/// running minimum `ρ_m` of the return distances.
pub fn ear_truncated_measure(
    sys: &SystemSpec,
    seq: &RadiusSequence,
    n0: u64,
    horizon: u64,
    opts: &SampleOptions,
) -> Result<ExperimentReport> {
    opts.check(100)?;
    check_window(seq, n0, horizon)?;
    let weighting = Weighting::for_system(sys, opts.ulam_bins)?;
    let model = MeasureModel::for_system(sys, &weighting)?;
    let t: Vec<u128> = (n0..=horizon)
        .map(|m| seq.eval_f64(m).map(scaled_threshold))
        .collect::<Result<_>>()?;
    let (fails, w) = map_samples(sys, horizon as usize, opts, &weighting, |d| failures(d, n0, &t))?;

    let mut rep = ExperimentReport::new("ear", sys, Window::EventuallyAlways { n0, horizon }, opts);
    rep.precision_bits = Some(sample_bits(sys, horizon as usize, opts.precision_bits)?);
    rep.sequences.push(seq.to_string());
    let grid = log_grid(n0, horizon, 4);
    // A_{n0,M'} shrinks with M'; ⋂_{m=n0'}^M C_m grows with n0'.
    for &h in &grid {
        let e = Estimate::weighted(&w, fails.iter().map(|f| f.is_none_or(|(first, _)| first > h)));
        rep.rows.push(Row::from_estimate("horizon", h as f64, &e));
    }
    for &s in &grid {
        let e = Estimate::weighted(&w, fails.iter().map(|f| f.is_none_or(|(_, last)| last < s)));
        rep.rows.push(Row::from_estimate("start", s as f64, &e));
    }
    let est = Estimate::weighted(&w, fails.iter().map(Option::is_none));

    // μ(A) ≤ μ(C_m) ≤ Σ_{k≤m} μ(E_{k,m}) for every m; checked on the grid.
    if let Some(model) = &model {
        let mut bound = 1.0f64;
        for &m in &grid {
            let r = seq.eval_f64(m)?;
            let s: f64 = (1..=m).map(|k| model.term(k, r)).sum();
            bound = bound.min(s.min(1.0));
        }
        rep.verdicts.push(Verdict::check(
            "estimate ≤ min_m Σ_{k≤m} μ(E_{k,m}) bound",
            est.below(bound),
            format!("estimate {} vs bound {bound}", est.estimate),
        ));
        rep.detail("union_bound", bound);
    }
    if let SystemSpec::IntegerCircleMap { a } = sys {
        let exact = if horizon <= EXACT_EAR_MAX {
            match ear_truncated_a(*a, n0, horizon, seq, opts.arc_budget) {
                Ok(ex) => Some(ex),
                Err(Error::ArcBudgetExceeded { .. }) => {
                    rep.warnings
                        .push("exact cross-check skipped: arc budget too small".into());
                    None
                }
                Err(e) => return Err(e),
            }
        } else {
            None
        };
        if let Some(ex) = exact {
            let v = rational_to_f64(&ex.measure);
            let (lo, hi) = wilson(est.estimate, est.effective_samples, Z99);
            rep.verdicts.push(Verdict::check(
                "exact measure inside the 99% interval",
                lo <= v && v <= hi,
                format!("exact {v} vs [{lo}, {hi}]"),
            ));
            rep.detail("exact", v);
        }
    }
    if let Some(v) = trend_verdict(sys, seq) {
        rep.verdicts.push(v);
    }
    rep.detail("estimate", est);
    rep.detail("measure_model", &model);
    Ok(rep)
}

/// Predictions a finite window can only show as a trend.
fn trend_verdict(sys: &SystemSpec, seq: &RadiusSequence) -> Option<Verdict> {
    let doubling = matches!(sys, SystemSpec::IntegerCircleMap { a: 2 });
    let vanishing = match seq {
        RadiusSequence::PowerLaw { gamma, .. } => *gamma > BigRational::one(),
        RadiusSequence::PowerLog { theta, .. } => *theta > BigRational::from_integer(0.into()),
        _ => false,
    };
    let growing = matches!(
        seq,
        RadiusSequence::Ear {
            h: HRule::Log | HRule::LogLog,
            ..
        }
    );
    if doubling && vanishing {
        Some(Verdict::with(
            "m r_m → 0 ⇒ zero measure",
            Outcome::Exploratory,
            "limit statement; the finite window is checked through the union bound",
        ))
    } else if doubling && growing {
        Some(Verdict::with(
            "r_m = log(m) h(m)/m with h → ∞ ⇒ full measure",
            Outcome::Exploratory,
            "trend in the `start` series; a finite window cannot separate slowly growing h from a constant",
        ))
    } else {
        None
    }
}

/// Exact `μ(⋂_{m=n0}^M C_m)` for `T x = a x mod 1`, with the per-`m` union
/// bounds `μ(C_m) ≤ 2 m r_m` and `μ(∁C_m) ≥ 1 − 2 m r_m` checked exactly.
pub fn ear_exact(a: i64, seq: &RadiusSequence, n0: u64, horizon: u64, budget: usize) -> Result<ExperimentReport> {
    check_window(seq, n0, horizon)?;
    let sys = SystemSpec::integer_map(a)?;
    let opts = SampleOptions::new(0, 0);
    let mut rep = ExperimentReport::new("ear-exact", &sys, Window::EventuallyAlways { n0, horizon }, &opts);
    rep.sequences.push(seq.to_string());
    let trunc = ear_truncated_a(a, n0, horizon, seq, budget)?;
    let mut union_ok = true;
    let mut complement_ok = true;
    let mut per_m = Vec::new();
    for m in n0..=horizon {
        let c = build_ear_sets(a, m, seq, budget)?;
        let ub = c.union_bound();
        let comp = BigRational::one() - &c.measure;
        union_ok &= c.measure <= ub;
        complement_ok &= comp >= BigRational::one() - &ub;
        rep.rows.push(Row::exact("c_m", m as f64, rational_to_f64(&c.measure)));
        rep.rows
            .push(Row::exact("union_bound", m as f64, rational_to_f64(&ub).min(1.0)));
        per_m.push((m, format!("{}", c.measure), format!("{ub}")));
    }
    for (m, v) in &trunc.running {
        rep.rows.push(Row::exact("a_running", *m as f64, rational_to_f64(v)));
    }
    rep.verdicts.push(Verdict::check(
        "μ(C_m) ≤ 2 m r_m for every m",
        union_ok,
        "exact rational comparison",
    ));
    rep.verdicts.push(Verdict::check(
        "μ(∁C_m) ≥ 1 − 2 m r_m for every m",
        complement_ok,
        "exact rational comparison",
    ));
    rep.detail("measure", format!("{}", trunc.measure));
    rep.detail("c_m", per_m);
    Ok(rep)
}

/// One grid point of the bound check on `μ(∁C_m)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EarBoundRow {
    pub m: u64,
    pub delta: f64,
    /// `m^{2+σ}/Δ_m · 2^{−Δ_m} ≤ 1`.
    pub hypothesis: bool,
    #[serde(serialize_with = "ser_rational")]
    pub complement: BigRational,
    pub epsilon: f64,
    /// `μ(∁C_m) < ε_m`.
    pub within: bool,
}

/// Exact `μ(∁C_m)` against `ε_m = m^{−(1+σ)}` for an eventually-always radius
/// `r_m = Δ_m h(Δ_m)/m`. Required only for `m ≥ onset`; rows where the
/// hypothesis fails are flagged in the warnings.
pub fn prop_ear_bound_check(
    a: i64,
    sigma: f64,
    seq: &RadiusSequence,
    m_grid: &[u64],
    onset: u64,
    budget: usize,
) -> Result<(ExperimentReport, Vec<EarBoundRow>)> {
    if !(sigma > 0.0) {
        return Err(Error::param("sigma", format!("must be positive, got {sigma}")));
    }
    if seq.ear_delta(1).is_none() {
        return Err(Error::param(
            "seq",
            "needs an eventually-always sequence `ear:delta=…;h=…`",
        ));
    }
    if m_grid.is_empty() || m_grid.contains(&0) {
        return Err(Error::param("m_grid", "must be non-empty with entries ≥ 1"));
    }
    let sys = SystemSpec::integer_map(a)?;
    let window = Window::Checkpoints { n: m_grid.to_vec() };
    let mut rep = ExperimentReport::new("ear-bound", &sys, window, &SampleOptions::new(0, 0));
    rep.sequences.push(seq.to_string());
    let mut rows = Vec::new();
    for &m in m_grid {
        let delta = seq.ear_delta(m).expect("checked above");
        let hypothesis = delta > 0.0 && (2.0 + sigma) * (m as f64).log2() - delta.log2() - delta <= 0.0;
        let c = build_ear_sets(a, m, seq, budget)?;
        let complement = BigRational::one() - c.measure;
        let epsilon = (m as f64).powf(-(1.0 + sigma));
        let within = rational_to_f64(&complement) < epsilon;
        if !hypothesis {
            rep.warnings.push(format!(
                "m = {m}: hypothesis m^(2+σ)/Δ_m·2^(−Δ_m) ≤ 1 fails (Δ_m = {delta})"
            ));
        }
        rep.rows
            .push(Row::exact("complement", m as f64, rational_to_f64(&complement)));
        rep.rows.push(Row::exact("epsilon", m as f64, epsilon));
        rows.push(EarBoundRow {
            m,
            delta,
            hypothesis,
            complement,
            epsilon,
            within,
        });
    }
    let required: Vec<&EarBoundRow> = rows.iter().filter(|r| r.m >= onset && r.hypothesis).collect();
    let bad: Vec<u64> = required.iter().filter(|r| !r.within).map(|r| r.m).collect();
    rep.verdicts.push(Verdict::check(
        format!("μ(∁C_m) < m^(−(1+σ)) for m ≥ {onset}"),
        bad.is_empty(),
        if bad.is_empty() {
            format!("{} grid points checked", required.len())
        } else {
            format!("fails at m = {bad:?}")
        },
    ));
    // Smallest grid m from which every later point is within the bound.
    let observed = rows
        .iter()
        .rposition(|r| !r.within)
        .map_or(Some(rows[0].m), |i| rows.get(i + 1).map(|r| r.m));
    rep.detail("sigma", sigma);
    rep.detail("onset_required", onset);
    rep.detail("onset_observed", observed);
    rep.detail("rows", &rows);
    Ok((rep, rows))
}
