//! Monte Carlo and exact experiments on recurrence sets, run over finite
//! windows with Wilson intervals and verdicts against the predicted bounds.
//!
//! Every sample `i` draws its starting point from the stream
//! `sample_rng(seed, i)`; per-sample results are collected in index order and
//! reduced sequentially, so reports do not depend on the thread count.

mod ear;
mod rio;
mod scan;

pub use ear::{ear_exact, ear_truncated_measure, prop_ear_bound_check, EarBoundRow};
pub use rio::{
    easy_bound, rio_dichotomy, rio_estimate, rio_exact, rio_rate_scan, rio_truncated_measure, tail_sum, RioEstimate,
};
pub use scan::{boshernitzan_scan, measure_sandwich, SandwichRow};

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::{Map, Value};

use crate::dynamics::{required_precision, return_distances, sample_rng, OrbitPoint, SystemSpec};
use crate::error::{Error, Result};
use crate::transfer::{build_ulam, UlamOperator};

/// Version of the JSON layout of [`ExperimentReport`].
pub const REPORT_SCHEMA: u32 = 1;
pub const Z95: f64 = 1.959_963_984_540_054;
pub const Z99: f64 = 2.575_829_303_548_901;
/// Allowance, in CI widths, when an estimate is compared with a bound.
pub const CI_SLACK_WIDTHS: f64 = 3.0;
/// An estimate "trends to 1" when its upper CI bound reaches this.
pub const FULL_MEASURE_FLOOR: f64 = 0.9;
pub const DEFAULT_SAMPLES: usize = 2000;
pub const DEFAULT_ULAM_BINS: usize = 4096;

/// Wilson score interval for `p̂` from `n` (possibly effective) trials.
pub fn wilson(p: f64, n: f64, z: f64) -> (f64, f64) {
    if !(n > 0.0) {
        return (0.0, 1.0);
    }
    let z2 = z * z;
    let den = 1.0 + z2 / n;
    let mid = (p + z2 / (2.0 * n)) / den;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / den;
    // The endpoints at p̂ ∈ {0, 1} are exact; keep rounding from moving them.
    let lo = if p <= 0.0 { 0.0 } else { (mid - half).max(0.0) };
    let hi = if p >= 1.0 { 1.0 } else { (mid + half).min(1.0) };
    (lo, hi)
}

/// A proportion with its 95% Wilson interval.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Estimate {
    pub estimate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub samples: usize,
    /// Kish effective sample size; equals `samples` for unit weights.
    pub effective_samples: f64,
}

impl Estimate {
    /// Self-normalised weighted proportion of `hits`.
    pub fn weighted(weights: &[f64], hits: impl Iterator<Item = bool>) -> Self {
        Self::weighted_z(weights, hits, Z95)
    }

    pub fn weighted_z(weights: &[f64], hits: impl Iterator<Item = bool>, z: f64) -> Self {
        let (mut sw, mut sw2, mut hit) = (0.0, 0.0, 0.0);
        for (w, h) in weights.iter().zip(hits) {
            sw += w;
            sw2 += w * w;
            if h {
                hit += w;
            }
        }
        let p = if sw > 0.0 { hit / sw } else { 0.0 };
        let n_eff = if sw2 > 0.0 { sw * sw / sw2 } else { 0.0 };
        let (lo, hi) = wilson(p, n_eff, z);
        Estimate {
            estimate: p,
            ci_low: lo,
            ci_high: hi,
            samples: weights.len(),
            effective_samples: n_eff,
        }
    }

    pub fn width(&self) -> f64 {
        self.ci_high - self.ci_low
    }

    /// `estimate ≤ bound` up to [`CI_SLACK_WIDTHS`] interval widths.
    pub fn below(&self, bound: f64) -> bool {
        self.estimate <= bound + CI_SLACK_WIDTHS * self.width()
    }
}

/// Shared Monte Carlo settings.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleOptions {
    pub samples: usize,
    pub seed: u64,
    /// Cap on the fixed-point precision; `None` lets the horizon decide.
    pub precision_bits: Option<u64>,
    /// Bins of the Ulam matrix used to weight non-Lebesgue systems.
    pub ulam_bins: usize,
    /// Arc cap for exact cross-checks.
    pub arc_budget: usize,
}

impl Default for SampleOptions {
    fn default() -> Self {
        SampleOptions {
            samples: DEFAULT_SAMPLES,
            seed: 0,
            precision_bits: None,
            ulam_bins: DEFAULT_ULAM_BINS,
            arc_budget: crate::exact::DEFAULT_ARC_BUDGET,
        }
    }
}

impl SampleOptions {
    pub fn new(samples: usize, seed: u64) -> Self {
        SampleOptions {
            samples,
            seed,
            ..Default::default()
        }
    }

    fn check(&self, min_samples: usize) -> Result<()> {
        if self.samples < min_samples {
            return Err(Error::param(
                "samples",
                format!("need at least {min_samples}, got {}", self.samples),
            ));
        }
        Ok(())
    }
}

/// Bits needed for `horizon` steps, checked against the configured cap.
pub fn sample_bits(sys: &SystemSpec, horizon: usize, cap: Option<u64>) -> Result<u64> {
    let need = required_precision(sys, horizon);
    match cap {
        Some(p) if p < need => Err(Error::PrecisionExhausted {
            steps: horizon,
            required_bits: need,
            available_bits: p,
        }),
        _ => Ok(need),
    }
}

/// How sampled Lebesgue points are reweighted to the invariant measure.
#[derive(Clone, Debug)]
pub enum Weighting {
    Lebesgue,
    /// Weight by the Ulam density at the starting point.
    Ulam(Box<UlamOperator>),
}

impl Weighting {
    pub fn for_system(sys: &SystemSpec, bins: usize) -> Result<Self> {
        if sys.preserves_lebesgue() {
            Ok(Weighting::Lebesgue)
        } else {
            Ok(Weighting::Ulam(Box::new(build_ulam(sys, bins)?)))
        }
    }

    fn weight(&self, x: &OrbitPoint) -> f64 {
        match self {
            Weighting::Lebesgue => 1.0,
            Weighting::Ulam(op) => op.density_at(x.to_f64(0)),
        }
    }

    pub fn operator(&self) -> Option<&UlamOperator> {
        match self {
            Weighting::Lebesgue => None,
            Weighting::Ulam(op) => Some(op),
        }
    }
}

/// Runs `per_sample` on the scaled return distances of every sample, in
/// parallel, returning results and weights in sample order. The first
/// error by sample index wins.
pub(crate) fn map_samples<T: Send>(
    sys: &SystemSpec,
    horizon: usize,
    opts: &SampleOptions,
    weighting: &Weighting,
    per_sample: impl Fn(&[u64]) -> T + Sync,
) -> Result<(Vec<T>, Vec<f64>)> {
    let bits = sample_bits(sys, horizon, opts.precision_bits)?;
    let dim = sys.dimension();
    let out: Vec<Result<(T, f64)>> = (0..opts.samples)
        .into_par_iter()
        .with_min_len(8)
        .map(|i| {
            let x = OrbitPoint::sample(&mut sample_rng(opts.seed, i as u64), dim, bits);
            let d = return_distances(sys, &x, horizon)?;
            Ok((per_sample(&d), weighting.weight(&x)))
        })
        .collect();
    let mut vals = Vec::with_capacity(out.len());
    let mut weights = Vec::with_capacity(out.len());
    for r in out {
        let (v, w) = r?;
        vals.push(v);
        weights.push(w);
    }
    Ok((vals, weights))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Pass,
    Fail,
    /// No result predicts the outcome.
    Open,
    /// Reported as data only.
    Exploratory,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Verdict {
    pub claim: String,
    pub outcome: Outcome,
    pub detail: String,
}

impl Verdict {
    pub fn check(claim: impl Into<String>, ok: bool, detail: impl Into<String>) -> Self {
        Verdict {
            claim: claim.into(),
            outcome: if ok { Outcome::Pass } else { Outcome::Fail },
            detail: detail.into(),
        }
    }

    pub fn with(claim: impl Into<String>, outcome: Outcome, detail: impl Into<String>) -> Self {
        Verdict {
            claim: claim.into(),
            outcome,
            detail: detail.into(),
        }
    }
}

/// One plotted point: `series` at abscissa `x`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Row {
    pub series: String,
    pub x: f64,
    pub estimate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub samples: usize,
}

impl Row {
    pub fn from_estimate(series: impl Into<String>, x: f64, e: &Estimate) -> Self {
        Row {
            series: series.into(),
            x,
            estimate: e.estimate,
            ci_low: e.ci_low,
            ci_high: e.ci_high,
            samples: e.samples,
        }
    }

    /// An exact value: the interval collapses to it.
    pub fn exact(series: impl Into<String>, x: f64, v: f64) -> Self {
        Row {
            series: series.into(),
            x,
            estimate: v,
            ci_low: v,
            ci_high: v,
            samples: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Window {
    /// `n ∈ [k, N]`.
    Recurrence { k: u64, n: u64 },
    /// `m ∈ [n0, M]`.
    EventuallyAlways { n0: u64, horizon: u64 },
    /// Steps `1..=n_max`.
    Steps { n_max: u64 },
    /// Statistic read at the listed horizons.
    Checkpoints { n: Vec<u64> },
    /// A single index pair, as for lattices.
    Indices { m: u64, n: u64 },
    /// Operator resolution.
    Bins { bins: usize },
}

/// Everything one experiment run produces; serialises byte-identically for
/// identical inputs.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub schema: u32,
    pub experiment: String,
    pub system: String,
    pub sequences: Vec<String>,
    pub samples: usize,
    pub window: Window,
    pub seed: u64,
    pub precision_bits: Option<u64>,
    pub rows: Vec<Row>,
    pub verdicts: Vec<Verdict>,
    pub warnings: Vec<String>,
    /// Experiment-specific scalars (bounds, fitted constants, exact values).
    pub details: Map<String, Value>,
    pub config_hash: Option<String>,
    /// The normalised configuration that reproduces this report.
    pub config: Option<String>,
}

impl ExperimentReport {
    pub fn new(experiment: &str, sys: &SystemSpec, window: Window, opts: &SampleOptions) -> Self {
        ExperimentReport {
            schema: REPORT_SCHEMA,
            experiment: experiment.into(),
            system: sys.to_string(),
            sequences: Vec::new(),
            samples: opts.samples,
            window,
            seed: opts.seed,
            precision_bits: None,
            rows: Vec::new(),
            verdicts: Vec::new(),
            warnings: Vec::new(),
            details: Map::new(),
            config_hash: None,
            config: None,
        }
    }

    pub fn detail(&mut self, key: &str, v: impl Serialize) {
        self.details
            .insert(key.into(), serde_json::to_value(v).unwrap_or(Value::Null));
    }

    /// No verdict failed.
    pub fn passed(&self) -> bool {
        self.verdicts.iter().all(|v| v.outcome != Outcome::Fail)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serialises");
        s.push('\n');
        s
    }

    /// Plot data: `series  x  estimate  ci_low  ci_high  samples`.
    pub fn to_tsv(&self) -> String {
        let mut s = String::from("series\tx\testimate\tci_low\tci_high\tsamples\n");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{}\t{}\t{}\t{}\t{}\t{}",
                r.series, r.x, r.estimate, r.ci_low, r.ci_high, r.samples
            );
        }
        s
    }
}

/// Ascending checkpoints `lo ≤ … ≤ hi`, roughly `per_decade` per decade,
/// always including both ends.
pub fn log_grid(lo: u64, hi: u64, per_decade: u32) -> Vec<u64> {
    let mut out = vec![lo];
    if hi > lo {
        let step = 10f64.powf(1.0 / per_decade as f64);
        let mut v = lo as f64;
        loop {
            v *= step;
            let n = v.round() as u64;
            if n >= hi {
                break;
            }
            if n > *out.last().expect("non-empty") {
                out.push(n);
            }
        }
        out.push(hi);
    }
    out
}
