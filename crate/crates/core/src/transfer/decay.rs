use serde::Serialize;

use super::UlamOperator;
use crate::error::{Error, Result};

/// Indicator pairs `(1_I, 1_J)` over dyadic intervals: `I` at levels
/// `1..=f_levels`, `J` at levels `1..=g_levels`, both snapped to bins.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct TestFamily {
    pub f_levels: u32,
    pub g_levels: u32,
}

impl TestFamily {
    /// Coarse `f`, all bin-resolved `g`.
    pub fn for_bins(bins: usize) -> Self {
        let g = (usize::BITS - 1 - bins.leading_zeros()).min(12);
        TestFamily {
            f_levels: 3.min(g),
            g_levels: g,
        }
    }

    /// Largest `n` at which the family still resolves the decay.
    pub fn default_n_max(&self) -> usize {
        (self.g_levels - self.f_levels) as usize
    }
}

/// Dyadic intervals at `levels` as bin ranges `[lo, hi)`.
fn dyadic_ranges(bins: usize, levels: u32) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for l in 1..=levels {
        let k = 1usize << l;
        for t in 0..k {
            let (lo, hi) = (t * bins / k, (t + 1) * bins / k);
            if lo < hi {
                out.push((lo, hi));
            }
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DecayFit {
    pub family: TestFamily,
    /// `(n, p(n))` for `n = 0..=n_max`.
    pub table: Vec<(usize, f64)>,
    pub tau: f64,
    /// Smallest `C` with `p(n) ≤ C e^{−τn}` over the whole table.
    pub c: f64,
    /// Intercept of the least-squares line, as `e^{intercept}`.
    pub c_fit: f64,
    pub rms_residual: f64,
    pub fitted: Vec<usize>,
    /// Steps whose `p(n)` fell below `10⁻¹³` and were left out of the fit.
    pub below_resolution: Vec<usize>,
    /// Gap or fitted rate too small to call the correlations decaying.
    pub non_decaying: bool,
}

/// `p(n) = max |∫ f∘Tⁿ g dμ − ∫f dμ ∫g dμ| / (‖f‖_{L¹(μ)} ‖g‖_{BV})` over the
/// family, from powers of the Ulam matrix; `(C, τ)` fitted on `n ∈ [5, n_max]`.
pub fn correlation_decay_fit(op: &UlamOperator, family: TestFamily, n_max: usize) -> Result<DecayFit> {
    const FIT_START: usize = 5;
    if n_max < FIT_START + 1 {
        return Err(Error::param(
            "n_max",
            format!("must be at least {}, got {n_max}", FIT_START + 1),
        ));
    }
    let n = op.bins;
    let pi = op.stationary();
    let fs = dyadic_ranges(n, family.f_levels);
    let gs = dyadic_ranges(n, family.g_levels);
    let mass = |lo: usize, hi: usize, prefix: &[f64]| prefix[hi] - prefix[lo];
    let mut pi_prefix = vec![0.0; n + 1];
    for i in 0..n {
        pi_prefix[i + 1] = pi_prefix[i] + pi[i];
    }
    let mut p = vec![0.0f64; n_max + 1];
    for &(flo, fhi) in &fs {
        let mu_f = mass(flo, fhi, &pi_prefix);
        if mu_f <= 0.0 {
            continue;
        }
        let mut v: Vec<f64> = (0..n)
            .map(|i| if (flo..fhi).contains(&i) { 1.0 } else { 0.0 })
            .collect();
        for (step, pn) in p.iter_mut().enumerate() {
            if step > 0 {
                v = op.right_mul(&v);
            }
            let mut pre = vec![0.0; n + 1];
            for i in 0..n {
                pre[i + 1] = pre[i] + pi[i] * v[i];
            }
            for &(glo, ghi) in &gs {
                let mu_g = mass(glo, ghi, &pi_prefix);
                let corr = mass(glo, ghi, &pre) - mu_f * mu_g;
                let var = (glo > 0) as u32 + (ghi < n) as u32;
                let v = corr.abs() / (mu_f * (var as f64 + mu_g));
                if v > *pn {
                    *pn = v;
                }
            }
        }
    }
    let table: Vec<(usize, f64)> = p.iter().copied().enumerate().collect();
    let (fitted, below): (Vec<usize>, Vec<usize>) = (FIT_START..=n_max).partition(|&k| p[k] > 1e-13);
    let pts: Vec<(f64, f64)> = fitted.iter().map(|&k| (k as f64, p[k].ln())).collect();
    let (tau, c_fit, rms) = if pts.len() >= 2 {
        let m = pts.len() as f64;
        let mx = pts.iter().map(|q| q.0).sum::<f64>() / m;
        let my = pts.iter().map(|q| q.1).sum::<f64>() / m;
        let sxx: f64 = pts.iter().map(|q| (q.0 - mx).powi(2)).sum();
        let sxy: f64 = pts.iter().map(|q| (q.0 - mx) * (q.1 - my)).sum();
        let slope = sxy / sxx;
        let icept = my - slope * mx;
        let rms = (pts.iter().map(|q| (q.1 - icept - slope * q.0).powi(2)).sum::<f64>() / m).sqrt();
        (-slope, icept.exp(), rms)
    } else {
        (f64::NAN, f64::NAN, f64::NAN)
    };
    let c = if tau.is_finite() {
        table
            .iter()
            .map(|&(k, v)| v * (tau * k as f64).exp())
            .fold(0.0, f64::max)
    } else {
        f64::NAN
    };
    Ok(DecayFit {
        family,
        table,
        tau,
        c,
        c_fit,
        rms_residual: rms,
        fitted,
        below_resolution: below,
        non_decaying: !(tau > 1e-3) && op.gap() < 1e-3,
    })
}

/// `∫ k · g∘Tⁿ · f∘T^{n+m} dμ` for bin functions, at matrix level.
pub fn triple_correlation(op: &UlamOperator, f: &[f64], g: &[f64], k: &[f64], m: usize, n: usize) -> f64 {
    let mut v = f.to_vec();
    for _ in 0..m {
        v = op.right_mul(&v);
    }
    let mut v: Vec<f64> = v.iter().zip(g).map(|(a, b)| a * b).collect();
    for _ in 0..n {
        v = op.right_mul(&v);
    }
    op.stationary().iter().zip(k).zip(&v).map(|((p, a), b)| p * a * b).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circle::{rational_to_f64, IntervalSet};
    use crate::dynamics::{Real, SystemSpec};
    use crate::transfer::build_ulam;
    use num_rational::BigRational;

    #[test]
    fn doubling_decays_at_log_two() {
        let op = build_ulam(&SystemSpec::doubling(), 1024).unwrap();
        let fam = TestFamily::for_bins(1024);
        assert_eq!(
            fam,
            TestFamily {
                f_levels: 3,
                g_levels: 10
            }
        );
        let fit = correlation_decay_fit(&op, fam, fam.default_n_max()).unwrap();
        assert!((fit.tau - 2f64.ln()).abs() < 0.01 * 2f64.ln(), "{fit:?}");
        for &(k, v) in &fit.table {
            assert!(v <= fit.c * (-fit.tau * k as f64).exp() * (1.0 + 1e-12));
        }
        assert!(!fit.non_decaying);
    }

    #[test]
    fn lag_zero_is_covariance() {
        let op = build_ulam(&SystemSpec::doubling(), 64).unwrap();
        let f: Vec<f64> = (0..64).map(|i| (i < 32) as u8 as f64).collect();
        let g: Vec<f64> = (0..64).map(|i| (i < 16) as u8 as f64).collect();
        let one = vec![1.0; 64];
        // n = m = 0: ∫ f g dμ = μ([0, 1/4)).
        assert_eq!(triple_correlation(&op, &f, &g, &one, 0, 0), 0.25);
    }

    #[test]
    fn golden_beta_correlations_summable() {
        let op = build_ulam(&SystemSpec::beta(Real::golden()).unwrap(), 4096).unwrap();
        let fam = TestFamily::for_bins(4096);
        let fit = correlation_decay_fit(&op, fam, fam.default_n_max()).unwrap();
        assert!(fit.tau > 0.1, "{fit:?}");
        let tail = fit.c * (-fit.tau * 10.0).exp() / (1.0 - (-fit.tau).exp());
        assert!(tail.is_finite());
    }

    fn preimage(a: &BigRational, b: &BigRational, n: u32) -> IntervalSet {
        let s = BigRational::from_integer(num_bigint::BigInt::from(1u64 << n));
        IntervalSet::from_arcs((0..1u64 << n).map(|t| {
            let t = BigRational::from_integer(t.into());
            ((a + &t) / &s, (b + &t) / &s)
        }))
    }

    #[test]
    fn triple_correlation_matches_exact_sets() {
        let bins = 64usize;
        let op = build_ulam(&SystemSpec::doubling(), bins).unwrap();
        let ind =
            |lo: usize, hi: usize| -> Vec<f64> { (0..bins).map(|i| ((lo..hi).contains(&i)) as u8 as f64).collect() };
        let q = |i: usize| BigRational::new((i as i64).into(), (bins as i64).into());
        for (fi, gi, ki, m, n) in [
            ((0, 16), (8, 40), (20, 28), 1u32, 2u32),
            ((32, 48), (0, 32), (3, 11), 2, 1),
            ((5, 6), (7, 19), (0, 64), 3, 3),
        ] {
            let got = triple_correlation(
                &op,
                &ind(fi.0, fi.1),
                &ind(gi.0, gi.1),
                &ind(ki.0, ki.1),
                m as usize,
                n as usize,
            );
            let kset = IntervalSet::from_arcs([(q(ki.0), q(ki.1))]);
            let gset = preimage(&q(gi.0), &q(gi.1), n);
            let fset = preimage(&q(fi.0), &q(fi.1), n + m);
            let exact = kset.intersect(&gset).intersect(&fset).measure();
            assert!((got - rational_to_f64(&exact)).abs() < 1e-15, "{got} vs {exact}");
        }
    }
}
