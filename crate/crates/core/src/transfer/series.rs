use serde::Serialize;

use super::UlamOperator;
use crate::circle::RadiusSequence;
use crate::dynamics::Metric;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SeriesVerdict {
    Convergent,
    Divergent,
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SeriesReport {
    pub sequence: String,
    /// `t_n = ∫ μ(B(x, r_n)) dμ(x)` for `n = 1..=N`.
    pub terms: Vec<f64>,
    pub partial_sums: Vec<f64>,
    /// Local decay exponent `−d log t / d log n` over the last quarter.
    pub raabe: f64,
    /// `ln n* · (raabe − 1)` at the geometric centre `n*` of that quarter.
    pub bertrand: f64,
    pub verdict: SeriesVerdict,
}

/// Cumulative integrals of the piecewise-constant density.
struct Primitive {
    n: usize,
    h: Vec<f64>,
    f: Vec<f64>,
    g: Vec<f64>,
    metric: Metric,
}

impl Primitive {
    fn new(op: &UlamOperator) -> Self {
        let n = op.bins;
        let w = 1.0 / n as f64;
        let mut f = vec![0.0; n + 1];
        let mut g = vec![0.0; n + 1];
        for i in 0..n {
            f[i + 1] = f[i] + op.density[i] * w;
            g[i + 1] = g[i] + (f[i] + f[i + 1]) * 0.5 * w;
        }
        Primitive {
            n,
            h: op.density.clone(),
            f,
            g,
            metric: op.metric,
        }
    }

    /// `G(u) = ∫_0^u F` on `[0, 1]`.
    fn g_unit(&self, u: f64) -> f64 {
        let x = u * self.n as f64;
        let k = (x.floor() as usize).min(self.n - 1);
        let s = (x - k as f64) / self.n as f64;
        self.g[k] + self.f[k] * s + self.h[k] * s * s * 0.5
    }

    /// `G` extended past `[0, 1]`: clamped `F` for intervals, `F(u+1) = F(u) + 1` on the circle.
    fn g_ext(&self, u: f64) -> f64 {
        let g1 = self.g[self.n];
        match self.metric {
            Metric::Interval => {
                if u <= 0.0 {
                    0.0
                } else if u >= 1.0 {
                    g1 + (u - 1.0)
                } else {
                    self.g_unit(u)
                }
            }
            Metric::Circle => {
                if u < 0.0 {
                    self.g_ext(u + 1.0) - g1 - u
                } else if u > 1.0 {
                    self.g_ext(u - 1.0) + g1 + (u - 1.0)
                } else {
                    self.g_unit(u)
                }
            }
        }
    }

    /// `∫ μ(B(x, r)) dμ(x)`, exact for the piecewise-constant density.
    fn ball_integral(&self, r: f64) -> f64 {
        if self.metric == Metric::Circle && 2.0 * r >= 1.0 {
            return 1.0;
        }
        let w = 1.0 / self.n as f64;
        (0..self.n)
            .map(|i| {
                let (a, b) = (i as f64 * w, (i + 1) as f64 * w);
                self.h[i] * (self.g_ext(b + r) - self.g_ext(a + r) - self.g_ext(b - r) + self.g_ext(a - r))
            })
            .sum::<f64>()
            .min(1.0)
    }
}

/// Partial sums of `Σ_n ∫ μ(B(x, r_n)) dμ(x)` with a Raabe/Bertrand verdict.
pub fn ball_measure_series(op: &UlamOperator, seq: &RadiusSequence, n_terms: usize) -> Result<SeriesReport> {
    if n_terms < 8 {
        return Err(Error::param("n_terms", format!("need at least 8, got {n_terms}")));
    }
    let prim = Primitive::new(op);
    let mut terms = Vec::with_capacity(n_terms);
    for k in 1..=n_terms as u64 {
        terms.push(prim.ball_integral(seq.eval_f64(k)?));
    }
    let partial_sums: Vec<f64> = terms
        .iter()
        .scan(0.0, |acc, t| {
            *acc += t;
            Some(*acc)
        })
        .collect();
    let (raabe, bertrand) = tail_exponents(&terms);
    let verdict = if bertrand > 1.5 {
        SeriesVerdict::Convergent
    } else if bertrand < 0.5 {
        SeriesVerdict::Divergent
    } else {
        SeriesVerdict::Inconclusive
    };
    Ok(SeriesReport {
        sequence: seq.to_string(),
        terms,
        partial_sums,
        raabe,
        bertrand,
        verdict,
    })
}

fn tail_exponents(terms: &[f64]) -> (f64, f64) {
    let n = terms.len();
    let start = (3 * n / 4).max(1);
    let pts: Vec<(f64, f64)> = (start..n)
        .filter(|&i| terms[i] > 0.0)
        .map(|i| (((i + 1) as f64).ln(), terms[i].ln()))
        .collect();
    if pts.len() < 2 {
        // Terms vanish: the series is a finite sum.
        return (f64::INFINITY, f64::INFINITY);
    }
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let raabe = -sxy / sxx;
    (raabe, mx * (raabe - 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{Real, SystemSpec};
    use crate::transfer::build_ulam;
    use num_rational::BigRational;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    #[test]
    fn lebesgue_inverse_squares() {
        let op = build_ulam(&SystemSpec::doubling(), 256).unwrap();
        let seq = RadiusSequence::power_law(q(1, 1), q(2, 1)).unwrap();
        let rep = ball_measure_series(&op, &seq, 2000).unwrap();
        assert_eq!(rep.terms[0], 1.0);
        for n in 2..=2000usize {
            let want = 2.0 / (n * n) as f64;
            assert!((rep.terms[n - 1] - want).abs() < 1e-15, "n = {n}");
        }
        let pi2_3 = std::f64::consts::PI.powi(2) / 3.0;
        // The r = 1 ball is the whole circle, so the sum is π²/3 − 1.
        let tail = 2.0 / 2000.0;
        assert!((rep.partial_sums[1999] + tail - (pi2_3 - 1.0)).abs() < 1e-6);
        assert_eq!(rep.verdict, SeriesVerdict::Convergent);
    }

    #[test]
    fn lebesgue_harmonic_diverges() {
        let op = build_ulam(&SystemSpec::doubling(), 256).unwrap();
        let seq = RadiusSequence::power_law(q(1, 2), q(1, 1)).unwrap();
        let rep = ball_measure_series(&op, &seq, 4000).unwrap();
        let h: f64 = (1..=4000).map(|n| 1.0 / n as f64).sum();
        assert!((rep.partial_sums[3999] - h).abs() < 1e-9);
        assert_eq!(rep.verdict, SeriesVerdict::Divergent);
    }

    #[test]
    fn log_squared_converges() {
        let op = build_ulam(&SystemSpec::doubling(), 256).unwrap();
        let seq = RadiusSequence::power_log(q(1, 4), q(2, 1)).unwrap();
        let rep = ball_measure_series(&op, &seq, 20000).unwrap();
        assert_eq!(rep.verdict, SeriesVerdict::Convergent, "{} {}", rep.raabe, rep.bertrand);
    }

    #[test]
    fn golden_beta_terms_in_density_bounds() {
        let op = build_ulam(&SystemSpec::beta(Real::golden()).unwrap(), 4096).unwrap();
        let c = op.density_bounds().unwrap().c;
        let seq = RadiusSequence::power_law(q(1, 1), q(2, 1)).unwrap();
        let rep = ball_measure_series(&op, &seq, 200).unwrap();
        for n in 2..=200usize {
            let r = 1.0 / (n * n) as f64;
            let t = rep.terms[n - 1];
            assert!(t >= 2.0 * r / c && t <= 4.0 * c * r, "n = {n}: {t}");
        }
        assert_eq!(rep.terms[0], 1.0);
        assert_eq!(rep.verdict, SeriesVerdict::Convergent);
    }

    #[test]
    fn interval_metric_clips_balls() {
        let m = crate::dynamics::PiecewiseLinearMap::uniform(2, false).unwrap();
        let op = build_ulam(&SystemSpec::PiecewiseLinear(m), 64).unwrap();
        let prim = Primitive::new(&op);
        for r in [0.01, 0.1, 0.3] {
            assert!((prim.ball_integral(r) - (2.0 * r - r * r)).abs() < 1e-14);
        }
    }
}
