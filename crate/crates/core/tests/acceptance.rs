//! Acceptance criteria, one PASS/FAIL line each. Runs without the libtest
//! harness so every line is printed; the process fails if any criterion does.

use std::fs;
use std::time::{Duration, Instant};

use num_rational::BigRational;
use num_traits::One;

use recurlab::circle::RadiusSequence;
use recurlab::cli::{parse_config, run};
use recurlab::dynamics::{Real, SystemSpec};
use recurlab::exact::{build_ear_sets, build_recurrence_set, pair_correlation, DEFAULT_ARC_BUDGET};
use recurlab::experiments::{
    boshernitzan_scan, measure_sandwich, rio_dichotomy, tail_sum, SampleOptions, CI_SLACK_WIDTHS,
};
use recurlab::nt::{
    bezout_expand, bezout_polynomials, check_matrix_lattice, check_scalar_lattice, gcd_sweep, matrix_lattice,
    scalar_lattice,
};
use recurlab::transfer::{build_ulam, correlation_decay_fit, TestFamily};

fn q(n: i64, d: i64) -> BigRational {
    BigRational::new(n.into(), d.into())
}

struct Line {
    ok: bool,
    detail: String,
}

fn line(ok: bool, detail: impl Into<String>) -> Line {
    Line {
        ok,
        detail: detail.into(),
    }
}

/// μ(E_n) = 2r_n exactly, a ∈ {2,3,4}, n ≤ 12, r_n = 1/(4n).
fn exact_measure() -> Line {
    let mut bad = Vec::new();
    for a in 2..=4i64 {
        for n in 1..=12u64 {
            let r = q(1, 4 * n as i64);
            // 4^12 − 1 arcs for the largest case.
            let e = build_recurrence_set(a, n, &r, 1 << 25).expect("within budget");
            if e.measure != &r + &r {
                bad.push((a, n));
            }
        }
    }
    line(bad.is_empty(), format!("36 sets checked, mismatches {bad:?}"))
}

/// μ(E_i ∩ E_j) − μ(E_i)μ(E_j) ≤ 2·2^{2 gcd(i,j) − (i+j)}, a = 2, j ≤ 18.
fn pair_bound() -> Line {
    let mut bad = Vec::new();
    let mut pairs = 0;
    for i in 1..18u64 {
        for j in i + 1..=18 {
            let p = pair_correlation(2, i, j, &q(1, 4 * i as i64), &q(1, 4 * j as i64), DEFAULT_ARC_BUDGET).unwrap();
            pairs += 1;
            if !p.bound_ok {
                bad.push((i, j));
            }
        }
    }
    line(bad.is_empty(), format!("{pairs} pairs, violations {bad:?}"))
}

/// gcd(aᵐ − 1, aⁿ − 1) = a^{gcd(m,n)} − 1, a ∈ {2..5}, m, n ≤ 12.
fn gcd_lemma() -> Line {
    let mut count = 0;
    let mut bad = 0;
    for a in 2..=5 {
        for c in gcd_sweep(a, 12).unwrap() {
            count += 1;
            bad += usize::from(!c.holds);
        }
    }
    line(
        bad == 0 && count == 4 * 144,
        format!("{count} identities, {bad} failures"),
    )
}

/// Generated lattices equal brute force in both directions.
fn lattices() -> Line {
    let mut bad = Vec::new();
    for a in 2..=3 {
        for m in 1..=6 {
            for n in 1..=6 {
                let lat = scalar_lattice(a, m, n).unwrap();
                if !check_scalar_lattice(&lat, 200).unwrap().complete() {
                    bad.push(format!("a={a} m={m} n={n}"));
                }
            }
        }
    }
    let fib = vec![vec![1, 1], vec![1, 0]];
    for m in 1..=5 {
        for n in 1..=5 {
            let lat = matrix_lattice(&fib, m, n).unwrap();
            if !check_matrix_lattice(&lat, 5).unwrap().complete() {
                bad.push(format!("Fibonacci m={m} n={n}"));
            }
        }
    }
    line(
        bad.is_empty(),
        format!("72 scalar and 25 matrix lattices, mismatches {bad:?}"),
    )
}

/// u(x)Σx^{<m} + v(x)Σx^{<n} = 1 for coprime m, n ≤ 10.
fn bezout() -> Line {
    let mut count = 0;
    let mut bad = Vec::new();
    for m in 1..=10u64 {
        for n in 1..=10u64 {
            if num_integer::gcd(m, n) != 1 {
                continue;
            }
            count += 1;
            let (u, v) = bezout_polynomials(m, n).unwrap();
            if !bezout_expand(m, n, &u, &v).is_one() {
                bad.push((m, n));
            }
        }
    }
    line(bad.is_empty(), format!("{count} coprime pairs, failures {bad:?}"))
}

/// Doubling map, 1024 bins: uniform density, |λ₂| = 0.5 ± 0.01, τ within 10% of ln 2.
fn ulam_spectrum() -> Line {
    let op = build_ulam(&SystemSpec::doubling(), 1024).unwrap();
    let dev = op.density.iter().map(|h| (h - 1.0).abs()).fold(0.0, f64::max);
    let lambda = op.second.modulus;
    let fam = TestFamily::for_bins(op.bins);
    let fit = correlation_decay_fit(&op, fam, fam.default_n_max()).unwrap();
    let ln2 = std::f64::consts::LN_2;
    let parts = [
        (dev <= 1e-10, format!("density deviation {dev:.1e}")),
        ((lambda - 0.5).abs() <= 0.01, format!("|λ₂| = {lambda}")),
        ((fit.tau - ln2).abs() <= 0.1 * ln2, format!("τ = {:.5}", fit.tau)),
    ];
    let ok = parts.iter().all(|p| p.0);
    let detail: Vec<String> = parts
        .iter()
        .map(|(o, d)| format!("{d} [{}]", if *o { "ok" } else { "miss" }))
        .collect();
    line(ok, detail.join(", "))
}

/// Golden β-map: Monte Carlo μ(E_n) inside the sandwich for ≥ 95% of n ≤ 30.
fn sandwich() -> Line {
    let sys = SystemSpec::beta(Real::golden()).unwrap();
    let seq = RadiusSequence::power_law(q(1, 4), BigRational::one()).unwrap();
    let (rep, rows) = measure_sandwich(&sys, &seq, 30, &SampleOptions::new(10_000, 1)).unwrap();
    let inside = rows.iter().filter(|r| r.within).count();
    line(
        inside * 100 >= 95 * rows.len(),
        format!(
            "{inside} of {} inside, c = {}, C = {}, τ = {}",
            rows.len(),
            rep.details["c"],
            rep.details["decay_c"],
            rep.details["tau"]
        ),
    )
}

/// a = 2, m ≤ 18: μ(C_m) ≤ 2m r_m and μ(∁C_m) ≥ 1 − 2m r_m exactly.
fn ear_bounds() -> Line {
    let seqs = [
        RadiusSequence::power_law(q(1, 4), BigRational::one()).unwrap(),
        RadiusSequence::power_law(q(1, 2), q(2, 1)).unwrap(),
    ];
    let mut bad = Vec::new();
    for seq in &seqs {
        for m in 1..=18 {
            let c = build_ear_sets(2, m, seq, DEFAULT_ARC_BUDGET).unwrap();
            let bound = c.union_bound();
            let complement = BigRational::one() - &c.measure;
            if c.measure > bound || complement < BigRational::one() - &bound {
                bad.push(format!("{seq} m={m}"));
            }
        }
    }
    line(bad.is_empty(), format!("36 sets, violations {bad:?}"))
}

/// Doubling map, k = 50, N = 5000, M = 2000: separation ≥ 0.5 and the
/// convergent side below its tail plus 3 CI widths, within 60 s.
fn dichotomy() -> Line {
    let start = Instant::now();
    let conv = RadiusSequence::power_log(BigRational::one(), q(2, 1)).unwrap();
    let div = RadiusSequence::power_law(q(1, 2), BigRational::one()).unwrap();
    let rep = rio_dichotomy(
        &SystemSpec::doubling(),
        &conv,
        &div,
        50,
        5000,
        &SampleOptions::new(2000, 7),
    )
    .unwrap();
    let elapsed = start.elapsed();
    let est = |key: &str| {
        let e = &rep.details[key];
        (
            e["estimate"].as_f64().unwrap(),
            e["ci_high"].as_f64().unwrap() - e["ci_low"].as_f64().unwrap(),
        )
    };
    let (ec, wc) = est("convergent");
    let (ed, _) = est("divergent");
    let tail = tail_sum(&conv, 50, 1).unwrap().expect("convergent tail");
    let sep = ed - ec;
    let ok = sep >= 0.5 && ec <= tail + CI_SLACK_WIDTHS * wc && elapsed <= Duration::from_secs(60);
    line(
        ok,
        format!(
            "separation {sep:.4}, convergent {ec:.4} vs tail {tail:.4} + {CI_SLACK_WIDTHS}·{wc:.4}, {:.1} s",
            elapsed.as_secs_f64()
        ),
    )
}

/// Doubling map, M = 1000: α = 2 medians fall from N = 10² to 10⁴, α = 1 medians
/// stay within a factor 2.
fn boshernitzan() -> Line {
    let rep = boshernitzan_scan(
        &SystemSpec::doubling(),
        &[1.0, 2.0],
        &[100, 1000, 10_000],
        &SampleOptions::new(1000, 5),
    )
    .unwrap();
    let meds = |series: &str| -> Vec<f64> {
        rep.rows
            .iter()
            .filter(|r| r.series == series)
            .map(|r| r.estimate)
            .collect()
    };
    let (m1, m2) = (meds("alpha=1"), meds("alpha=2"));
    let falls = m2[2] < m2[0];
    let max = m1.iter().copied().fold(f64::MIN, f64::max);
    let min = m1.iter().copied().fold(f64::MAX, f64::min);
    line(
        falls && max <= 2.0 * min,
        format!("α = 2 medians {m2:.4?}, α = 1 medians {m1:.4?}"),
    )
}

/// Identical configs give byte-identical files for 1 and 4 threads.
fn determinism() -> Line {
    let configs = [
        "verb = \"rio\"\nmode = \"dichotomy\"\n[window]\nk = 20\nn = 800\n[run]\nsamples = 400\nseed = 3\n",
        "verb = \"ulam\"\nmode = \"sandwich\"\n[window]\nn_max = 12\n[run]\nsamples = 500\n",
        "verb = \"orbit\"\nmode = \"boshernitzan\"\n[window]\ncheckpoints = [100, 1000]\n[run]\nsamples = 200\n",
        "verb = \"petrov\"\n[window]\nn = 8\n",
    ];
    let tmp = tempfile::TempDir::new().unwrap();
    let mut differ = Vec::new();
    for (i, text) in configs.iter().enumerate() {
        let mut outputs = Vec::new();
        for (j, threads) in [1usize, 4, 1].into_iter().enumerate() {
            let mut cfg = parse_config(text).unwrap();
            cfg.threads = Some(threads);
            cfg.out = tmp.path().join(format!("{i}-{j}"));
            let summary = run(&cfg).unwrap();
            let bytes: Vec<Vec<u8>> = summary.files.iter().map(|f| fs::read(f).unwrap()).collect();
            outputs.push(bytes);
        }
        if outputs.windows(2).any(|w| w[0] != w[1]) {
            differ.push(cfg_name(text));
        }
    }
    line(
        differ.is_empty(),
        format!("{} configs × 3 runs, differing {differ:?}", configs.len()),
    )
}

fn cfg_name(text: &str) -> String {
    text.lines().next().unwrap_or_default().to_string()
}

fn main() {
    let criteria: [(&str, fn() -> Line); 11] = [
        ("exact measure identity", exact_measure),
        ("pairwise correlation bound", pair_bound),
        ("gcd lemma", gcd_lemma),
        ("lattice completeness", lattices),
        ("Bezout identity", bezout),
        ("Ulam spectral check", ulam_spectrum),
        ("measure sandwich", sandwich),
        ("EAR exact bounds", ear_bounds),
        ("dichotomy separation", dichotomy),
        ("Boshernitzan trend", boshernitzan),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let r = check();
        failed += usize::from(!r.ok);
        println!(
            "{} criterion {:>2} {name}: {} ({:.1} s)",
            if r.ok { "PASS" } else { "FAIL" },
            i + 1,
            r.detail,
            start.elapsed().as_secs_f64()
        );
    }
    println!(
        "acceptance: {} of {} criteria pass",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
