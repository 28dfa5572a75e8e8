//! Dispatch of a validated configuration and atomic persistence of its outputs.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::mpsc;
use std::time::Duration;

use num_traits::One;

use super::config::{RunConfig, Task};
use crate::circle::rational_to_f64;
use crate::dynamics::{
    exponents_from_distances, first_return, orbit_csv, return_distances, sample_rng, supports_exact, unscale,
    OrbitPoint, ReturnTime, SystemSpec,
};
use crate::error::{Error, Result};
use crate::exact::{build_recurrence_set, pairs_to_csv, petrov_pairs, petrov_ratio};
use crate::experiments::{
    boshernitzan_scan, ear_exact, ear_truncated_measure, easy_bound, log_grid, measure_sandwich, prop_ear_bound_check,
    rio_dichotomy, rio_exact, rio_rate_scan, rio_truncated_measure, sample_bits, tail_sum, ExperimentReport, Outcome,
    Row, Verdict, Window,
};
use crate::nt::{check_matrix_lattice, check_scalar_lattice, gcd_sweep, matrix_lattice, scalar_lattice};
use crate::transfer::{ball_measure_series, build_ulam, correlation_decay_fit, SeriesVerdict, TestFamily};

/// What a run computes before anything touches the disk.
#[derive(Clone, Debug, PartialEq)]
pub struct Output {
    pub report: ExperimentReport,
    /// Extra files as `(suffix, contents)`, written as `<stem>-<suffix>`.
    pub extra: Vec<(String, String)>,
}

#[derive(Clone, Debug)]
pub struct RunSummary {
    pub report: ExperimentReport,
    pub files: Vec<PathBuf>,
}

impl RunSummary {
    /// `0` when no verdict failed, `2` otherwise.
    pub fn exit_code(&self) -> i32 {
        if self.report.passed() {
            0
        } else {
            2
        }
    }
}

fn label(o: Outcome) -> &'static str {
    match o {
        Outcome::Pass => "PASS",
        Outcome::Fail => "FAIL",
        Outcome::Open => "OPEN",
        Outcome::Exploratory => "EXPLORATORY",
    }
}

impl std::fmt::Display for RunSummary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for v in &self.report.verdicts {
            writeln!(f, "{:<12} {}: {}", label(v.outcome), v.claim, v.detail)?;
        }
        for w in &self.report.warnings {
            writeln!(f, "warning: {w}")?;
        }
        for p in &self.files {
            writeln!(f, "wrote {}", p.display())?;
        }
        Ok(())
    }
}

/// Computes the report for `cfg` on the calling thread's rayon pool.
pub fn execute(cfg: &RunConfig) -> Result<Output> {
    let mut out = dispatch(cfg)?;
    let rep = &mut out.report;
    rep.seed = cfg.seed;
    rep.config_hash = Some(cfg.hash());
    rep.config = Some(cfg.normalized());
    Ok(out)
}

/// Runs `cfg` with its thread count and runtime cap, then writes
/// `<out>/<verb>-<mode>.json`, `.tsv` and any extra files. Nothing is written
/// unless every step succeeds.
pub fn run(cfg: &RunConfig) -> Result<RunSummary> {
    let output = execute_limited(cfg)?;
    let stem = cfg.task.stem();
    let mut files = vec![
        (format!("{stem}.json"), output.report.to_json()),
        (format!("{stem}.tsv"), output.report.to_tsv()),
    ];
    files.extend(output.extra.into_iter().map(|(s, c)| (format!("{stem}-{s}"), c)));
    let paths = write_all(&cfg.out, &files)?;
    Ok(RunSummary {
        report: output.report,
        files: paths,
    })
}

fn execute_limited(cfg: &RunConfig) -> Result<Output> {
    let pool = match cfg.threads {
        Some(t) => Some(
            rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build()
                .map_err(|e| Error::Io(e.to_string()))?,
        ),
        None => None,
    };
    let Some(secs) = cfg.runtime_secs else {
        return match &pool {
            Some(p) => p.install(|| execute(cfg)),
            None => execute(cfg),
        };
    };
    // The worker is abandoned on timeout; the process exits soon after.
    let (tx, rx) = mpsc::channel();
    let job = cfg.clone();
    std::thread::spawn(move || {
        let r = match &pool {
            Some(p) => p.install(|| execute(&job)),
            None => execute(&job),
        };
        let _ = tx.send(r);
    });
    match rx.recv_timeout(Duration::from_secs(secs)) {
        Ok(r) => r,
        Err(mpsc::RecvTimeoutError::Timeout) => Err(Error::RuntimeExceeded { seconds: secs }),
        Err(mpsc::RecvTimeoutError::Disconnected) => Err(Error::Io("worker thread panicked".into())),
    }
}

/// Stages every file in `dir` first and renames them into place only once
/// all of them are written.
fn write_all(dir: &Path, files: &[(String, String)]) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut staged = Vec::with_capacity(files.len());
    for (name, contents) in files {
        let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
        tmp.write_all(contents.as_bytes())?;
        tmp.as_file().sync_all()?;
        staged.push((tmp, dir.join(name)));
    }
    let mut paths = Vec::with_capacity(staged.len());
    for (tmp, path) in staged {
        tmp.persist(&path).map_err(|e| Error::Io(e.error.to_string()))?;
        paths.push(path);
    }
    Ok(paths)
}

fn dispatch(cfg: &RunConfig) -> Result<Output> {
    let sys = &cfg.system;
    let opts = cfg.sample_options();
    let seq = || cfg.sequence.as_ref().expect("validated sequence");
    let mut extra = Vec::new();
    let report = match cfg.task {
        Task::RioMeasure => rio_truncated_measure(sys, seq(), cfg.int("window.k"), cfg.int("window.n"), &opts)?,
        Task::RioDichotomy => rio_dichotomy(
            sys,
            seq(),
            cfg.divergent.as_ref().expect("validated sequence"),
            cfg.int("window.k"),
            cfg.int("window.n"),
            &opts,
        )?,
        Task::RioRateScan => rio_rate_scan(
            sys,
            cfg.rats("params.thetas").expect("validated"),
            cfg.rat("params.kappa"),
            cfg.int("window.k"),
            cfg.int("window.n"),
            &opts,
        )?,
        Task::EarMeasure => ear_truncated_measure(sys, seq(), cfg.int("window.n0"), cfg.int("window.horizon"), &opts)?,
        Task::EarExact => ear_exact(
            cfg.multiplier(),
            seq(),
            cfg.int("window.n0"),
            cfg.int("window.horizon"),
            cfg.arcs,
        )?,
        Task::EarPropBound => {
            prop_ear_bound_check(
                cfg.multiplier(),
                cfg.float("params.sigma"),
                seq(),
                cfg.ints("params.m_grid"),
                cfg.int("params.onset"),
                cfg.arcs,
            )?
            .0
        }
        Task::Petrov => petrov(cfg, &mut extra)?,
        Task::UlamOperator => ulam_operator(cfg, &mut extra)?,
        Task::UlamSeries => ulam_series(cfg)?,
        Task::UlamSandwich => measure_sandwich(sys, seq(), cfg.int("window.n_max"), &opts)?.0,
        Task::NtGcd => nt_gcd(cfg)?,
        Task::NtLattice => nt_lattice(cfg)?,
        Task::NtMatrixLattice => nt_matrix_lattice(cfg)?,
        Task::ExactSet => exact_set(cfg)?,
        Task::ExactUnion => exact_union(cfg)?,
        Task::OrbitDump => orbit_dump(cfg, &mut extra)?,
        Task::OrbitReturns => orbit_returns(cfg)?,
        Task::OrbitBoshernitzan => {
            boshernitzan_scan(sys, cfg.floats("params.alphas"), cfg.ints("window.checkpoints"), &opts)?
        }
    };
    Ok(Output { report, extra })
}

fn blank(cfg: &RunConfig, window: Window) -> ExperimentReport {
    let mut rep = ExperimentReport::new(&cfg.task.stem(), &cfg.system, window, &cfg.sample_options());
    if let Some(s) = &cfg.sequence {
        rep.sequences.push(s.to_string());
    }
    rep
}

fn petrov(cfg: &RunConfig, extra: &mut Vec<(String, String)>) -> Result<ExperimentReport> {
    let (a, seq, n) = (
        cfg.multiplier(),
        cfg.sequence.as_ref().expect("validated"),
        cfg.int("window.n"),
    );
    let h = cfg.rat("params.h");
    let mut rep = blank(cfg, Window::Recurrence { k: 1, n });
    let pairs = petrov_pairs(a, seq, n, cfg.arcs)?;
    let mut last = None;
    for horizon in 1..=n {
        let s = petrov_ratio(a, seq, horizon, h, cfg.arcs)?;
        if let Some(r) = s.ratio {
            rep.rows.push(Row::exact("ratio", horizon as f64, r));
        }
        last = Some(s);
    }
    let bad = pairs.iter().filter(|p| !p.bound_ok).count();
    rep.verdicts.push(Verdict::check(
        "every pair obeys the correlation bound 2a^{2 gcd(i,j) − (i+j)}",
        bad == 0,
        format!("{} pairs, {bad} violations", pairs.len()),
    ));
    let last = last.expect("n ≥ 1");
    rep.verdicts.push(Verdict::with(
        "quasi-independence ratio S_N/R_N",
        Outcome::Exploratory,
        match last.ratio {
            Some(r) => format!("{r} at N = {n}"),
            None => format!("undefined at N = {n}"),
        },
    ));
    rep.detail("summary", &last);
    extra.push(("pairs.csv".into(), pairs_to_csv(&pairs)));
    Ok(rep)
}

fn ulam_operator(cfg: &RunConfig, extra: &mut Vec<(String, String)>) -> Result<ExperimentReport> {
    let bins = cfg.int("params.bins") as usize;
    let op = build_ulam(&cfg.system, bins)?;
    let mut rep = blank(cfg, Window::Bins { bins });
    for (i, d) in op.density.iter().enumerate() {
        rep.rows.push(Row::exact("density", (i as f64 + 0.5) / bins as f64, *d));
    }
    let defect = op.max_row_defect();
    rep.verdicts.push(Verdict::check(
        "transition rows are stochastic",
        defect <= 1e-9,
        format!("max row defect {defect:e}"),
    ));
    rep.detail("density_bounds", op.density_bounds()?);
    rep.detail("density_residual", op.density_residual);
    rep.detail("second_eigenvalue", &op.second);
    let fam = TestFamily::for_bins(bins);
    match correlation_decay_fit(&op, fam, fam.default_n_max()) {
        Ok(fit) => rep.detail("decay", &fit),
        Err(e) => rep.warnings.push(format!("no decay fit: {e}")),
    }
    extra.push(("matrix.csv".into(), op.matrix_csv()));
    extra.push(("density.csv".into(), op.density_csv()));
    Ok(rep)
}

fn ulam_series(cfg: &RunConfig) -> Result<ExperimentReport> {
    let seq = cfg.sequence.as_ref().expect("validated");
    let n_max = cfg.int("window.n_max");
    let op = build_ulam(&cfg.system, cfg.int("params.bins") as usize)?;
    let s = ball_measure_series(&op, seq, n_max as usize)?;
    let mut rep = blank(cfg, Window::Steps { n_max });
    for n in log_grid(1, n_max, 10) {
        let i = (n - 1) as usize;
        rep.rows.push(Row::exact("term", n as f64, s.terms[i]));
        rep.rows.push(Row::exact("partial_sum", n as f64, s.partial_sums[i]));
    }
    let divergent = tail_sum(seq, 1, 1)?.is_none();
    let claim = "series verdict agrees with Σ r_n";
    rep.verdicts.push(match s.verdict {
        SeriesVerdict::Inconclusive => Verdict::with(claim, Outcome::Exploratory, "tail test inconclusive"),
        v => Verdict::check(
            claim,
            (v == SeriesVerdict::Divergent) == divergent,
            format!(
                "{v:?} against Σ r_n {}",
                if divergent { "divergent" } else { "convergent" }
            ),
        ),
    });
    rep.detail("raabe", s.raabe);
    rep.detail("bertrand", s.bertrand);
    rep.detail("verdict", s.verdict);
    Ok(rep)
}

fn nt_gcd(cfg: &RunConfig) -> Result<ExperimentReport> {
    let max = cfg.int("params.max");
    let checks = gcd_sweep(cfg.multiplier(), max)?;
    let mut rep = blank(cfg, Window::Steps { n_max: max });
    let bad = checks.iter().filter(|c| !c.holds).count();
    rep.verdicts.push(Verdict::check(
        format!("gcd(a^m − 1, a^n − 1) = a^gcd(m,n) − 1 for m, n ≤ {max}"),
        bad == 0,
        format!("{} pairs, {bad} failures", checks.len()),
    ));
    rep.detail("checks", &checks);
    Ok(rep)
}

fn nt_lattice(cfg: &RunConfig) -> Result<ExperimentReport> {
    let (m, n, r) = (cfg.int("params.m"), cfg.int("params.n"), cfg.int("params.box") as i64);
    let lat = scalar_lattice(cfg.multiplier(), m, n)?;
    let chk = check_scalar_lattice(&lat, r)?;
    let mut rep = blank(cfg, Window::Indices { m, n });
    rep.verdicts.push(Verdict::check(
        "generator solves k(a^m − 1) + l(a^n − 1) = 0",
        lat.verify(),
        format!("(k0, l0) = ({}, {})", lat.k0, lat.l0),
    ));
    rep.verdicts.push(Verdict::check(
        format!("lattice equals brute force over |k|, |l| ≤ {r}"),
        chk.complete(),
        format!(
            "{} brute-force solutions, {} generated",
            chk.oracle_count, chk.generated_count
        ),
    ));
    rep.detail("lattice", &lat);
    rep.detail("check", &chk);
    Ok(rep)
}

fn nt_matrix_lattice(cfg: &RunConfig) -> Result<ExperimentReport> {
    let rows = match &cfg.system {
        SystemSpec::ToralLinear { matrix } => matrix.clone(),
        SystemSpec::IntegerCircleMap { a } => vec![vec![*a]],
        other => unreachable!("validated matrix system, got {other}"),
    };
    let (m, n, r) = (cfg.int("params.m"), cfg.int("params.n"), cfg.int("params.box") as i64);
    let lat = matrix_lattice(&rows, m, n)?;
    let chk = check_matrix_lattice(&lat, r)?;
    let mut rep = blank(cfg, Window::Indices { m, n });
    rep.verdicts.push(Verdict::check(
        "generators solve (B^m − I)k = (B^n − I)l",
        lat.identity_holds,
        format!("gcd(m, n) = {}", lat.p),
    ));
    rep.verdicts.push(Verdict::check(
        format!("lattice equals brute force over entries in [−{r}, {r}]"),
        chk.complete(),
        format!(
            "{} brute-force solutions, {} generated",
            chk.oracle_count, chk.generated_count
        ),
    ));
    rep.detail("lattice", &lat);
    rep.detail("check", &chk);
    Ok(rep)
}

fn exact_set(cfg: &RunConfig) -> Result<ExperimentReport> {
    let (a, seq) = (cfg.multiplier(), cfg.sequence.as_ref().expect("validated"));
    let (k, n) = (cfg.int("window.k"), cfg.int("window.n"));
    let mut rep = blank(cfg, Window::Recurrence { k, n });
    let one = num_rational::BigRational::one();
    let mut mismatches = Vec::new();
    let mut sets = Vec::new();
    for i in k..=n {
        let r = seq.eval_rational(i)?;
        let e = build_recurrence_set(a, i, &r, cfg.arcs)?;
        let expected = (&r + &r).min(one.clone());
        if e.measure != expected {
            mismatches.push(i);
        }
        rep.rows
            .push(Row::exact("measure", i as f64, rational_to_f64(&e.measure)));
        sets.push(serde_json::json!({
            "n": i,
            "r": format!("{}", e.r),
            "measure": format!("{}", e.measure),
            "arcs": e.arc_count,
        }));
    }
    rep.verdicts.push(Verdict::check(
        "μ(E_n) = min(1, 2r_n) exactly",
        mismatches.is_empty(),
        if mismatches.is_empty() {
            format!("n = {k}..={n}")
        } else {
            format!("differs at n = {mismatches:?}")
        },
    ));
    rep.detail("sets", sets);
    Ok(rep)
}

fn exact_union(cfg: &RunConfig) -> Result<ExperimentReport> {
    let (a, seq) = (cfg.multiplier(), cfg.sequence.as_ref().expect("validated"));
    let (k, n) = (cfg.int("window.k"), cfg.int("window.n"));
    let u = rio_exact(a, seq, k, n, cfg.arcs)?;
    let bound = easy_bound(seq, k, n, 1)?;
    let value = rational_to_f64(&u);
    let mut rep = blank(cfg, Window::Recurrence { k, n });
    rep.rows.push(Row::exact("union", n as f64, value));
    rep.verdicts.push(Verdict::check(
        "μ(∪ E_n) ≤ Σ min(1, 2r_n)",
        value <= bound + 1e-12,
        format!("{value} against {bound}"),
    ));
    rep.detail("measure", format!("{u}"));
    rep.detail("easy_bound", bound);
    Ok(rep)
}

/// The configured start point, exact when the system allows it, otherwise a
/// fixed-point one sampled from the seed.
fn start_point(cfg: &RunConfig, horizon: usize) -> Result<(OrbitPoint, u64)> {
    let sys = &cfg.system;
    let bits = sample_bits(sys, horizon, cfg.precision_bits)?;
    Ok(match cfg.rats("params.x0") {
        Some(xs) if supports_exact(sys) => (OrbitPoint::exact_vec(xs.to_vec()), 0),
        Some(xs) => (OrbitPoint::exact_vec(xs.to_vec()).to_fixed(bits), bits),
        None => (
            OrbitPoint::sample(&mut sample_rng(cfg.seed, 0), sys.dimension(), bits),
            bits,
        ),
    })
}

fn orbit_dump(cfg: &RunConfig, extra: &mut Vec<(String, String)>) -> Result<ExperimentReport> {
    let n = cfg.int("window.n_max");
    let (x, bits) = start_point(cfg, n as usize)?;
    let d = return_distances(&cfg.system, &x, n as usize)?;
    let mut rep = blank(cfg, Window::Steps { n_max: n });
    rep.precision_bits = (bits > 0).then_some(bits);
    for (i, &di) in d.iter().enumerate() {
        rep.rows.push(Row::exact("distance", (i + 1) as f64, unscale(di)));
    }
    rep.detail("x0", (0..x.dim()).map(|c| x.to_f64(c)).collect::<Vec<_>>());
    extra.push(("orbit.csv".into(), orbit_csv(&cfg.system, &x, n as usize)?));
    Ok(rep)
}

fn orbit_returns(cfg: &RunConfig) -> Result<ExperimentReport> {
    let n = cfg.int("window.n");
    let radii = cfg.floats("params.radii");
    let (x, bits) = start_point(cfg, n as usize)?;
    let d = return_distances(&cfg.system, &x, n as usize)?;
    let exps = exponents_from_distances(&d, radii)?;
    let mut rep = blank(cfg, Window::Steps { n_max: n });
    rep.precision_bits = (bits > 0).then_some(bits);
    for &r in radii {
        if let ReturnTime::Returned(t) = first_return(&d, r) {
            rep.rows.push(Row::exact("return_time", r, t as f64));
        }
    }
    rep.verdicts.push(Verdict::with(
        "return-time exponent against the dimension",
        Outcome::Exploratory,
        format!(
            "slope {} in [{}, {}], dimension {}",
            exps.slope,
            exps.lower,
            exps.upper,
            cfg.system.dimension()
        ),
    ));
    rep.detail("x0", (0..x.dim()).map(|c| x.to_f64(c)).collect::<Vec<_>>());
    rep.detail("exponents", &exps);
    Ok(rep)
}
