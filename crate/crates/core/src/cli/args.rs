//! Command-line front end. Flags become a TOML table laid over `--config`.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use toml::{Table, Value};

use super::config::{config_from_table, merge, sequence_table, system_table, RunConfig};
use super::run::run;
use crate::circle::RadiusSequence;
use crate::dynamics::SystemSpec;
use crate::error::{Error, Result};

const AFTER_HELP: &str = "\
Outputs go to <out>/<verb>-<mode>.json and <verb>-<mode>.tsv.
TSV columns: series, x, estimate, ci_low, ci_high, samples.
  series   name of the plotted curve (e.g. horizon, start, alpha=2, density)
  x        abscissa: horizon N, start k, step n, radius r or bin centre
  ci_low, ci_high   95% Wilson interval; equal to estimate for exact values
  samples  Monte Carlo sample count behind the row (0 when exact)
Exit status: 0 all verdicts pass, 2 some verdict failed, 1 error.";

#[derive(Parser, Debug)]
#[command(name = "recurlab", version, about = "Quantitative recurrence experiments", after_help = AFTER_HELP)]
pub struct Cli {
    #[command(subcommand)]
    pub verb: Verb,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Arc budget of exact interval constructions.
    #[arg(long = "budget-arcs", global = true)]
    pub budget_arcs: Option<usize>,
    /// Upper limit on fixed-point precision; runs needing more fail.
    #[arg(long = "precision-bits", global = true)]
    pub precision_bits: Option<u64>,
    /// Abort after this many seconds.
    #[arg(long = "runtime-cap", global = true, value_name = "SECONDS")]
    pub runtime_cap: Option<u64>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory [default: recurlab-out].
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// TOML configuration; flags override its entries.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
pub enum Verb {
    /// Truncated infinitely-often recurrence. Modes: measure, dichotomy, rate-scan.
    Rio(VerbArgs),
    /// Eventually-always recurrence. Modes: measure, exact, prop-bound.
    Ear(VerbArgs),
    /// Exact quasi-independence sums of the integer maps. Mode: ratio.
    Petrov(VerbArgs),
    /// Ulam transfer operator. Modes: operator, series, sandwich.
    Ulam(VerbArgs),
    /// Number-theory lemmas. Modes: gcd, lattice, matrix-lattice.
    Nt(VerbArgs),
    /// Exact recurrence sets of the integer maps. Modes: set, union.
    Exact(VerbArgs),
    /// Single orbits and return statistics. Modes: dump, returns, boshernitzan.
    Orbit(VerbArgs),
}

impl Verb {
    fn parts(&self) -> (&'static str, &VerbArgs) {
        match self {
            Verb::Rio(a) => ("rio", a),
            Verb::Ear(a) => ("ear", a),
            Verb::Petrov(a) => ("petrov", a),
            Verb::Ulam(a) => ("ulam", a),
            Verb::Nt(a) => ("nt", a),
            Verb::Exact(a) => ("exact", a),
            Verb::Orbit(a) => ("orbit", a),
        }
    }
}

/// Lists are comma separated; rationals may be written `2/5` or `0.4`.
#[derive(Args, Debug, Default)]
pub struct VerbArgs {
    /// Mode of the verb.
    pub mode: Option<String>,
    /// doubling, times:a, beta:β, rotation:α, toral:a,b;c,d or piecewise:[l,r)->sx+b;…
    #[arg(long)]
    pub system: Option<String>,
    /// Shorthand for `--system times:<a>`.
    #[arg(long, allow_hyphen_values = true)]
    pub a: Option<i64>,
    /// Shorthand for `--system toral:<rows>`, rows separated by `;`.
    #[arg(long)]
    pub matrix: Option<String>,
    /// powerlaw:κ,γ, powerlog:κ,θ, ear:delta=log2:f;h=loglog, table:r1,r2,… or const:r
    #[arg(long)]
    pub seq: Option<String>,
    /// Divergent-side sequence of `rio dichotomy`.
    #[arg(long = "seq-div")]
    pub seq_div: Option<String>,
    /// Tail start.
    #[arg(long)]
    pub k: Option<String>,
    /// Horizon.
    #[arg(long = "N")]
    pub big_n: Option<String>,
    #[arg(long)]
    pub n0: Option<String>,
    /// Eventually-always horizon.
    #[arg(long)]
    pub horizon: Option<String>,
    #[arg(long = "n-max")]
    pub n_max: Option<String>,
    #[arg(long)]
    pub checkpoints: Option<String>,
    #[arg(long)]
    pub thetas: Option<String>,
    #[arg(long)]
    pub kappa: Option<String>,
    #[arg(long)]
    pub alphas: Option<String>,
    #[arg(long = "m-grid")]
    pub m_grid: Option<String>,
    #[arg(long)]
    pub onset: Option<String>,
    #[arg(long)]
    pub sigma: Option<String>,
    /// Petrov constant H.
    #[arg(long = "H")]
    pub big_h: Option<String>,
    /// Ulam bins.
    #[arg(long)]
    pub bins: Option<String>,
    #[arg(long)]
    pub max: Option<String>,
    #[arg(long)]
    pub m: Option<String>,
    #[arg(long)]
    pub n: Option<String>,
    /// Brute-force box radius.
    #[arg(long = "box")]
    pub box_radius: Option<String>,
    /// Start point, one rational per coordinate.
    #[arg(long)]
    pub x0: Option<String>,
    #[arg(long)]
    pub radii: Option<String>,
    /// Monte Carlo samples.
    #[arg(long = "M")]
    pub samples: Option<String>,
}

fn put(t: &mut Table, section: &str, key: &str, v: Value) {
    let sec = t.entry(section).or_insert_with(|| Value::Table(Table::new()));
    if let Value::Table(sec) = sec {
        sec.insert(key.into(), v);
    }
}

fn named(flag: &str, e: Error) -> String {
    format!("--{flag}: {e}")
}

impl Cli {
    /// The flags as a configuration table, plus any flag-level errors.
    fn to_table(&self) -> (Table, Vec<String>) {
        let (verb, a) = self.verb.parts();
        let mut t = Table::new();
        let mut errs = Vec::new();
        t.insert("verb".into(), Value::String(verb.into()));
        if let Some(m) = &a.mode {
            t.insert("mode".into(), Value::String(m.clone()));
        }
        let systems = [a.system.is_some(), a.a.is_some(), a.matrix.is_some()];
        if systems.iter().filter(|&&s| s).count() > 1 {
            errs.push("--system, --a and --matrix are mutually exclusive".into());
        }
        let spec = if let Some(s) = &a.system {
            Some(s.parse::<SystemSpec>().map_err(|e| named("system", e)))
        } else if let Some(v) = a.a {
            Some(SystemSpec::integer_map(v).map_err(|e| named("a", e)))
        } else {
            a.matrix.as_ref().map(|m| {
                format!("toral:{m}")
                    .parse::<SystemSpec>()
                    .map_err(|e| named("matrix", e))
            })
        };
        match spec {
            Some(Ok(s)) => {
                t.insert("system".into(), Value::Table(system_table(&s)));
            }
            Some(Err(e)) => errs.push(e),
            None => {}
        }
        for (flag, section, text) in [("seq", "sequence", &a.seq), ("seq-div", "divergent", &a.seq_div)] {
            match text.as_ref().map(|s| s.parse::<RadiusSequence>()) {
                Some(Ok(s)) => {
                    t.insert(section.into(), Value::Table(sequence_table(&s)));
                }
                Some(Err(e)) => errs.push(named(flag, e)),
                None => {}
            }
        }
        let params = [
            ("window", "k", &a.k),
            ("window", "n", &a.big_n),
            ("window", "n0", &a.n0),
            ("window", "horizon", &a.horizon),
            ("window", "n_max", &a.n_max),
            ("window", "checkpoints", &a.checkpoints),
            ("params", "thetas", &a.thetas),
            ("params", "kappa", &a.kappa),
            ("params", "alphas", &a.alphas),
            ("params", "m_grid", &a.m_grid),
            ("params", "onset", &a.onset),
            ("params", "sigma", &a.sigma),
            ("params", "h", &a.big_h),
            ("params", "bins", &a.bins),
            ("params", "max", &a.max),
            ("params", "m", &a.m),
            ("params", "n", &a.n),
            ("params", "box", &a.box_radius),
            ("params", "x0", &a.x0),
            ("params", "radii", &a.radii),
            ("run", "samples", &a.samples),
        ];
        for (section, key, v) in params {
            if let Some(v) = v {
                put(&mut t, section, key, Value::String(v.clone()));
            }
        }
        let int = |v: u64| Value::Integer(v.min(i64::MAX as u64) as i64);
        if let Some(s) = self.seed {
            if s > i64::MAX as u64 {
                errs.push("--seed: at most 2^63 − 1".into());
            }
            put(&mut t, "run", "seed", int(s));
        }
        if let Some(v) = self.threads {
            put(&mut t, "run", "threads", int(v as u64));
        }
        if let Some(v) = &self.out {
            put(&mut t, "run", "out", Value::String(v.to_string_lossy().into_owned()));
        }
        if let Some(v) = self.budget_arcs {
            put(&mut t, "budget", "arcs", int(v as u64));
        }
        if let Some(v) = self.precision_bits {
            put(&mut t, "budget", "precision_bits", int(v));
        }
        if let Some(v) = self.runtime_cap {
            put(&mut t, "budget", "runtime_secs", int(v));
        }
        (t, errs)
    }

    /// Reads `--config` if given, lays the flags over it and validates.
    pub fn into_config(self) -> Result<RunConfig> {
        let (flags, mut errs) = self.to_table();
        let mut table = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| Error::Config(vec![format!("--config {}: {e}", path.display())]))?;
                let t: Table = text.parse().map_err(|e: toml::de::Error| {
                    Error::Config(vec![format!("--config {}: {}", path.display(), e.message())])
                })?;
                t
            }
            None => Table::new(),
        };
        if let (Some(Value::String(file)), Some(Value::String(cli))) = (table.get("verb"), flags.get("verb")) {
            if file != cli {
                errs.push(format!(
                    "verb: the configuration is for `{file}`, the command is `{cli}`"
                ));
            }
        }
        merge(&mut table, flags);
        match config_from_table(&table) {
            Ok(cfg) if errs.is_empty() => Ok(cfg),
            Ok(_) => Err(Error::Config(errs)),
            Err(Error::Config(more)) => {
                errs.extend(more);
                Err(Error::Config(errs))
            }
            Err(e) => Err(e),
        }
    }
}

/// Full command-line behaviour; returns the process exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let start = std::time::Instant::now();
    match cli.into_config().and_then(|cfg| run(&cfg)) {
        Ok(summary) => {
            print!("{summary}");
            eprintln!("finished in {:.2} s", start.elapsed().as_secs_f64());
            summary.exit_code()
        }
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}
