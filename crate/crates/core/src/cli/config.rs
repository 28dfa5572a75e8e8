//! Run configuration: a TOML document checked in full before any work starts.
//!
//! ```toml
//! verb = "rio"
//! mode = "measure"
//!
//! [system]
//! kind = "doubling"
//!
//! [sequence]
//! kind = "powerlog"
//! kappa = 1
//! theta = "2/5"
//!
//! [window]
//! k = 50
//! n = 5000
//!
//! [run]
//! samples = 2000
//! seed = 7
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;

use num_rational::BigRational;
use num_traits::Signed;
use sha2::{Digest, Sha256};
use toml::{Table, Value};

use crate::circle::{parse_rational, RadiusSequence};
use crate::dynamics::{Real, SystemSpec};
use crate::error::{Error, Result};
use crate::exact::DEFAULT_ARC_BUDGET;
use crate::experiments::{SampleOptions, DEFAULT_ULAM_BINS};

/// One verb/mode pair of the command line.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Task {
    RioMeasure,
    RioDichotomy,
    RioRateScan,
    EarMeasure,
    EarExact,
    EarPropBound,
    Petrov,
    UlamOperator,
    UlamSeries,
    UlamSandwich,
    NtGcd,
    NtLattice,
    NtMatrixLattice,
    ExactSet,
    ExactUnion,
    OrbitDump,
    OrbitReturns,
    OrbitBoshernitzan,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum SysReq {
    Any,
    Integer,
    /// Integer circle map or toral matrix.
    Matrix,
    /// One-dimensional and expanding, as the Ulam operator needs.
    Interval,
}

struct TaskSpec {
    task: Task,
    verb: &'static str,
    mode: &'static str,
    system: &'static str,
    req: SysReq,
    sequence: Option<&'static str>,
    divergent: Option<&'static str>,
    /// `(default, minimum)` sample count.
    samples: Option<(usize, usize)>,
    /// Keys the task reads, with defaults; `None` means optional.
    keys: &'static [(&'static str, Option<&'static str>)],
}

const BINS: (&str, Option<&str>) = ("params.bins", Some("4096"));

// The first entry of each verb is its default mode.
const TASKS: &[TaskSpec] = &[
    TaskSpec {
        task: Task::RioMeasure,
        verb: "rio",
        mode: "measure",
        system: "doubling",
        req: SysReq::Any,
        sequence: Some("powerlaw:1/4,1"),
        divergent: None,
        samples: Some((2000, 100)),
        keys: &[("window.k", Some("1")), ("window.n", Some("1000")), BINS],
    },
    TaskSpec {
        task: Task::RioDichotomy,
        verb: "rio",
        mode: "dichotomy",
        system: "doubling",
        req: SysReq::Any,
        sequence: Some("powerlog:1,2"),
        divergent: Some("powerlaw:1/2,1"),
        samples: Some((2000, 100)),
        keys: &[("window.k", Some("50")), ("window.n", Some("5000")), BINS],
    },
    TaskSpec {
        task: Task::RioRateScan,
        verb: "rio",
        mode: "rate-scan",
        system: "doubling",
        req: SysReq::Any,
        sequence: None,
        divergent: None,
        samples: Some((2000, 100)),
        keys: &[
            ("window.k", Some("50")),
            ("window.n", Some("5000")),
            ("params.thetas", Some("2/5,3/4,3/2")),
            ("params.kappa", Some("1")),
            BINS,
        ],
    },
    TaskSpec {
        task: Task::EarMeasure,
        verb: "ear",
        mode: "measure",
        system: "doubling",
        req: SysReq::Any,
        sequence: Some("powerlaw:1,2"),
        divergent: None,
        samples: Some((2000, 100)),
        keys: &[("window.n0", Some("10")), ("window.horizon", Some("1000")), BINS],
    },
    TaskSpec {
        task: Task::EarExact,
        verb: "ear",
        mode: "exact",
        system: "doubling",
        req: SysReq::Integer,
        sequence: Some("powerlaw:1,2"),
        divergent: None,
        samples: None,
        keys: &[("window.n0", Some("4")), ("window.horizon", Some("16"))],
    },
    TaskSpec {
        task: Task::EarPropBound,
        verb: "ear",
        mode: "prop-bound",
        system: "doubling",
        req: SysReq::Integer,
        sequence: Some("ear:delta=log2:3;h=const:1"),
        divergent: None,
        samples: None,
        keys: &[
            ("params.sigma", Some("1")),
            ("params.m_grid", Some("4,8,12,16")),
            ("params.onset", Some("1")),
        ],
    },
    TaskSpec {
        task: Task::Petrov,
        verb: "petrov",
        mode: "ratio",
        system: "doubling",
        req: SysReq::Integer,
        sequence: Some("powerlaw:1/4,1"),
        divergent: None,
        samples: None,
        keys: &[("window.n", Some("12")), ("params.h", Some("1"))],
    },
    TaskSpec {
        task: Task::UlamOperator,
        verb: "ulam",
        mode: "operator",
        system: "doubling",
        req: SysReq::Interval,
        sequence: None,
        divergent: None,
        samples: None,
        keys: &[("params.bins", Some("1024"))],
    },
    TaskSpec {
        task: Task::UlamSeries,
        verb: "ulam",
        mode: "series",
        system: "doubling",
        req: SysReq::Interval,
        sequence: Some("powerlaw:1,2"),
        divergent: None,
        samples: None,
        keys: &[("params.bins", Some("1024")), ("window.n_max", Some("10000"))],
    },
    TaskSpec {
        task: Task::UlamSandwich,
        verb: "ulam",
        mode: "sandwich",
        system: "beta:golden",
        req: SysReq::Interval,
        sequence: Some("powerlaw:1/4,1"),
        divergent: None,
        samples: Some((2000, 100)),
        keys: &[("window.n_max", Some("30")), BINS],
    },
    TaskSpec {
        task: Task::NtGcd,
        verb: "nt",
        mode: "gcd",
        system: "doubling",
        req: SysReq::Integer,
        sequence: None,
        divergent: None,
        samples: None,
        keys: &[("params.max", Some("12"))],
    },
    TaskSpec {
        task: Task::NtLattice,
        verb: "nt",
        mode: "lattice",
        system: "doubling",
        req: SysReq::Integer,
        sequence: None,
        divergent: None,
        samples: None,
        keys: &[
            ("params.m", Some("4")),
            ("params.n", Some("2")),
            ("params.box", Some("200")),
        ],
    },
    TaskSpec {
        task: Task::NtMatrixLattice,
        verb: "nt",
        mode: "matrix-lattice",
        system: "toral:1,1;1,0",
        req: SysReq::Matrix,
        sequence: None,
        divergent: None,
        samples: None,
        keys: &[
            ("params.m", Some("3")),
            ("params.n", Some("2")),
            ("params.box", Some("5")),
        ],
    },
    TaskSpec {
        task: Task::ExactSet,
        verb: "exact",
        mode: "set",
        system: "doubling",
        req: SysReq::Integer,
        sequence: Some("powerlaw:1/4,1"),
        divergent: None,
        samples: None,
        keys: &[("window.k", Some("1")), ("window.n", Some("12"))],
    },
    TaskSpec {
        task: Task::ExactUnion,
        verb: "exact",
        mode: "union",
        system: "doubling",
        req: SysReq::Integer,
        sequence: Some("powerlaw:1/4,1"),
        divergent: None,
        samples: None,
        keys: &[("window.k", Some("1")), ("window.n", Some("12"))],
    },
    TaskSpec {
        task: Task::OrbitDump,
        verb: "orbit",
        mode: "dump",
        system: "doubling",
        req: SysReq::Any,
        sequence: None,
        divergent: None,
        samples: None,
        keys: &[("window.n_max", Some("100")), ("params.x0", None)],
    },
    TaskSpec {
        task: Task::OrbitReturns,
        verb: "orbit",
        mode: "returns",
        system: "doubling",
        req: SysReq::Any,
        sequence: None,
        divergent: None,
        samples: None,
        keys: &[
            ("window.n", Some("100000")),
            ("params.radii", Some("0.1,0.03,0.01,0.003,0.001,0.0003")),
            ("params.x0", None),
        ],
    },
    TaskSpec {
        task: Task::OrbitBoshernitzan,
        verb: "orbit",
        mode: "boshernitzan",
        system: "doubling",
        req: SysReq::Any,
        sequence: None,
        divergent: None,
        samples: Some((1000, 10)),
        keys: &[
            ("params.alphas", Some("1,2")),
            ("window.checkpoints", Some("100,1000,10000")),
            BINS,
        ],
    },
];

/// Verbs whose mode must be named.
const MODE_REQUIRED: &[&str] = &["nt"];

pub const VERBS: &[&str] = &["rio", "ear", "petrov", "ulam", "nt", "exact", "orbit"];

impl Task {
    fn spec(self) -> &'static TaskSpec {
        TASKS.iter().find(|s| s.task == self).expect("every task has a spec")
    }

    pub fn verb(self) -> &'static str {
        self.spec().verb
    }

    pub fn mode(self) -> &'static str {
        self.spec().mode
    }

    /// File stem of the outputs, `verb-mode`.
    pub fn stem(self) -> String {
        format!("{}-{}", self.verb(), self.mode())
    }

    pub fn modes(verb: &str) -> Vec<&'static str> {
        TASKS.iter().filter(|s| s.verb == verb).map(|s| s.mode).collect()
    }

    pub fn lookup(verb: &str, mode: Option<&str>) -> std::result::Result<Task, String> {
        if !VERBS.contains(&verb) {
            return Err(format!("verb: unknown `{verb}`; use one of {}", VERBS.join(", ")));
        }
        let modes = Task::modes(verb);
        match mode {
            None if MODE_REQUIRED.contains(&verb) => {
                Err(format!("mode: `{verb}` needs a mode, one of {}", modes.join(", ")))
            }
            None => Ok(TASKS.iter().find(|s| s.verb == verb).expect("verb has tasks").task),
            Some(m) => TASKS
                .iter()
                .find(|s| s.verb == verb && s.mode == m)
                .map(|s| s.task)
                .ok_or_else(|| format!("mode: `{m}` is not a mode of `{verb}`; use one of {}", modes.join(", "))),
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.verb(), self.mode())
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Kind {
    Int,
    Ints,
    Rat,
    Rats,
    Float,
    Floats,
}

const PARAMS: &[(&str, Kind)] = &[
    ("window.k", Kind::Int),
    ("window.n", Kind::Int),
    ("window.n0", Kind::Int),
    ("window.horizon", Kind::Int),
    ("window.n_max", Kind::Int),
    ("window.checkpoints", Kind::Ints),
    ("params.thetas", Kind::Rats),
    ("params.kappa", Kind::Rat),
    ("params.alphas", Kind::Floats),
    ("params.m_grid", Kind::Ints),
    ("params.onset", Kind::Int),
    ("params.sigma", Kind::Float),
    ("params.h", Kind::Rat),
    ("params.bins", Kind::Int),
    ("params.max", Kind::Int),
    ("params.m", Kind::Int),
    ("params.n", Kind::Int),
    ("params.box", Kind::Int),
    ("params.x0", Kind::Rats),
    ("params.radii", Kind::Floats),
];

/// A typed window or parameter value.
#[derive(Clone, Debug, PartialEq)]
pub enum Param {
    Int(u64),
    Ints(Vec<u64>),
    Rat(BigRational),
    Rats(Vec<BigRational>),
    Float(f64),
    Floats(Vec<f64>),
}

fn rat_text(q: &BigRational) -> String {
    if q.is_integer() {
        q.numer().to_string()
    } else {
        format!("{}/{}", q.numer(), q.denom())
    }
}

impl Param {
    fn to_toml(&self) -> Value {
        let int = |v: u64| Value::Integer(v as i64);
        match self {
            Param::Int(v) => int(*v),
            Param::Ints(v) => Value::Array(v.iter().map(|&x| int(x)).collect()),
            Param::Rat(q) => Value::String(rat_text(q)),
            Param::Rats(v) => Value::Array(v.iter().map(|q| Value::String(rat_text(q))).collect()),
            Param::Float(x) => Value::Float(*x),
            Param::Floats(v) => Value::Array(v.iter().map(|&x| Value::Float(x)).collect()),
        }
    }
}

fn scalar_text(v: &Value) -> Option<String> {
    match v {
        Value::String(s) => Some(s.trim().to_string()),
        Value::Integer(i) => Some(i.to_string()),
        Value::Float(f) => Some(f.to_string()),
        _ => None,
    }
}

fn list_texts(v: &Value) -> Option<Vec<String>> {
    match v {
        Value::Array(items) => items.iter().map(scalar_text).collect(),
        Value::String(s) => Some(s.split(',').map(|t| t.trim().to_string()).collect()),
        _ => scalar_text(v).map(|t| vec![t]),
    }
}

fn read_int(t: &str) -> std::result::Result<u64, String> {
    let v: u64 = t
        .parse()
        .map_err(|_| format!("expected a non-negative integer, got `{t}`"))?;
    if v > i64::MAX as u64 {
        return Err(format!("{v} exceeds 2^63 − 1"));
    }
    Ok(v)
}

fn read_rat(t: &str) -> std::result::Result<BigRational, String> {
    parse_rational(t).map_err(|_| format!("expected a rational such as 2/5 or 0.4, got `{t}`"))
}

fn read_float(t: &str) -> std::result::Result<f64, String> {
    t.parse::<f64>()
        .ok()
        .or_else(|| parse_rational(t).ok().map(|q| crate::circle::rational_to_f64(&q)))
        .filter(|x| x.is_finite())
        .ok_or_else(|| format!("expected a number, got `{t}`"))
}

fn read_param(kind: Kind, v: &Value) -> std::result::Result<Param, String> {
    let one = || scalar_text(v).ok_or_else(|| "expected a scalar".to_string());
    let many = || list_texts(v).ok_or_else(|| "expected a list".to_string());
    Ok(match kind {
        Kind::Int => Param::Int(read_int(&one()?)?),
        Kind::Rat => Param::Rat(read_rat(&one()?)?),
        Kind::Float => Param::Float(read_float(&one()?)?),
        Kind::Ints => Param::Ints(
            many()?
                .iter()
                .map(|t| read_int(t))
                .collect::<std::result::Result<_, _>>()?,
        ),
        Kind::Rats => Param::Rats(
            many()?
                .iter()
                .map(|t| read_rat(t))
                .collect::<std::result::Result<_, _>>()?,
        ),
        Kind::Floats => Param::Floats(
            many()?
                .iter()
                .map(|t| read_float(t))
                .collect::<std::result::Result<_, _>>()?,
        ),
    })
}

/// A fully validated run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub task: Task,
    pub system: SystemSpec,
    pub sequence: Option<RadiusSequence>,
    /// Divergent-side sequence of a dichotomy run.
    pub divergent: Option<RadiusSequence>,
    /// `section.key` to value, with every default filled in.
    pub params: BTreeMap<String, Param>,
    pub samples: Option<usize>,
    pub seed: u64,
    pub arcs: usize,
    pub precision_bits: Option<u64>,
    pub threads: Option<usize>,
    pub runtime_secs: Option<u64>,
    pub out: PathBuf,
}

pub const DEFAULT_OUT: &str = "recurlab-out";

impl RunConfig {
    fn get(&self, key: &str) -> &Param {
        self.params
            .get(key)
            .unwrap_or_else(|| panic!("`{key}` is not used by {}", self.task))
    }

    pub fn int(&self, key: &str) -> u64 {
        match self.get(key) {
            Param::Int(v) => *v,
            p => panic!("`{key}` is {p:?}"),
        }
    }

    pub fn ints(&self, key: &str) -> &[u64] {
        match self.get(key) {
            Param::Ints(v) => v,
            p => panic!("`{key}` is {p:?}"),
        }
    }

    pub fn rat(&self, key: &str) -> &BigRational {
        match self.get(key) {
            Param::Rat(v) => v,
            p => panic!("`{key}` is {p:?}"),
        }
    }

    pub fn rats(&self, key: &str) -> Option<&[BigRational]> {
        match self.params.get(key)? {
            Param::Rats(v) => Some(v),
            p => panic!("`{key}` is {p:?}"),
        }
    }

    pub fn float(&self, key: &str) -> f64 {
        match self.get(key) {
            Param::Float(v) => *v,
            p => panic!("`{key}` is {p:?}"),
        }
    }

    pub fn floats(&self, key: &str) -> &[f64] {
        match self.get(key) {
            Param::Floats(v) => v,
            p => panic!("`{key}` is {p:?}"),
        }
    }

    /// Multiplier of an integer circle map; validation guarantees one.
    pub fn multiplier(&self) -> i64 {
        match self.system {
            SystemSpec::IntegerCircleMap { a } => a,
            _ => panic!("{} needs an integer circle map", self.task),
        }
    }

    pub fn sample_options(&self) -> SampleOptions {
        SampleOptions {
            samples: self.samples.unwrap_or(0),
            seed: self.seed,
            precision_bits: self.precision_bits,
            ulam_bins: match self.params.get("params.bins") {
                Some(Param::Int(b)) => *b as usize,
                _ => DEFAULT_ULAM_BINS,
            },
            arc_budget: self.arcs,
        }
    }

    /// The configuration as TOML, omitting settings that cannot change the
    /// report (threads, output directory, runtime cap).
    pub fn normalized(&self) -> String {
        let mut t = Table::new();
        t.insert("verb".into(), Value::String(self.task.verb().into()));
        t.insert("mode".into(), Value::String(self.task.mode().into()));
        t.insert("system".into(), Value::Table(system_table(&self.system)));
        if let Some(s) = &self.sequence {
            t.insert("sequence".into(), Value::Table(sequence_table(s)));
        }
        if let Some(s) = &self.divergent {
            t.insert("divergent".into(), Value::Table(sequence_table(s)));
        }
        for (key, p) in &self.params {
            let (section, name) = key.split_once('.').expect("qualified key");
            let sec = t.entry(section).or_insert_with(|| Value::Table(Table::new()));
            if let Value::Table(sec) = sec {
                sec.insert(name.into(), p.to_toml());
            }
        }
        let mut run = Table::new();
        if let Some(m) = self.samples {
            run.insert("samples".into(), Value::Integer(m as i64));
        }
        run.insert("seed".into(), Value::Integer(self.seed as i64));
        t.insert("run".into(), Value::Table(run));
        let mut budget = Table::new();
        budget.insert("arcs".into(), Value::Integer(self.arcs as i64));
        if let Some(b) = self.precision_bits {
            budget.insert("precision_bits".into(), Value::Integer(b as i64));
        }
        t.insert("budget".into(), Value::Table(budget));
        toml::to_string(&t).expect("tables serialise")
    }

    /// SHA-256 of [`RunConfig::normalized`], hex encoded.
    pub fn hash(&self) -> String {
        Sha256::digest(self.normalized().as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

/// Structured form of a system.
pub fn system_table(sys: &SystemSpec) -> Table {
    let mut t = Table::new();
    let text = sys.to_string();
    let (kind, body) = text.split_once(':').unwrap_or((text.as_str(), ""));
    let kind = if kind == "piecewise-circle" { "piecewise" } else { kind };
    t.insert("kind".into(), Value::String(kind.into()));
    match sys {
        SystemSpec::IntegerCircleMap { a } if *a != 2 => {
            t.insert("a".into(), Value::Integer(*a));
        }
        SystemSpec::BetaMap { beta } => {
            t.insert("beta".into(), Value::String(beta.to_string()));
        }
        SystemSpec::Rotation { alpha } => {
            t.insert("alpha".into(), Value::String(alpha.to_string()));
        }
        SystemSpec::ToralLinear { matrix } => {
            let rows = matrix
                .iter()
                .map(|r| Value::Array(r.iter().map(|&v| Value::Integer(v)).collect()))
                .collect();
            t.insert("matrix".into(), Value::Array(rows));
        }
        SystemSpec::PiecewiseLinear(m) => {
            let branches = body.split(';').map(|b| Value::String(b.into())).collect();
            t.insert("branches".into(), Value::Array(branches));
            let metric = match m.metric() {
                crate::dynamics::Metric::Circle => "circle",
                crate::dynamics::Metric::Interval => "interval",
            };
            t.insert("metric".into(), Value::String(metric.into()));
        }
        SystemSpec::IntegerCircleMap { .. } => {}
    }
    t
}

/// Structured form of a radius sequence.
pub fn sequence_table(seq: &RadiusSequence) -> Table {
    let mut t = Table::new();
    let s = |q: &BigRational| Value::String(rat_text(q));
    match seq {
        RadiusSequence::PowerLaw { kappa, gamma } => {
            t.insert("kind".into(), Value::String("powerlaw".into()));
            t.insert("kappa".into(), s(kappa));
            t.insert("gamma".into(), s(gamma));
        }
        RadiusSequence::PowerLog { kappa, theta } => {
            t.insert("kind".into(), Value::String("powerlog".into()));
            t.insert("kappa".into(), s(kappa));
            t.insert("theta".into(), s(theta));
        }
        RadiusSequence::Ear { .. } => {
            let text = seq.to_string();
            let body = text.strip_prefix("ear:delta=").expect("ear display form");
            let (delta, h) = body.split_once(";h=").expect("ear display form");
            t.insert("kind".into(), Value::String("ear".into()));
            t.insert("delta".into(), Value::String(delta.into()));
            t.insert("h".into(), Value::String(h.into()));
        }
        RadiusSequence::ExplicitTable(v) => {
            t.insert("kind".into(), Value::String("table".into()));
            t.insert("values".into(), Value::Array(v.iter().map(s).collect()));
        }
    }
    t
}

const SYSTEM_KEYS: &[(&str, &[&str])] = &[
    ("doubling", &[]),
    ("times", &["a"]),
    ("beta", &["beta"]),
    ("rotation", &["alpha"]),
    ("toral", &["matrix"]),
    ("piecewise", &["branches", "metric"]),
];

const SEQUENCE_KEYS: &[(&str, &[&str])] = &[
    ("powerlaw", &["kappa", "gamma"]),
    ("powerlog", &["kappa", "theta"]),
    ("ear", &["delta", "h"]),
    ("table", &["values"]),
    ("const", &["r"]),
];

/// Checks `kind` and the key set of a system or sequence table; returns the
/// kind when the keys fit it.
fn kind_of<'a>(section: &str, t: &'a Table, kinds: &[(&str, &[&str])], errs: &mut Vec<String>) -> Option<&'a str> {
    let names: Vec<&str> = kinds.iter().map(|k| k.0).collect();
    let kind = match t.get("kind") {
        Some(Value::String(k)) => k.as_str(),
        Some(_) => {
            errs.push(format!("{section}.kind: expected a string"));
            return None;
        }
        None => {
            errs.push(format!("{section}.kind: missing; use one of {}", names.join(", ")));
            return None;
        }
    };
    let Some((_, keys)) = kinds.iter().find(|k| k.0 == kind) else {
        errs.push(format!(
            "{section}.kind: unknown `{kind}`; use one of {}",
            names.join(", ")
        ));
        return None;
    };
    let before = errs.len();
    for key in t.keys().filter(|k| *k != "kind") {
        if !keys.contains(&key.as_str()) {
            errs.push(format!("{section}.{key}: unknown key for kind `{kind}`"));
        }
    }
    for key in keys.iter() {
        let optional = kind == "piecewise" && *key == "metric";
        if !optional && !t.contains_key(*key) {
            errs.push(format!("{section}.{key}: required for kind `{kind}`"));
        }
    }
    (errs.len() == before).then_some(kind)
}

fn named(section: &str, e: Error) -> String {
    match e {
        Error::InvalidParameter { field, reason } => format!("{section}.{field}: {reason}"),
        other => format!("{section}: {other}"),
    }
}

fn read_system(t: &Table, errs: &mut Vec<String>) -> Option<SystemSpec> {
    let kind = kind_of("system", t, SYSTEM_KEYS, errs)?;
    let text = |key: &str, errs: &mut Vec<String>| {
        let v = scalar_text(&t[key]);
        if v.is_none() {
            errs.push(format!("system.{key}: expected a number or string"));
        }
        v
    };
    let built = match kind {
        "doubling" => Ok(SystemSpec::doubling()),
        "times" => match &t["a"] {
            Value::Integer(a) => SystemSpec::integer_map(*a),
            _ => {
                errs.push("system.a: expected an integer".into());
                return None;
            }
        },
        "beta" => {
            let b = text("beta", errs)?;
            b.parse::<Real>().and_then(SystemSpec::beta)
        }
        "rotation" => {
            let a = text("alpha", errs)?;
            a.parse::<Real>().map(|alpha| SystemSpec::Rotation { alpha })
        }
        "toral" => {
            let rows: Option<Vec<Vec<i64>>> = t["matrix"].as_array().and_then(|rows| {
                rows.iter()
                    .map(|r| r.as_array()?.iter().map(|v| v.as_integer()).collect())
                    .collect()
            });
            match rows {
                Some(rows) => SystemSpec::toral(rows),
                None => {
                    errs.push("system.matrix: expected an array of integer rows".into());
                    return None;
                }
            }
        }
        _ => {
            let branches: Option<Vec<&str>> = t["branches"]
                .as_array()
                .and_then(|b| b.iter().map(|v| v.as_str()).collect());
            let Some(branches) = branches else {
                errs.push("system.branches: expected an array of `[l,r)->sx+b` strings".into());
                return None;
            };
            let prefix = match t.get("metric").map(|m| m.as_str()) {
                None | Some(Some("interval")) => "piecewise",
                Some(Some("circle")) => "piecewise-circle",
                _ => {
                    errs.push("system.metric: use `interval` or `circle`".into());
                    return None;
                }
            };
            format!("{prefix}:{}", branches.join(";")).parse()
        }
    };
    built.map_err(|e| errs.push(named("system", e))).ok()
}

fn read_sequence(section: &str, t: &Table, errs: &mut Vec<String>) -> Option<RadiusSequence> {
    let kind = kind_of(section, t, SEQUENCE_KEYS, errs)?;
    let mut rat = |key: &str| match scalar_text(&t[key]).map(|s| read_rat(&s)) {
        Some(Ok(q)) => Some(q),
        Some(Err(e)) => {
            errs.push(format!("{section}.{key}: {e}"));
            None
        }
        None => {
            errs.push(format!("{section}.{key}: expected a number or string"));
            None
        }
    };
    let built = match kind {
        "powerlaw" => {
            let (k, g) = (rat("kappa"), rat("gamma"));
            RadiusSequence::power_law(k?, g?)
        }
        "powerlog" => {
            let (k, th) = (rat("kappa"), rat("theta"));
            RadiusSequence::power_log(k?, th?)
        }
        "const" => RadiusSequence::constant(rat("r")?),
        "table" => {
            let vals = list_texts(&t["values"]).map(|v| {
                v.iter()
                    .map(|s| read_rat(s))
                    .collect::<std::result::Result<Vec<_>, _>>()
            });
            match vals {
                Some(Ok(v)) => RadiusSequence::table(v),
                Some(Err(e)) => {
                    errs.push(format!("{section}.values: {e}"));
                    return None;
                }
                None => {
                    errs.push(format!("{section}.values: expected a list"));
                    return None;
                }
            }
        }
        _ => {
            let (Some(d), Some(h)) = (t["delta"].as_str(), t["h"].as_str()) else {
                errs.push(format!(
                    "{section}: `delta` and `h` must be strings such as \"log2:3\" and \"loglog\""
                ));
                return None;
            };
            format!("ear:delta={d};h={h}").parse()
        }
    };
    built.map_err(|e| errs.push(named(section, e))).ok()
}

const TOP_KEYS: &[&str] = &[
    "verb",
    "mode",
    "system",
    "sequence",
    "divergent",
    "window",
    "params",
    "run",
    "budget",
];
const RUN_KEYS: &[&str] = &["samples", "seed", "threads", "out"];
const BUDGET_KEYS: &[&str] = &["arcs", "precision_bits", "runtime_secs"];

fn sub_table<'a>(t: &'a Table, name: &str, errs: &mut Vec<String>) -> Option<&'a Table> {
    match t.get(name) {
        None => None,
        Some(Value::Table(s)) => Some(s),
        Some(_) => {
            errs.push(format!("{name}: expected a table"));
            None
        }
    }
}

fn check_keys(name: &str, t: &Table, allowed: &[&str], errs: &mut Vec<String>) {
    for key in t.keys() {
        if !allowed.contains(&key.as_str()) {
            errs.push(format!("{name}.{key}: unknown key"));
        }
    }
}

fn opt_int(t: Option<&Table>, section: &str, key: &str, errs: &mut Vec<String>) -> Option<u64> {
    let v = t?.get(key)?;
    match scalar_text(v)
        .ok_or_else(|| "expected an integer".to_string())
        .and_then(|s| read_int(&s))
    {
        Ok(x) => Some(x),
        Err(e) => {
            errs.push(format!("{section}.{key}: {e}"));
            None
        }
    }
}

/// Validates a parsed TOML table, reporting every problem at once.
pub fn config_from_table(t: &Table) -> Result<RunConfig> {
    let mut errs = Vec::new();
    for key in t.keys() {
        if !TOP_KEYS.contains(&key.as_str()) {
            errs.push(format!("{key}: unknown key"));
        }
    }
    let text = |key: &str, errs: &mut Vec<String>| match t.get(key) {
        None => None,
        Some(Value::String(s)) => Some(s.clone()),
        Some(_) => {
            errs.push(format!("{key}: expected a string"));
            None
        }
    };
    let verb = text("verb", &mut errs);
    let mode = text("mode", &mut errs);
    let task = match &verb {
        None => {
            errs.push(format!("verb: missing; use one of {}", VERBS.join(", ")));
            None
        }
        Some(v) => Task::lookup(v, mode.as_deref()).map_err(|e| errs.push(e)).ok(),
    };
    let spec = task.map(Task::spec);

    // Windows and parameters, typed first, then checked against the task.
    let mut params = BTreeMap::new();
    for section in ["window", "params"] {
        let Some(sec) = sub_table(t, section, &mut errs) else {
            continue;
        };
        for (key, v) in sec {
            let full = format!("{section}.{key}");
            let Some(&(_, kind)) = PARAMS.iter().find(|p| p.0 == full) else {
                errs.push(format!("{full}: unknown key"));
                continue;
            };
            match read_param(kind, v) {
                Ok(p) => {
                    params.insert(full, p);
                }
                Err(e) => errs.push(format!("{full}: {e}")),
            }
        }
    }
    if let Some(spec) = spec {
        for key in params.keys() {
            if !spec.keys.iter().any(|k| k.0 == key) {
                errs.push(format!("{key}: not used by `{} {}`", spec.verb, spec.mode));
            }
        }
        params.retain(|k, _| spec.keys.iter().any(|s| s.0 == k));
        for (key, default) in spec.keys {
            if let (false, Some(d)) = (params.contains_key(*key), default) {
                let kind = PARAMS.iter().find(|p| p.0 == *key).expect("known key").1;
                params.insert(
                    (*key).into(),
                    read_param(kind, &Value::String((*d).into())).expect("defaults parse"),
                );
            }
        }
    }

    let system = match sub_table(t, "system", &mut errs) {
        Some(s) => read_system(s, &mut errs),
        None => spec.map(|s| s.system.parse().expect("default system parses")),
    };
    let mut sequences = [None, None];
    for (i, section) in ["sequence", "divergent"].into_iter().enumerate() {
        let wanted = spec.and_then(|s| if i == 0 { s.sequence } else { s.divergent });
        match (sub_table(t, section, &mut errs), spec) {
            (Some(_), Some(sp)) if wanted.is_none() => {
                errs.push(format!("{section}: not used by `{} {}`", sp.verb, sp.mode));
            }
            (Some(s), _) => sequences[i] = read_sequence(section, s, &mut errs),
            (None, _) => sequences[i] = wanted.map(|d| d.parse().expect("default sequence parses")),
        }
    }
    let [sequence, divergent] = sequences;

    let run = sub_table(t, "run", &mut errs);
    if let Some(r) = run {
        check_keys("run", r, RUN_KEYS, &mut errs);
    }
    let budget = sub_table(t, "budget", &mut errs);
    if let Some(b) = budget {
        check_keys("budget", b, BUDGET_KEYS, &mut errs);
    }
    let mut samples = opt_int(run, "run", "samples", &mut errs).map(|m| m as usize);
    let seed = opt_int(run, "run", "seed", &mut errs).unwrap_or(0);
    let threads = opt_int(run, "run", "threads", &mut errs).map(|v| v as usize);
    let out = match run.and_then(|r| r.get("out")) {
        None => PathBuf::from(DEFAULT_OUT),
        Some(Value::String(s)) => PathBuf::from(s),
        Some(_) => {
            errs.push("run.out: expected a path string".into());
            PathBuf::new()
        }
    };
    let arcs = opt_int(budget, "budget", "arcs", &mut errs).map_or(DEFAULT_ARC_BUDGET, |v| v as usize);
    let precision_bits = opt_int(budget, "budget", "precision_bits", &mut errs);
    let runtime_secs = opt_int(budget, "budget", "runtime_secs", &mut errs);

    if let Some(spec) = spec {
        match (spec.samples, samples) {
            (None, Some(_)) => errs.push(format!("run.samples: not used by `{} {}`", spec.verb, spec.mode)),
            (Some((_, min)), Some(m)) if m < min => errs.push(format!(
                "run.samples: `{} {}` needs at least {min}, got {m}",
                spec.verb, spec.mode
            )),
            (Some((d, _)), None) => samples = Some(d),
            _ => {}
        }
    }
    for (name, v) in [
        ("run.threads", threads.map(|v| v as u64)),
        ("budget.arcs", Some(arcs as u64)),
        ("budget.precision_bits", precision_bits),
        ("budget.runtime_secs", runtime_secs),
    ] {
        if v == Some(0) {
            errs.push(format!("{name}: must be positive"));
        }
    }

    if let (Some(spec), Some(sys)) = (spec, &system) {
        check_pairing(spec, sys, sequence.as_ref(), &mut errs);
        check_ranges(&params, sys, &mut errs);
    }

    if !errs.is_empty() {
        return Err(Error::Config(errs));
    }
    Ok(RunConfig {
        task: task.expect("no errors"),
        system: system.expect("no errors"),
        sequence,
        divergent,
        params,
        samples,
        seed,
        arcs,
        precision_bits,
        threads,
        runtime_secs,
        out,
    })
}

fn check_pairing(spec: &TaskSpec, sys: &SystemSpec, seq: Option<&RadiusSequence>, errs: &mut Vec<String>) {
    let task = format!("{} {}", spec.verb, spec.mode);
    let ok = match spec.req {
        SysReq::Any => true,
        SysReq::Integer => matches!(sys, SystemSpec::IntegerCircleMap { .. }),
        SysReq::Matrix => matches!(
            sys,
            SystemSpec::IntegerCircleMap { .. } | SystemSpec::ToralLinear { .. }
        ),
        SysReq::Interval => sys.dimension() == 1 && sys.is_expanding(),
    };
    if !ok {
        let need = match spec.req {
            SysReq::Integer => "an integer circle map",
            SysReq::Matrix => "an integer matrix",
            _ => "a one-dimensional expanding map",
        };
        errs.push(format!("system: `{task}` needs {need}, got `{sys}`"));
    }
    if spec.task == Task::EarPropBound && !matches!(seq, Some(RadiusSequence::Ear { .. }) | None) {
        errs.push(format!("sequence: `{task}` needs kind `ear`"));
    }
}

fn check_ranges(params: &BTreeMap<String, Param>, sys: &SystemSpec, errs: &mut Vec<String>) {
    let int = |k: &str| match params.get(k) {
        Some(Param::Int(v)) => Some(*v),
        _ => None,
    };
    for key in [
        "window.k",
        "window.n",
        "window.n0",
        "window.n_max",
        "params.max",
        "params.m",
        "params.n",
        "params.box",
        "params.onset",
    ] {
        if int(key) == Some(0) {
            errs.push(format!("{key}: must be at least 1"));
        }
    }
    if let (Some(k), Some(n)) = (int("window.k"), int("window.n")) {
        if k > n {
            errs.push(format!("window.n: must be at least window.k = {k}, got {n}"));
        }
    }
    if let (Some(n0), Some(h)) = (int("window.n0"), int("window.horizon")) {
        if n0 > h {
            errs.push(format!("window.horizon: must be at least window.n0 = {n0}, got {h}"));
        }
    }
    if int("params.bins").is_some_and(|b| b < 2) {
        errs.push("params.bins: must be at least 2".into());
    }
    if int("params.box").is_some_and(|b| b > 1_000_000) {
        errs.push("params.box: at most 10^6".into());
    }
    for (key, p) in params {
        let bad = match p {
            Param::Ints(v) if v.is_empty() || v.contains(&0) => Some("must be a non-empty list of positive integers"),
            Param::Ints(v) if key == "window.checkpoints" && v.windows(2).any(|w| w[0] >= w[1]) => {
                Some("must be strictly increasing")
            }
            Param::Rats(v) if v.is_empty() => Some("must not be empty"),
            Param::Rats(v) if key == "params.thetas" && v.iter().any(|q| q.is_negative()) => {
                Some("must be non-negative")
            }
            Param::Rat(q) if !q.is_positive() => Some("must be positive"),
            Param::Float(x) if !(*x > 0.0) => Some("must be positive"),
            Param::Floats(v) if v.is_empty() || v.iter().any(|&x| !(x > 0.0)) => {
                Some("must be a non-empty list of positive numbers")
            }
            Param::Floats(v) if key == "params.radii" && v.iter().any(|&x| x >= 1.0) => {
                Some("radii must lie in (0, 1)")
            }
            _ => None,
        };
        if let Some(why) = bad {
            errs.push(format!("{key}: {why}"));
        }
    }
    if let Some(Param::Rats(x0)) = params.get("params.x0") {
        let one = BigRational::from_integer(1.into());
        if x0.len() != sys.dimension() {
            errs.push(format!(
                "params.x0: needs {} coordinates, got {}",
                sys.dimension(),
                x0.len()
            ));
        }
        if x0.iter().any(|q| q.is_negative() || *q >= one) {
            errs.push("params.x0: coordinates must lie in [0, 1)".into());
        }
    }
}

/// Parses and validates a TOML configuration.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let table: Table = text
        .parse()
        .map_err(|e: toml::de::Error| Error::Config(vec![format!("syntax: {}", e.message())]))?;
    config_from_table(&table)
}

/// Overlays `over` on `base`. Sections merge key by key, except that a
/// system or sequence given in `over` replaces the old one whole.
pub fn merge(base: &mut Table, over: Table) {
    for (k, v) in over {
        let whole = matches!(k.as_str(), "system" | "sequence" | "divergent");
        match (base.get_mut(&k), v) {
            (Some(Value::Table(b)), Value::Table(o)) if !whole => {
                for (kk, vv) in o {
                    b.insert(kk, vv);
                }
            }
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cli::execute;

    fn errors(text: &str) -> Vec<String> {
        match parse_config(text) {
            Err(Error::Config(e)) => e,
            other => panic!("expected config errors, got {other:?}"),
        }
    }

    #[test]
    fn minimal_rio_config() {
        let cfg = parse_config("verb = \"rio\"\n[system]\nkind = \"doubling\"\n").unwrap();
        assert_eq!(cfg.task, Task::RioMeasure);
        assert_eq!(cfg.system, SystemSpec::doubling());
        assert_eq!(cfg.sequence, Some(RadiusSequence::default()));
        assert_eq!(cfg.samples, Some(2000));
        assert_eq!(cfg.int("window.k"), 1);
        assert_eq!(cfg.out, PathBuf::from(DEFAULT_OUT));
    }

    #[test]
    fn negative_theta_names_the_field() {
        let e = errors("verb = \"rio\"\n[sequence]\nkind = \"powerlog\"\nkappa = 1\ntheta = -1\n");
        assert_eq!(e.len(), 1, "{e:?}");
        assert!(e[0].starts_with("sequence.theta:"), "{e:?}");
    }

    #[test]
    fn every_error_is_reported() {
        let text = "verb = \"rio\"\nmode = \"measure\"\ncolour = 1\n\
                    [window]\nk = 0\nn0 = 3\nbogus = 2\n\
                    [run]\nsamples = 5\nspeed = 1\n";
        let e = errors(text);
        for needle in [
            "colour: unknown key",
            "window.bogus: unknown key",
            "window.n0: not used",
            "window.k: must be at least 1",
            "run.samples",
            "run.speed: unknown key",
        ] {
            assert!(e.iter().any(|m| m.contains(needle)), "missing `{needle}` in {e:?}");
        }
    }

    #[test]
    fn system_pairing_is_checked() {
        let e = errors("verb = \"nt\"\nmode = \"gcd\"\n[system]\nkind = \"beta\"\nbeta = \"golden\"\n");
        assert!(
            e[0].starts_with("system: `nt gcd` needs an integer circle map"),
            "{e:?}"
        );
        let e = errors("verb = \"nt\"\n");
        assert!(e[0].starts_with("mode:"), "{e:?}");
        let e =
            errors("verb = \"ear\"\nmode = \"prop-bound\"\n[sequence]\nkind = \"powerlaw\"\nkappa = 1\ngamma = 1\n");
        assert!(e[0].contains("kind `ear`"), "{e:?}");
    }

    #[test]
    fn one_by_one_toral_matches_scalar_path() {
        let toral = parse_config(
            "verb = \"rio\"\n[system]\nkind = \"toral\"\nmatrix = [[3]]\n[run]\nsamples = 200\n[window]\nn = 50\n",
        )
        .unwrap();
        let scalar =
            parse_config("verb = \"rio\"\n[system]\nkind = \"times\"\na = 3\n[run]\nsamples = 200\n[window]\nn = 50\n")
                .unwrap();
        assert_eq!(toral.system, SystemSpec::IntegerCircleMap { a: 3 });
        assert_eq!(toral, scalar);
        assert_eq!(execute(&toral).unwrap(), execute(&scalar).unwrap());
    }

    #[test]
    fn normalized_form_round_trips() {
        let texts = [
            "verb = \"rio\"\nmode = \"rate-scan\"\n[params]\nthetas = \"0.4, 3/4\"\n[run]\nseed = 9\nthreads = 3\nout = \"x\"\n",
            "verb = \"ear\"\nmode = \"prop-bound\"\n[sequence]\nkind = \"ear\"\ndelta = \"ln:2\"\nh = \"loglog\"\n",
            "verb = \"orbit\"\nmode = \"dump\"\n[system]\nkind = \"piecewise\"\nbranches = [\"[0,1/2)->2x+0\", \"[1/2,1)->2x+-1\"]\nmetric = \"circle\"\n[params]\nx0 = [\"1/3\"]\n",
            "verb = \"ulam\"\nmode = \"series\"\n[system]\nkind = \"beta\"\nbeta = \"golden\"\n[sequence]\nkind = \"table\"\nvalues = [0.25, \"1/8\"]\n[window]\nn_max = 2\n",
            "verb = \"nt\"\nmode = \"matrix-lattice\"\n[system]\nkind = \"toral\"\nmatrix = [[2, 1], [1, 1]]\n",
        ];
        for text in texts {
            let cfg = parse_config(text).unwrap();
            let again = parse_config(&cfg.normalized()).unwrap();
            assert_eq!(again.normalized(), cfg.normalized(), "{text}");
            assert_eq!(again.hash(), cfg.hash());
            assert_eq!(
                (again.task, &again.system, &again.sequence, &again.params),
                (cfg.task, &cfg.system, &cfg.sequence, &cfg.params)
            );
        }
    }

    #[test]
    fn runtime_settings_stay_out_of_the_hash() {
        let a = parse_config("verb = \"petrov\"\n[run]\nthreads = 1\nout = \"a\"\n").unwrap();
        let b =
            parse_config("verb = \"petrov\"\n[run]\nthreads = 8\nout = \"b\"\n[budget]\nruntime_secs = 5\n").unwrap();
        assert_eq!(a.hash(), b.hash());
        let c = parse_config("verb = \"petrov\"\n[run]\nseed = 1\n").unwrap();
        assert_ne!(a.hash(), c.hash());
    }

    #[test]
    fn merge_replaces_systems_whole() {
        let mut base: Table = "verb = \"rio\"\n[system]\nkind = \"times\"\na = 3\n[window]\nk = 2\nn = 9\n"
            .parse()
            .unwrap();
        let over: Table = "[system]\nkind = \"doubling\"\n[window]\nn = 20\n".parse().unwrap();
        merge(&mut base, over);
        let cfg = config_from_table(&base).unwrap();
        assert_eq!(cfg.system, SystemSpec::doubling());
        assert_eq!((cfg.int("window.k"), cfg.int("window.n")), (2, 20));
    }

    #[test]
    fn syntax_errors_are_config_errors() {
        assert!(matches!(parse_config("verb = "), Err(Error::Config(_))));
    }
}
