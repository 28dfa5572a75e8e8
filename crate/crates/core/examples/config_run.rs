//! Driving an experiment from a TOML configuration, as the command line does.

use recurlab::cli::{execute, parse_config};

const CONFIG: &str = r#"
verb = "ear"
mode = "measure"

[sequence]
kind = "powerlaw"
kappa = "1"
gamma = "2"

[window]
n0 = 10
horizon = 400

[run]
samples = 1000
seed = 9
"#;

fn main() -> recurlab::error::Result<()> {
    let cfg = parse_config(CONFIG)?;
    println!("config hash {}", cfg.hash());
    let out = execute(&cfg)?;
    print!("{}", out.report.to_tsv());
    println!("normalised:\n{}", cfg.normalized());
    Ok(())
}
