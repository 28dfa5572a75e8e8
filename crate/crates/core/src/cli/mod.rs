//! Batch entry point: configuration, dispatch and report files.

mod args;
mod config;
mod run;

pub use args::{main_with_args, Cli, Verb, VerbArgs};
pub use config::{
    config_from_table, merge, parse_config, sequence_table, system_table, Param, RunConfig, Task, DEFAULT_OUT, VERBS,
};
pub use run::{execute, run, Output, RunSummary};
