use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;

use clap::{Arg, ArgAction, Command};

use crate::config::{parse_text, RunConfig, KEYS};
use crate::error::{CliError, IoContext};

/// Environment variable selecting the worker-thread count.
pub const THREADS_ENV: &str = "QHD_THREADS";

fn flag_name(key: &str) -> String {
    key.replace('_', "-")
}

pub fn command() -> Command {
    let mut cmd = Command::new("qhd")
        .version(env!("CARGO_PKG_VERSION"))
        .about("Regularized logarithmic Schrodinger simulator with Madelung and weak-form diagnostics")
        .after_help(format!(
            "Every flag mirrors a key of the flat `key = value` config file; flags override the \
             file. Set {THREADS_ENV} to choose the number of worker threads \
             (default: machine parallelism).\n\nExit status: 0 success, 1 invalid input or I/O \
             failure, 2 numeric abort."
        ))
        .arg(
            Arg::new("config")
                .long("config")
                .value_name("FILE")
                .help("flat key = value configuration file"),
        );
    for (key, default, help) in KEYS {
        cmd = cmd.arg(
            Arg::new(*key)
                .long(flag_name(key))
                .value_name("VALUE")
                .action(ArgAction::Set)
                .help(format!("{help} [default: {default}]")),
        );
    }
    cmd
}

/// Merges the optional config file with the flags and validates the result.
pub fn parse_args<I, T>(args: I) -> Result<RunConfig, CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let matches = command().try_get_matches_from(args)?;
    let mut raw: BTreeMap<String, String> = match matches.get_one::<String>("config") {
        Some(path) => {
            let text = fs::read_to_string(path).context(|| format!("reading config {path}"))?;
            parse_text(&text)?
        }
        None => BTreeMap::new(),
    };
    for (key, _, _) in KEYS {
        if let Some(v) = matches.get_one::<String>(key) {
            raw.insert(key.to_string(), v.clone());
        }
    }
    RunConfig::from_map(&raw)
}

/// Configures the global thread pool from the environment.
pub fn init_threads() -> Result<(), CliError> {
    let Ok(value) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let threads: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| CliError::Config(vec![format!("{THREADS_ENV} = `{value}`: expected a positive integer")]))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::Usage(e.to_string()))
}
