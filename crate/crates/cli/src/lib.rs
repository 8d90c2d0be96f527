//! Command line driver: configuration, orchestration of the simulator's run, sweep,
//! verify and identities modes, and artifact output.

pub mod cli;
pub mod config;
pub mod error;
pub mod modes;
pub mod output;

pub use cli::{command, init_threads, parse_args};
pub use config::{Mode, RunConfig};
pub use error::CliError;
pub use modes::execute;

/// Parses `args`, runs the selected mode and returns the process exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cfg = match parse_args(args) {
        Ok(cfg) => cfg,
        Err(CliError::Args(e)) if !e.use_stderr() => {
            print!("{e}");
            return 0;
        }
        Err(e) => {
            eprintln!("qhd: {e}");
            return e.exit_code();
        }
    };
    match execute(&cfg) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("qhd: {e}");
            e.exit_code()
        }
    }
}

