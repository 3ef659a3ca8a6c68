//! Argument parsing and command dispatch for the `isym` binary.
//!
//! Exit codes: 0 success (or a symplectic verdict), 1 numerical failure or an
//! inconclusive verdict, 2 usage error, 3 a not-symplectic verdict.

mod args;
mod run;

pub use args::{parse_args, parse_scheme, Command, RunConfig, UsageError};
pub use run::{run, write_csv, EXIT_FAILURE, EXIT_NOT_SYMPLECTIC, EXIT_OK, EXIT_USAGE};

/// Parses `argv` (without the program name) and runs it.
pub fn main_with_args<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    match parse_args(argv) {
        Ok(cfg) => run(&cfg),
        Err(UsageError::Info(text)) => {
            print!("{text}");
            EXIT_OK
        }
        Err(UsageError::Invalid { flag, message }) => {
            run::report_usage(&flag, &message);
            EXIT_USAGE
        }
    }
}
