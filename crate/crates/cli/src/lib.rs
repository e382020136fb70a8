//! Command-line driver for the `bosefunc` toolkit. The binary is a thin
//! wrapper around [`run_args`], which test harnesses can call in-process.

mod commands;
mod config;
mod error;
mod output;
mod verify;

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};

use bosefunc::par::{thread_cap_from_env, with_threads};
use clap::Parser;

pub use crate::config::VERIFY_CHECKS;
pub use crate::error::CliError;
pub use crate::output::SCHEMA_ID;

use crate::config::{Cli, Command, RunConfig};

fn compute(cfg: &RunConfig) -> Result<(output::Report, usize), CliError> {
    Ok(match cfg.command {
        Command::Verify => verify::verify(cfg)?,
        cmd => {
            let out = match cmd {
                Command::Sweep => commands::sweep(cfg)?,
                Command::BecMap => commands::bec_map(cfg)?,
                Command::Groundstate => commands::groundstate(cfg)?,
                Command::Witness => commands::witness(cfg)?,
                Command::Verify => unreachable!(),
            };
            (out.report, out.failures)
        }
    })
}

fn run(cfg: &RunConfig, stdout: &mut dyn Write) -> Result<(), CliError> {
    let (report, failures) = with_threads(cfg.threads.or_else(thread_cap_from_env), || compute(cfg))?;
    match &cfg.output_path {
        Some(path) => {
            let file = File::create(path).map_err(|e| CliError::Usage(format!("cannot write {}: {e}", path.display())))?;
            let mut w = BufWriter::new(file);
            report.write(cfg.format, &mut w)?;
            w.flush()?;
        }
        None => {
            report.write(cfg.format, stdout)?;
            stdout.flush()?;
        }
    }
    if cfg.command == Command::Verify && failures > 0 {
        return Err(CliError::Numerical(format!("{failures} check(s) failed")));
    }
    if cfg.strict && failures > 0 {
        return Err(CliError::Numerical(format!("{failures} point(s) failed")));
    }
    Ok(())
}

/// Parses `args` (program name first), runs the command and returns the exit
/// code: 0 on success, 1 for usage and I/O errors, 2 for numerical failures.
pub fn run_args<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() {
                let _ = write!(stderr, "{}", e.render());
                1
            } else {
                let _ = write!(stdout, "{}", e.render());
                0
            };
            return code;
        }
    };
    let result = RunConfig::resolve(cli.command).and_then(|cfg| run(&cfg, stdout));
    match result {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code() as u8
        }
    }
}
