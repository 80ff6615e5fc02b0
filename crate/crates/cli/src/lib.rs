//! Command-line front end: config loading, command dispatch and report
//! emission.
//!
//! Exit codes: 0 when the command's verdict passes, 1 when it fails or is
//! inconclusive, 2 on usage, config or evaluation errors.

pub mod args;
pub mod commands;
pub mod config;
pub mod params;
pub mod report;

use std::ffi::OsString;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::Parser;

use args::{Cli, Command, Flags, Format};
use config::{load_config, SystemConfig};
use params::Params;
use report::{write_outputs, ConfigRef, Outcome, RunReport, Timing};

pub const EXIT_ERROR: i32 = 2;

fn load(path: &Path) -> Result<SystemConfig> {
    load_config(path).with_context(|| format!("loading {}", path.display()))
}

fn config_ref(path: &Path, cfg: &SystemConfig) -> ConfigRef {
    ConfigRef {
        name: cfg.name.clone(),
        file: path.file_name().map(|f| f.to_string_lossy().into_owned()).unwrap_or_default(),
        sha256: cfg.digest.clone(),
    }
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Check(_) => "check",
        Command::Rank(_) => "rank",
        Command::Orbit(_) => "orbit",
        Command::Fiber(_) => "fiber",
        Command::Scan(_) => "scan",
        Command::Atlas(_) => "atlas",
        Command::Mu(_) => "mu",
        Command::Equiv(_) => "equiv",
        Command::Sympeq(_) => "sympeq",
        Command::Closedness(_) => "closedness",
        Command::ProbeComplete(_) => "probe-complete",
    }
}

fn execute(command: &Command) -> Result<(RunReport, Outcome, Flags)> {
    let start = Instant::now();
    let (configs, params, outcome, flags) = match command {
        Command::Equiv(two) | Command::Sympeq(two) => {
            let f = load(&two.first)?;
            let g = load(&two.second)?;
            let p = Params::resolve(&f, &two.flags)?;
            let outcome = match command {
                Command::Equiv(_) => commands::equiv(&f, &g, &p)?,
                _ => commands::sympeq(&f, &g, &p)?,
            };
            let refs = vec![config_ref(&two.first, &f), config_ref(&two.second, &g)];
            (refs, p, outcome, two.flags.clone())
        }
        Command::Check(one)
        | Command::Rank(one)
        | Command::Orbit(one)
        | Command::Fiber(one)
        | Command::Scan(one)
        | Command::Atlas(one)
        | Command::Mu(one)
        | Command::Closedness(one)
        | Command::ProbeComplete(one) => {
            let cfg = load(&one.config)?;
            let p = Params::resolve(&cfg, &one.flags)?;
            let outcome = match command {
                Command::Check(_) => commands::check(&cfg, &p)?,
                Command::Rank(_) => commands::rank(&cfg, &p)?,
                Command::Orbit(_) => commands::orbit(&cfg, &p)?,
                Command::Fiber(_) => commands::fiber(&cfg, &p)?,
                Command::Scan(_) => commands::scan(&cfg, &p)?,
                Command::Atlas(_) => commands::atlas(&cfg, &p)?,
                Command::Mu(_) => commands::mu(&cfg, &p)?,
                Command::Closedness(_) => commands::closedness(&cfg, &p)?,
                _ => commands::probe_complete(&cfg, &p)?,
            };
            (vec![config_ref(&one.config, &cfg)], p, outcome, one.flags.clone())
        }
    };
    let report = RunReport {
        command: command_name(command).to_string(),
        configs,
        parameters: params,
        status: outcome.status,
        verdict: outcome.verdict.clone(),
        result: outcome.result.clone(),
        warnings: outcome.warnings.clone(),
        tables: outcome.tables.iter().map(|t| format!("{}.csv", t.name)).collect(),
        timing: Timing {
            elapsed_ms: start.elapsed().as_secs_f64() * 1e3,
        },
    };
    Ok((report, outcome, flags))
}

/// Parses `args` (including the program name), runs the command and
/// returns the exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = write!(stderr, "{}", e.render());
            return if e.use_stderr() { EXIT_ERROR } else { 0 };
        }
    };
    let result = execute(&cli.command).and_then(|(report, outcome, flags)| {
        if let Some(dir) = &flags.out {
            write_outputs(dir, &report, &outcome)?;
        }
        match flags.format {
            Format::Json => stdout.write_all(report.to_json().as_bytes())?,
            Format::Csv => {
                if let Some(t) = outcome.tables.first() {
                    t.write_to(&mut *stdout)?;
                }
            }
        }
        for w in &report.warnings {
            writeln!(stderr, "warning: {w}")?;
        }
        Ok(report.status.exit_code())
    });
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e:#}");
            EXIT_ERROR
        }
    }
}
