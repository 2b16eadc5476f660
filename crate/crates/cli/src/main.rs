mod args;
mod commands;
mod config;

use std::path::Path;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::Parser;

use args::{Cli, Command, OutputArgs};
use commands::{run, Outcome, Report};
use config::{ExperimentConfig, StateSpec};

const EXIT_VALIDATION: u8 = 1;
const EXIT_FLAGGED: u8 = 2;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_VALIDATION)
        }
    }
}

fn dispatch(command: Command) -> Result<ExitCode> {
    let (config, output, strict) = match command {
        Command::Exact { state, output } => (
            ExperimentConfig::Exact {
                state: StateSpec::from_args(&state)?,
            },
            output,
            false,
        ),
        Command::Protocol {
            which,
            state,
            run,
            output,
        } => (ExperimentConfig::protocol(which, &state, &run)?, output, run.strict),
        Command::Compare {
            state,
            run,
            reps,
            output,
        } => (ExperimentConfig::compare(&state, &run, reps)?, output, run.strict),
        Command::Resources { d, output } => (ExperimentConfig::Resources { d }, output, false),
        Command::Selftest { seed, cases, output } => (ExperimentConfig::Selftest { seed, cases }, output, false),
        Command::Replay { report } => return replay(&report),
    };
    let outcome = run(&config)?;
    emit(&outcome, &output)?;
    Ok(if outcome.failed {
        ExitCode::from(EXIT_VALIDATION)
    } else if strict && outcome.flagged {
        eprintln!("numerical flags raised (--strict)");
        ExitCode::from(EXIT_FLAGGED)
    } else {
        ExitCode::SUCCESS
    })
}

fn write(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

/// Writes files once, after the command has finished.
fn emit(outcome: &Outcome, output: &OutputArgs) -> Result<()> {
    let json = outcome.report.to_json();
    match (&output.out, &outcome.csv) {
        (Some(path), Some(csv)) => {
            write(path, csv)?;
            write(&path.with_extension("json"), &json)?;
        }
        (Some(path), None) => write(path, &json)?,
        (None, _) => {}
    }
    if output.json {
        println!("{json}");
    } else if let (None, Some(csv)) = (&output.out, &outcome.csv) {
        print!("{csv}");
    } else {
        print!("{}", outcome.summary);
    }
    Ok(())
}

fn replay(path: &Path) -> Result<ExitCode> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let stored: Report = serde_json::from_str(&text).with_context(|| format!("parsing report {}", path.display()))?;
    if stored.tool != commands::TOOL {
        bail!("{} is not an {} report", path.display(), commands::TOOL);
    }
    let fresh = run(&stored.config)?.report;
    if fresh.version != stored.version {
        println!("note: report written by version {}, replayed with {}", stored.version, fresh.version);
    }
    if fresh.result == stored.result {
        println!("reproduced: results identical");
        Ok(ExitCode::SUCCESS)
    } else {
        println!("mismatch: replayed result differs from the stored one");
        Ok(ExitCode::from(EXIT_VALIDATION))
    }
}
