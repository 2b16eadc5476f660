use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

#[derive(Parser, Debug)]
#[command(name = "entmeter", version, about = "Entanglement measures from moment measurements on SPA channels")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Exact measures of a state: C, E_f, λᵢ, PT spectrum, N, E_c, PPT verdict.
    Exact {
        #[command(flatten)]
        state: StateArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Runs an estimation pipeline in exact, ideal or sampled mode.
    Protocol {
        #[arg(value_enum)]
        which: ProtocolName,
        #[command(flatten)]
        state: StateArgs,
        #[command(flatten)]
        run: RunArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Moments versus tomography: median absolute errors over repetitions, as CSV.
    Compare {
        #[command(flatten)]
        state: StateArgs,
        #[command(flatten)]
        run: RunArgs,
        /// Repetitions per shot count.
        #[arg(long, default_value_t = 50)]
        reps: usize,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Resource ledgers (r_p, r_c, r) for local dimension d.
    Resources {
        #[arg(long, short, default_value_t = 2)]
        d: u64,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Seeded invariant suite with pass/fail per module.
    Selftest {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Random states per check.
        #[arg(long, default_value_t = 32)]
        cases: usize,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Re-runs the configuration embedded in a JSON report and compares results.
    Replay {
        report: PathBuf,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProtocolName {
    Concurrence,
    Negativity,
    TwoStage,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    Bell,
    Werner,
    Isotropic,
    Product,
    RandomPure,
    RandomMixed,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// Exact measures only, no pipeline.
    Exact,
    /// Pipeline on noiseless moments.
    Ideal,
    /// Pipeline on binomially sampled readouts.
    Sampled,
}

#[derive(Args, Debug, Clone)]
pub struct StateArgs {
    #[arg(long, value_enum, conflicts_with = "input")]
    pub family: Option<Family>,
    /// Mixing weight for werner and isotropic.
    #[arg(long)]
    pub p: Option<f64>,
    /// Local dimensions AxB for isotropic and random families.
    #[arg(long, value_parser = parse_dims)]
    pub dims: Option<[usize; 2]>,
    /// State file `{"dims": [dA, dB], "re": [[..]], "im": [[..]]}`.
    #[arg(long = "in", value_name = "FILE")]
    pub input: Option<PathBuf>,
    /// Seed for random state families and for shot sampling.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args, Debug, Clone)]
pub struct RunArgs {
    #[arg(long, value_enum)]
    pub mode: Option<Mode>,
    /// Shots per estimated parameter. One value applies to all parameters;
    /// for `protocol` a list gives one value per parameter, for `compare` the sweep.
    #[arg(long, value_delimiter = ',')]
    pub shots: Vec<u64>,
    /// Exit with status 2 when any numerical flag is raised.
    #[arg(long)]
    pub strict: bool,
}

#[derive(Args, Debug, Clone)]
pub struct OutputArgs {
    /// Write the full JSON report (CSV for `compare`) here.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Print the JSON report instead of the summary.
    #[arg(long)]
    pub json: bool,
}

fn parse_dims(s: &str) -> Result<[usize; 2], String> {
    let (a, b) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected AxB, got {s:?}"))?;
    let parse = |t: &str| t.trim().parse::<usize>().map_err(|e| format!("{t:?}: {e}"));
    Ok([parse(a)?, parse(b)?])
}
