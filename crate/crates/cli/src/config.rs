use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use entmeter_core::prng::Prng;
use entmeter_core::sim::Sampling;
use entmeter_core::states::{make_state, DensityMatrix, StateFamily};

use crate::args::{Family, Mode, ProtocolName, RunArgs, StateArgs};

/// Stream id for drawing random states, kept clear of the shot-sampling streams.
pub const STATE_STREAM: u64 = 1000;

/// Everything that determines a command's result. Embedded in every report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum ExperimentConfig {
    Exact {
        state: StateSpec,
    },
    Protocol {
        protocol: ProtocolName,
        state: StateSpec,
        mode: Mode,
        shots: Vec<u64>,
    },
    Compare {
        state: StateSpec,
        shots: Vec<u64>,
        reps: usize,
    },
    Resources {
        d: u64,
    },
    Selftest {
        seed: u64,
        cases: usize,
    },
}

/// A resolved state: file inputs are stored as explicit records so a report
/// replays without the original file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateSpec {
    pub source: Option<PathBuf>,
    pub family: StateFamily,
    pub seed: u64,
}

impl StateSpec {
    pub fn from_args(args: &StateArgs) -> Result<Self> {
        let family = match (&args.input, args.family) {
            (Some(path), _) => {
                if args.p.is_some() || args.dims.is_some() {
                    bail!("--p and --dims do not apply to --in");
                }
                let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                let rho = DensityMatrix::from_json(&text).with_context(|| format!("invalid state file {}", path.display()))?;
                StateFamily::Explicit { state: rho.to_record() }
            }
            (None, Some(family)) => family_from_args(family, args.p, args.dims)?,
            (None, None) => bail!("a state is required: pass --family or --in"),
        };
        let spec = StateSpec {
            source: args.input.clone(),
            family,
            seed: args.seed,
        };
        spec.build()?;
        Ok(spec)
    }

    pub fn build(&self) -> Result<DensityMatrix> {
        Ok(make_state(&self.family, self.rng().with_stream(STATE_STREAM))?)
    }

    /// Master generator for shot sampling.
    pub fn rng(&self) -> Prng {
        Prng::new(self.seed, 0)
    }
}

fn family_from_args(family: Family, p: Option<f64>, dims: Option<[usize; 2]>) -> Result<StateFamily> {
    let weighted = matches!(family, Family::Werner | Family::Isotropic);
    let p = match (weighted, p) {
        (true, Some(p)) => p,
        (true, None) => bail!("--p is required for this family"),
        (false, Some(_)) => bail!("--p only applies to werner and isotropic"),
        (false, None) => 0.0,
    };
    let [dim_a, dim_b] = dims.unwrap_or([2, 2]);
    if matches!(family, Family::Bell | Family::Werner) && [dim_a, dim_b] != [2, 2] {
        bail!("bell and werner states are 2x2");
    }
    Ok(match family {
        Family::Bell => StateFamily::Bell,
        Family::Werner => StateFamily::Werner { p },
        Family::Isotropic => {
            if dim_a != dim_b {
                bail!("isotropic states need equal local dimensions, got {dim_a}x{dim_b}");
            }
            StateFamily::Isotropic { p, d: dim_a }
        }
        Family::Product => StateFamily::ProductPure { dim_a, dim_b },
        Family::RandomPure => StateFamily::RandomPure { dim_a, dim_b },
        Family::RandomMixed => StateFamily::RandomMixed { dim_a, dim_b },
    })
}

impl ExperimentConfig {
    pub fn protocol(which: ProtocolName, state: &StateArgs, run: &RunArgs) -> Result<Self> {
        let state = StateSpec::from_args(state)?;
        let mode = run.mode.unwrap_or(Mode::Ideal);
        let config = ExperimentConfig::Protocol {
            protocol: which,
            state,
            mode,
            shots: run.shots.clone(),
        };
        config.validate()?;
        Ok(config)
    }

    pub fn compare(state: &StateArgs, run: &RunArgs, reps: usize) -> Result<Self> {
        if run.mode.is_some_and(|m| m != Mode::Sampled) {
            bail!("compare runs in sampled mode only");
        }
        let config = ExperimentConfig::Compare {
            state: StateSpec::from_args(state)?,
            shots: run.shots.clone(),
            reps,
        };
        config.validate()?;
        Ok(config)
    }

    /// Checks the invariants that do not depend on how the config was built,
    /// so replayed configs are checked too.
    pub fn validate(&self) -> Result<()> {
        match self {
            ExperimentConfig::Exact { state } => {
                state.build()?;
            }
            ExperimentConfig::Protocol {
                protocol,
                state,
                mode,
                shots,
            } => {
                let rho = state.build()?;
                let shape = rho.shape();
                let parameters = match protocol {
                    ProtocolName::Concurrence | ProtocolName::TwoStage => {
                        if !shape.is_two_qubit() {
                            bail!("this protocol needs a 2x2 state, got {}x{}", shape.dim_a, shape.dim_b);
                        }
                        4
                    }
                    ProtocolName::Negativity => {
                        if !shape.is_square() {
                            bail!("the spectrum protocol needs a d x d state, got {}x{}", shape.dim_a, shape.dim_b);
                        }
                        shape.total() - 1
                    }
                };
                match mode {
                    Mode::Sampled => {
                        if *protocol == ProtocolName::TwoStage {
                            bail!("two-stage runs in exact or ideal mode");
                        }
                        check_shots(shots)?;
                        if shots.len() != 1 && shots.len() != parameters {
                            bail!("--shots takes 1 or {parameters} values for this protocol, got {}", shots.len());
                        }
                    }
                    Mode::Exact | Mode::Ideal => {
                        if !shots.is_empty() {
                            bail!("--shots applies to sampled mode only");
                        }
                    }
                }
            }
            ExperimentConfig::Compare { state, shots, reps } => {
                if !state.build()?.shape().is_two_qubit() {
                    bail!("compare needs a 2x2 state");
                }
                check_shots(shots)?;
                if *reps < 2 {
                    bail!("compare needs --reps >= 2, got {reps}");
                }
            }
            ExperimentConfig::Resources { d } => {
                if *d < 2 {
                    bail!("--d must be at least 2, got {d}");
                }
            }
            ExperimentConfig::Selftest { cases, .. } => {
                if *cases == 0 {
                    bail!("--cases must be at least 1");
                }
            }
        }
        Ok(())
    }
}

fn check_shots(shots: &[u64]) -> Result<()> {
    if shots.is_empty() {
        bail!("sampled mode needs --shots");
    }
    if shots.contains(&0) {
        bail!("--shots values must be at least 1");
    }
    Ok(())
}

/// One shot count for every parameter, or one per parameter.
pub fn sampling(mode: Mode, shots: &[u64]) -> Sampling {
    match (mode, shots) {
        (Mode::Sampled, [n]) => Sampling::shots(*n),
        (Mode::Sampled, list) => Sampling::PerParameter { shots: list.to_vec() },
        _ => Sampling::PlugIn,
    }
}
