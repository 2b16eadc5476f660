//! Seeded invariant suite with a per-module pass/fail report.
//!
//! Everything here is a pure function of `(seed, cases)`, so two runs with
//! the same arguments serialize to identical bytes.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::linalg::{
    cyclic_trace, herm_eigen, partial_transpose, BipartiteShape, ComplexMatrix, Dd, ShiftOperator, Subsystem,
    DEFAULT_MATERIALIZATION_CAP,
};
use crate::measures::{concurrence, negativity_report, partial_transpose_b, ppt_verdict, Verdict};
use crate::prng::Prng;
use crate::protocols::{
    channel_moments, concurrence_protocol, exact_moments, resource_ledger, roots_from_power_sums, spectrum_protocol,
    two_stage_protocol, InversionConfig, ProtocolKind, SECOND_STAGE_ABANDONED,
};
use crate::sim::{run_concurrence_protocol, run_tomography_baseline, sample_moment_povm, Sampling};
use crate::spa::{
    affine_map, apply_spa_pt, group_channel_output, materialize_group_output, spa_threshold_by_choi, TargetMap,
};
use crate::states::{make_state, DensityMatrix, StateFamily};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    /// Largest error, or number of failing cases for counting checks.
    pub worst: f64,
    pub tolerance: f64,
    pub passed: bool,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModuleReport {
    pub module: String,
    pub passed: bool,
    pub checks: Vec<Check>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelftestReport {
    pub version: String,
    pub seed: u64,
    pub cases: usize,
    pub passed: bool,
    pub modules: Vec<ModuleReport>,
}

impl SelftestReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("selftest report serializes")
    }

    /// One line per module.
    pub fn summary(&self) -> String {
        let mut out = String::new();
        for m in &self.modules {
            let failed: Vec<&str> = m.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
            let status = if m.passed { "PASS" } else { "FAIL" };
            out.push_str(&format!("{status} {} ({} checks)", m.module, m.checks.len()));
            if !failed.is_empty() {
                out.push_str(&format!(": {}", failed.join(", ")));
            }
            out.push('\n');
        }
        out
    }
}

struct Module {
    name: &'static str,
    checks: Vec<Check>,
}

impl Module {
    fn new(name: &'static str) -> Self {
        Self { name, checks: Vec::new() }
    }

    fn check(&mut self, name: &str, tolerance: f64, f: impl FnOnce() -> Result<f64>) {
        let (worst, error) = match f() {
            Ok(w) => (w, None),
            Err(e) => (f64::NAN, Some(e.to_string())),
        };
        self.checks.push(Check {
            name: name.to_string(),
            worst,
            tolerance,
            passed: error.is_none() && worst <= tolerance,
            error,
        });
    }

    fn finish(self) -> ModuleReport {
        ModuleReport {
            module: self.name.to_string(),
            passed: self.checks.iter().all(|c| c.passed),
            checks: self.checks,
        }
    }
}

fn max_over<T>(items: impl IntoIterator<Item = T>, f: impl Fn(T) -> Result<f64>) -> Result<f64> {
    items.into_iter().try_fold(0.0f64, |acc, x| Ok(acc.max(f(x)?)))
}

fn count(flags: impl IntoIterator<Item = Result<bool>>) -> Result<f64> {
    flags.into_iter().try_fold(0.0, |acc, b| Ok(acc + if b? { 1.0 } else { 0.0 }))
}

fn sorted_desc(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(|a, b| b.total_cmp(a));
    v
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn run_selftest(seed: u64, cases: usize) -> Result<SelftestReport> {
    let master = Prng::new(seed, 0);
    let qubits = |i: u64| make_state(&StateFamily::RandomMixed { dim_a: 2, dim_b: 2 }, master.derive(i));
    let qutrits = |i: u64| make_state(&StateFamily::RandomMixed { dim_a: 3, dim_b: 3 }, master.derive(1_000_000 + i));
    let werner = |p: f64| make_state(&StateFamily::Werner { p }, master);
    let n = cases as u64;
    let grid: Vec<f64> = (0..=100).map(|i| i as f64 / 100.0).collect();

    let mut core = Module::new("mat-core");
    core.check("partial-transpose-involution", 0.0, || {
        max_over(0..n, |i| {
            let rho = qutrits(i)?;
            let m = rho.matrix();
            let shape = rho.shape();
            let twice = partial_transpose(&partial_transpose(m, shape, Subsystem::B)?, shape, Subsystem::B)?;
            Ok(twice.max_abs_diff(m))
        })
    });
    core.check("partial-transpose-trace", 1e-12, || {
        max_over(0..n, |i| Ok((partial_transpose_b(&qubits(i)?).trace().re - 1.0).abs()))
    });
    core.check("cyclic-trace-vs-shift-operator", 1e-12, || {
        let v = ShiftOperator::new(3, 4, DEFAULT_MATERIALIZATION_CAP)?;
        max_over(0..n.min(20), |i| {
            let f: Vec<ComplexMatrix> = (0..3).map(|j| qubits(n + 3 * i + j).map(|r| r.matrix().clone())).collect::<Result<_>>()?;
            Ok((cyclic_trace(&f)? - v.trace_with_product(&f)?).norm())
        })
    });
    core.check("hermitian-eigen-reconstruction", 1e-12, || {
        max_over(0..n, |i| {
            let rho = qutrits(i)?;
            let eig = herm_eigen(rho.matrix())?;
            Ok(eig.reconstruct_with(|l| l).max_abs_diff(rho.matrix()))
        })
    });

    let mut states = Module::new("states");
    states.check("random-states-valid", 0.0, || {
        count((0..n).flat_map(|i| [qubits(i), qutrits(i)]).map(|r| Ok(!r?.diagnostics().is_valid())))
    });
    states.check("record-round-trip", 0.0, || {
        max_over(0..n, |i| {
            let rho = qutrits(i)?;
            Ok(DensityMatrix::from_json(&rho.to_json())?.matrix().max_abs_diff(rho.matrix()))
        })
    });
    states.check("werner-purity", 1e-14, || {
        max_over(grid.iter(), |&p| Ok((werner(p)?.purity() - (1.0 + 3.0 * p * p) / 4.0).abs()))
    });

    let mut measures = Module::new("exact-measures");
    measures.check("werner-concurrence", 1e-10, || {
        max_over(grid.iter(), |&p| Ok((concurrence(&werner(p)?)?.concurrence - (0.0f64).max((3.0 * p - 1.0) / 2.0)).abs()))
    });
    measures.check("werner-log-negativity", 1e-10, || {
        max_over(grid.iter(), |&p| {
            let expected = (1.0f64).max((1.0 + 3.0 * p) / 2.0).log2();
            Ok((negativity_report(&werner(p)?)?.ec - expected).abs())
        })
    });
    measures.check("ppt-iff-zero-concurrence", 0.0, || {
        count((0..n).map(|i| {
            let rho = qubits(i)?;
            let c = concurrence(&rho)?.concurrence;
            let npt = ppt_verdict(&rho)?.verdict == Verdict::Npt;
            Ok((c > 1e-6 && !npt) || (c == 0.0 && npt))
        }))
    });
    measures.check("negativity-range", 0.0, || {
        count((0..n).map(|i| {
            let r = negativity_report(&qutrits(i)?)?;
            Ok(!(r.negativity >= 0.0 && r.negativity <= 1.0 + 1e-12 && r.ec >= 0.0))
        }))
    });

    let mut spa = Module::new("spa");
    spa.check("choi-threshold-two-qubits", 1e-6, || {
        Ok((spa_threshold_by_choi(TargetMap::PartialTransposeB, BipartiteShape::qubits(), 1e-10)? - 1.0 / 9.0).abs())
    });
    spa.check("output-positive", 1e-10, || {
        max_over(0..n, |i| Ok((-herm_eigen(apply_spa_pt(&qubits(i)?)?.matrix())?.min()).max(0.0)))
    });
    spa.check("affine-spectrum-map", 1e-10, || {
        max_over(0..n, |i| {
            let rho = qutrits(i)?;
            let out = herm_eigen(apply_spa_pt(&rho)?.matrix())?.values;
            let pt = herm_eigen(&partial_transpose_b(&rho))?.values;
            let mapped: Vec<f64> = pt.iter().map(|&l| affine_map(l, 3)).collect();
            Ok(max_diff(&sorted_desc(out), &sorted_desc(mapped)))
        })
    });
    spa.check("materialized-groups", 1e-10, || {
        max_over(0..n.min(3), |i| {
            let rho = qubits(i)?;
            max_over(1..=2usize, |k| {
                let m = materialize_group_output(&rho, k)?;
                let v = ShiftOperator::new(2 * k, 4, DEFAULT_MATERIALIZATION_CAP)?;
                Ok((v.trace_with(&m)? - group_channel_output(&rho, k)?.shift_trace()?).norm())
            })
        })
    });

    let mut protocols = Module::new("protocols");
    protocols.check("channel-moments", 1e-9, || {
        max_over(0..n, |i| {
            let rho = qubits(i)?;
            Ok(max_diff(&channel_moments(&rho)?.p, &exact_moments(&rho)?.p))
        })
    });
    protocols.check("power-sum-round-trip", 1e-8, || {
        max_over(0..n, |i| {
            let mut rng = master.derive(i).with_stream(7).rng();
            let mut lambda: Vec<f64> = (0..4).map(|_| rng.random::<f64>()).collect();
            if rng.random::<bool>() {
                lambda[1] = lambda[0];
            }
            let sums: Vec<Dd> = (1..=4u32)
                .map(|k| lambda.iter().fold(Dd::ZERO, |acc, &l| acc + Dd::from_f64(l).powi(k)))
                .collect();
            let inv = roots_from_power_sums(&sums, &InversionConfig::EXACT_DD)?;
            Ok(max_diff(&inv.roots, &sorted_desc(lambda)))
        })
    });
    protocols.check("ideal-concurrence", 1e-6, || {
        max_over(0..n, |i| {
            let rho = qubits(i)?;
            let est = concurrence_protocol(&rho)?.breakdown;
            let exact = concurrence(&rho)?;
            Ok((est.concurrence - exact.concurrence).abs().max((est.ef - exact.ef).abs()))
        })
    });
    protocols.check("ideal-log-negativity", 1e-6, || {
        max_over((0..n).flat_map(|i| [qubits(i), qutrits(i)]), |rho| {
            let rho = rho?;
            Ok((spectrum_protocol(&rho)?.report.ec - negativity_report(&rho)?.ec).abs())
        })
    });
    protocols.check("two-stage-werner", 0.0, || {
        count(grid.iter().filter(|&&p| (p - 1.0 / 3.0).abs() > 1e-9).map(|&p| {
            let out = two_stage_protocol(&werner(p)?)?;
            let npt = out.verdict == Verdict::Npt;
            Ok(npt != (p > 1.0 / 3.0) || (!npt && out.message != SECOND_STAGE_ABANDONED))
        }))
    });
    protocols.check("resource-ledgers", 0.0, || {
        let m = resource_ledger(ProtocolKind::ConcurrenceMoments)?;
        let s = resource_ledger(ProtocolKind::Spectrum { d: 2 })?;
        let t = resource_ledger(ProtocolKind::Tomography { d: 2 })?;
        count([
            Ok((m.r_p, m.r_c, m.r) != (4, 20, 80)),
            Ok(s.r_c != 9),
            Ok((t.r_p, t.r_c, t.quoted_r) != (15, 15, Some(165))),
        ])
    });

    let mut sim = Module::new("measure-sim");
    sim.check("plug-in-matches-ideal", 1e-12, || {
        max_over(0..n.min(20), |i| {
            let rho = qubits(i)?;
            let run = run_concurrence_protocol(&rho, &Sampling::PlugIn, master)?;
            Ok((run.estimate.breakdown.concurrence - concurrence_protocol(&rho)?.breakdown.concurrence).abs())
        })
    });
    sim.check("sampled-runs-reproducible", 0.0, || {
        let rho = qubits(0)?;
        count((0..3).map(|i| {
            let a = run_concurrence_protocol(&rho, &Sampling::shots(1000), master.derive(i))?;
            let b = run_concurrence_protocol(&rho, &Sampling::shots(1000), master.derive(i))?;
            Ok(a != b || a.recompute()? != a.estimate)
        }))
    });
    sim.check("first-moment-unbiased", 5.0, || {
        // |mean − 1| in standard errors of the mean, Bell state, 64 × 10⁵ shots
        let bell = make_state(&StateFamily::Bell, master)?;
        let reps = 64;
        let est: Vec<f64> = (0..reps)
            .map(|r| sample_moment_povm(&bell, 1, Some(100_000), master.derive(r).with_stream(1)).map(|s| s.estimate))
            .collect::<Result<_>>()?;
        let (mean, std) = crate::sim::mean_and_std(&est);
        Ok((mean - 1.0).abs() / (std / (reps as f64).sqrt()))
    });
    sim.check("tomography-plug-in", 1e-10, || {
        max_over(0..n.min(20), |i| {
            let rho = qubits(i)?;
            let run = run_tomography_baseline(&rho, &Sampling::PlugIn, master)?;
            Ok((run.breakdown.concurrence - concurrence(&rho)?.concurrence).abs())
        })
    });

    let modules: Vec<ModuleReport> = [core, states, measures, spa, protocols, sim].into_iter().map(Module::finish).collect();
    Ok(SelftestReport {
        version: env!("CARGO_PKG_VERSION").to_string(),
        seed,
        cases,
        passed: modules.iter().all(|m| m.passed),
        modules,
    })
}
