use anyhow::Result;
use serde::{Deserialize, Serialize};

use entmeter_core::measures::{
    concurrence, negativity_report, ppt_verdict, ConcurrenceBreakdown, NegativityReport, PptResult, Verdict,
};
use entmeter_core::prng::Prng;
use entmeter_core::protocols::{
    exact_moments, resource_ledger, two_stage_protocol, InversionFlags, MomentObservable, ProtocolKind,
    ResourceLedger, TwoStageOutcome,
};
use entmeter_core::selftest::run_selftest;
use entmeter_core::sim::{compare_sweep, run_concurrence_protocol, run_spectrum_protocol, CompareRow, ParameterSample};
use entmeter_core::spa::amplification;
use entmeter_core::states::DensityMatrix;

use crate::args::{Mode, ProtocolName};
use crate::config::{sampling, ExperimentConfig};

pub const TOOL: &str = "entmeter";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub tool: String,
    pub version: String,
    pub config: ExperimentConfig,
    pub result: serde_json::Value,
}

impl Report {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

pub struct Outcome {
    pub report: Report,
    pub summary: String,
    /// CSV table for `compare`.
    pub csv: Option<String>,
    /// A numerical flag was raised (exit 2 under `--strict`).
    pub flagged: bool,
    /// The command ran but its checks failed (selftest).
    pub failed: bool,
}

#[derive(Serialize)]
struct ExactResult {
    dims: [usize; 2],
    concurrence: Option<ConcurrenceBreakdown>,
    negativity: NegativityReport,
    ppt: PptResult,
}

/// One binary-POVM readout as reported.
#[derive(Serialize)]
struct Readout {
    order: usize,
    p_plus: f64,
    /// 1/(d³+1) for the channel that produced the readout.
    shrink: f64,
    shots: Option<u64>,
    successes: Option<u64>,
    /// p̂_k for the concurrence protocol, Tr(σⁿ) estimate for the spectrum protocol.
    estimate: f64,
    copies_consumed: u64,
}

impl Readout {
    fn new(s: &ParameterSample, shrink: f64, estimate: f64) -> Self {
        Readout {
            order: s.order,
            p_plus: s.p_plus,
            shrink,
            shots: s.record.map(|r| r.shots),
            successes: s.record.map(|r| r.successes),
            estimate,
            copies_consumed: s.copies_consumed,
        }
    }
}

#[derive(Serialize)]
struct ConcurrenceResult {
    mode: Mode,
    reference: ConcurrenceBreakdown,
    reference_moments: [f64; 4],
    estimate: ConcurrenceBreakdown,
    moments: [f64; 4],
    readouts: Vec<Readout>,
    flags: Option<InversionFlags>,
    copies_consumed: u64,
    ancillas: u64,
}

#[derive(Serialize)]
struct NegativityResult {
    mode: Mode,
    reference: NegativityReport,
    reference_verdict: Verdict,
    estimate: NegativityReport,
    verdict: Verdict,
    /// Recovered spectrum of Λ(ρ).
    output_eigenvalues: Vec<f64>,
    shrink: f64,
    readouts: Vec<Readout>,
    flags: Option<InversionFlags>,
    copies_consumed: u64,
    ancillas: u64,
}

#[derive(Serialize)]
struct TwoStageResult {
    mode: Mode,
    outcome: TwoStageOutcome,
    reference_verdict: Verdict,
    reference_concurrence: f64,
}

fn verdict_of(report: &NegativityReport) -> Verdict {
    if report.pt_eigenvalues.first().is_some_and(|&l| l < -entmeter_core::measures::PPT_TOL) {
        Verdict::Npt
    } else {
        Verdict::Ppt
    }
}

fn verdict_name(v: Verdict) -> &'static str {
    match v {
        Verdict::Npt => "npt",
        Verdict::Ppt => "ppt",
    }
}

fn fmt_list(values: &[f64]) -> String {
    values.iter().map(|v| format!("{v:.6}")).collect::<Vec<_>>().join(", ")
}

fn report(config: &ExperimentConfig, result: &impl Serialize) -> Result<Report> {
    Ok(Report {
        tool: TOOL.to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        config: config.clone(),
        result: serde_json::to_value(result)?,
    })
}

fn finish(config: &ExperimentConfig, result: &impl Serialize, summary: String, flagged: bool) -> Result<Outcome> {
    Ok(Outcome {
        report: report(config, result)?,
        summary,
        csv: None,
        flagged,
        failed: false,
    })
}

pub fn run(config: &ExperimentConfig) -> Result<Outcome> {
    config.validate()?;
    match config {
        ExperimentConfig::Exact { state } => exact(config, &state.build()?),
        ExperimentConfig::Protocol {
            protocol,
            state,
            mode,
            shots,
        } => {
            let rho = state.build()?;
            match protocol {
                ProtocolName::Concurrence => concurrence_cmd(config, &rho, *mode, shots, state.rng()),
                ProtocolName::Negativity => negativity_cmd(config, &rho, *mode, shots, state.rng()),
                ProtocolName::TwoStage => two_stage_cmd(config, &rho, *mode),
            }
        }
        ExperimentConfig::Compare { state, shots, reps } => compare_cmd(config, &state.build()?, shots, *reps, state.rng()),
        ExperimentConfig::Resources { d } => resources_cmd(config, *d),
        ExperimentConfig::Selftest { seed, cases } => {
            let st = run_selftest(*seed, *cases)?;
            Ok(Outcome {
                report: report(config, &st)?,
                summary: st.summary(),
                csv: None,
                flagged: false,
                failed: !st.passed,
            })
        }
    }
}

fn exact(config: &ExperimentConfig, rho: &DensityMatrix) -> Result<Outcome> {
    let shape = rho.shape();
    let c = if shape.is_two_qubit() { Some(concurrence(rho)?) } else { None };
    let result = ExactResult {
        dims: [shape.dim_a, shape.dim_b],
        concurrence: c,
        negativity: negativity_report(rho)?,
        ppt: ppt_verdict(rho)?,
    };
    let mut summary = String::new();
    if let Some(c) = c {
        summary.push_str(&format!(
            "C = {:.6}\nE_f = {:.6}\nλ(ρρ̃) = [{}]\n",
            c.concurrence,
            c.ef,
            fmt_list(&c.lambdas)
        ));
    }
    let n = &result.negativity;
    summary.push_str(&format!(
        "PT spectrum = [{}]\nN = {:.6}\nE_c = {:.6}\nverdict: {}\n",
        fmt_list(&n.pt_eigenvalues),
        n.negativity,
        n.ec,
        verdict_name(result.ppt.verdict)
    ));
    finish(config, &result, summary, false)
}

fn concurrence_cmd(config: &ExperimentConfig, rho: &DensityMatrix, mode: Mode, shots: &[u64], rng: Prng) -> Result<Outcome> {
    let reference = concurrence(rho)?;
    let reference_moments = exact_moments(rho)?.p;
    let result = if mode == Mode::Exact {
        ConcurrenceResult {
            mode,
            reference,
            reference_moments,
            estimate: reference,
            moments: reference_moments,
            readouts: Vec::new(),
            flags: None,
            copies_consumed: 0,
            ancillas: 0,
        }
    } else {
        let run = run_concurrence_protocol(rho, &sampling(mode, shots), rng)?;
        let readouts = run
            .samples
            .iter()
            .map(|s| {
                let k = s.sample.order;
                let shrink = 1.0 / MomentObservable::new(k).map(|o| amplification(o.d_k))? as f64;
                Ok(Readout::new(&s.sample, shrink, s.estimate))
            })
            .collect::<Result<Vec<_>>>()?;
        ConcurrenceResult {
            mode,
            reference,
            reference_moments,
            estimate: run.estimate.breakdown,
            moments: run.estimate.moments.p,
            readouts,
            flags: Some(run.estimate.flags),
            copies_consumed: run.copies_consumed,
            ancillas: run.ancillas,
        }
    };
    let flagged = result.flags.is_some_and(|f| f.any());
    let summary = format!(
        "Ĉ = {:.6} (exact {:.6})\nÊ_f = {:.6} (exact {:.6})\nmoments = [{}]\ncopies consumed = {}{}\n",
        result.estimate.concurrence,
        reference.concurrence,
        result.estimate.ef,
        reference.ef,
        fmt_list(&result.moments),
        result.copies_consumed,
        if flagged { "\nwarning: inversion flags raised" } else { "" }
    );
    finish(config, &result, summary, flagged)
}

fn negativity_cmd(config: &ExperimentConfig, rho: &DensityMatrix, mode: Mode, shots: &[u64], rng: Prng) -> Result<Outcome> {
    let reference = negativity_report(rho)?;
    let d = rho.shape().dim_a as u64;
    let shrink = 1.0 / amplification(d) as f64;
    let result = if mode == Mode::Exact {
        NegativityResult {
            mode,
            reference_verdict: verdict_of(&reference),
            verdict: verdict_of(&reference),
            estimate: reference.clone(),
            output_eigenvalues: Vec::new(),
            reference,
            shrink,
            readouts: Vec::new(),
            flags: None,
            copies_consumed: 0,
            ancillas: 0,
        }
    } else {
        let run = run_spectrum_protocol(rho, &sampling(mode, shots), rng)?;
        NegativityResult {
            mode,
            reference_verdict: verdict_of(&reference),
            verdict: verdict_of(&run.estimate.report),
            estimate: run.estimate.report.clone(),
            output_eigenvalues: run.estimate.output_eigenvalues.clone(),
            reference,
            shrink,
            readouts: run.samples.iter().map(|s| Readout::new(s, shrink, s.trace_estimate)).collect(),
            flags: Some(run.estimate.flags),
            copies_consumed: run.copies_consumed,
            ancillas: run.ancillas,
        }
    };
    let flagged = result.flags.is_some_and(|f| f.any());
    let summary = format!(
        "Ê_c = {:.6} (exact {:.6})\nN̂ = {:.6} (exact {:.6})\nPT spectrum = [{}]\nverdict: {}\ncopies consumed = {}{}\n",
        result.estimate.ec,
        result.reference.ec,
        result.estimate.negativity,
        result.reference.negativity,
        fmt_list(&result.estimate.pt_eigenvalues),
        verdict_name(result.verdict),
        result.copies_consumed,
        if flagged { "\nwarning: inversion flags raised" } else { "" }
    );
    finish(config, &result, summary, flagged)
}

fn two_stage_cmd(config: &ExperimentConfig, rho: &DensityMatrix, mode: Mode) -> Result<Outcome> {
    let outcome = two_stage_protocol(rho)?;
    let result = TwoStageResult {
        mode,
        reference_verdict: ppt_verdict(rho)?.verdict,
        reference_concurrence: concurrence(rho)?.concurrence,
        outcome,
    };
    let flagged = result.outcome.second_stage.as_ref().is_some_and(|s| s.imaginary_flag);
    let summary = format!(
        "min eigenvalue of Λ(ρ) = {:.6} (threshold {:.6})\nverdict: {}\n{}\n",
        result.outcome.min_output_eigenvalue,
        result.outcome.threshold,
        verdict_name(result.outcome.verdict),
        result.outcome.message
    );
    finish(config, &result, summary, flagged)
}

fn compare_cmd(config: &ExperimentConfig, rho: &DensityMatrix, shots: &[u64], reps: usize, rng: Prng) -> Result<Outcome> {
    let rows = compare_sweep(rho, shots, reps, rng)?;
    let csv = compare_csv(&rows)?;
    let flagged = rows.iter().any(|r| r.flagged_runs > 0);
    let mut summary = String::from("method      shots       med|ΔC|     med|ΔE_f|   copies      r_p  r_c  r\n");
    for r in &rows {
        summary.push_str(&format!(
            "{:<11} {:<11} {:<11.3e} {:<11.3e} {:<11} {:<4} {:<4} {}{}\n",
            r.method.name(),
            r.shots,
            r.median_abs_err_c,
            r.median_abs_err_ef,
            r.copies_consumed,
            r.r_p,
            r.r_c,
            r.r,
            r.quoted_r.map(|q| format!(" (quoted r = {q})")).unwrap_or_default()
        ));
    }
    Ok(Outcome {
        report: report(config, &rows)?,
        summary,
        csv: Some(csv),
        flagged,
        failed: false,
    })
}

/// Column order: method, shots, reps, median_abs_err_c, median_abs_err_ef,
/// copies_consumed, r_p, r_c, r, quoted_r, flagged_runs.
pub fn compare_csv(rows: &[CompareRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

fn resources_cmd(config: &ExperimentConfig, d: u64) -> Result<Outcome> {
    let mut ledgers: Vec<ResourceLedger> = Vec::new();
    if d == 2 {
        ledgers.push(resource_ledger(ProtocolKind::ConcurrenceMoments)?);
    }
    ledgers.push(resource_ledger(ProtocolKind::Spectrum { d })?);
    ledgers.push(resource_ledger(ProtocolKind::Tomography { d })?);
    let mut summary = format!("d = {d}\nprotocol             r_p    r_c    r\n");
    for l in &ledgers {
        let name = match l.protocol {
            ProtocolKind::ConcurrenceMoments => "concurrence-moments",
            ProtocolKind::Spectrum { .. } => "spectrum",
            ProtocolKind::Tomography { .. } => "tomography",
        };
        summary.push_str(&format!(
            "{name:<20} {:<6} {:<6} {}{}\n",
            l.r_p,
            l.r_c,
            l.r,
            l.quoted_r.map(|q| format!(" (quoted r = {q})")).unwrap_or_default()
        ));
    }
    finish(config, &ledgers, summary, false)
}
