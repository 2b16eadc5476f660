use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::concurrence;
use crate::prng::Prng;
use crate::protocols::{resource_ledger, ProtocolKind};
use crate::states::DensityMatrix;

use super::{run_concurrence_protocol, run_tomography_baseline, Sampling};

/// Runs `f` for repetitions 0..reps, repetition r on `master.derive(r)`,
/// in parallel. Results come back in repetition order.
pub fn repeat<T, F>(reps: usize, master: Prng, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(Prng) -> Result<T> + Sync,
{
    (0..reps as u64).into_par_iter().map(|r| f(master.derive(r))).collect()
}

pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    if v.len() % 2 == 1 {
        v[mid]
    } else {
        0.5 * (v[mid - 1] + v[mid])
    }
}

/// Mean and sample standard deviation (n − 1 denominator).
pub fn mean_and_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CompareMethod {
    Moments,
    Tomography,
}

impl CompareMethod {
    pub fn name(self) -> &'static str {
        match self {
            CompareMethod::Moments => "moments",
            CompareMethod::Tomography => "tomography",
        }
    }
}

/// One row of the protocol-versus-tomography table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompareRow {
    pub method: CompareMethod,
    /// Shots per estimated parameter.
    pub shots: u64,
    pub reps: usize,
    pub median_abs_err_c: f64,
    pub median_abs_err_ef: f64,
    /// Copies of ρ used by one repetition (ancillas excluded).
    pub copies_consumed: u64,
    pub r_p: u64,
    pub r_c: u64,
    pub r: u64,
    pub quoted_r: Option<u64>,
    /// Repetitions whose moment inversion raised a flag.
    pub flagged_runs: usize,
}

/// Median absolute errors of Ĉ and Ê_f for both methods at each shot count.
pub fn compare_sweep(rho: &DensityMatrix, shots: &[u64], reps: usize, master: Prng) -> Result<Vec<CompareRow>> {
    if reps < 2 {
        return Err(Error::InvalidParameter("comparison needs at least 2 repetitions".into()));
    }
    let exact = concurrence(rho)?;
    let mut rows = Vec::new();
    for &n in shots {
        let sampling = Sampling::shots(n);
        for method in [CompareMethod::Moments, CompareMethod::Tomography] {
            let runs: Vec<(f64, f64, u64, bool)> = repeat(reps, master, |rng| match method {
                CompareMethod::Moments => {
                    let run = run_concurrence_protocol(rho, &sampling, rng)?;
                    let b = run.estimate.breakdown;
                    Ok((b.concurrence, b.ef, run.copies_consumed, run.estimate.flags.any()))
                }
                CompareMethod::Tomography => {
                    let run = run_tomography_baseline(rho, &sampling, rng)?;
                    Ok((run.breakdown.concurrence, run.breakdown.ef, run.copies_consumed, false))
                }
            })?;
            let err_c: Vec<f64> = runs.iter().map(|r| (r.0 - exact.concurrence).abs()).collect();
            let err_ef: Vec<f64> = runs.iter().map(|r| (r.1 - exact.ef).abs()).collect();
            let ledger = resource_ledger(match method {
                CompareMethod::Moments => ProtocolKind::ConcurrenceMoments,
                CompareMethod::Tomography => ProtocolKind::Tomography { d: 2 },
            })?;
            rows.push(CompareRow {
                method,
                shots: n,
                reps,
                median_abs_err_c: median(&err_c),
                median_abs_err_ef: median(&err_ef),
                copies_consumed: runs[0].2,
                r_p: ledger.r_p,
                r_c: ledger.r_c,
                r: ledger.r,
                quoted_r: ledger.quoted_r,
                flagged_runs: runs.iter().filter(|r| r.3).count(),
            });
        }
    }
    Ok(rows)
}
