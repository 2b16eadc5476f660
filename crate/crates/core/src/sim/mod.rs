//! Finite-shot simulation of the protocols.
//!
//! Each moment is read out as a binary ancilla measurement whose success
//! probability is p₊ = (1 + Re Tr(Vρ_k))/2. The interferometer itself is not
//! simulated: p₊ is computed exactly and the outcome count is drawn from
//! Binomial(N, p₊). With [`Sampling::PlugIn`] the estimate uses p₊ itself,
//! which reproduces the noiseless pipeline.

mod stats;
mod tomography;

pub use stats::{compare_sweep, median, mean_and_std, repeat, CompareRow, CompareMethod};
pub use tomography::{run_tomography_baseline, PauliEstimate, TomographyRun, TOMOGRAPHY_STREAM_BASE};

use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Dd;
use crate::prng::Prng;
use crate::protocols::{
    concurrence_from_moments, spectrum_from_power_sums, spectrum_power_sums, ConcurrenceEstimate,
    InversionConfig, MomentObservable, MomentProvenance, MomentVector, SpectrumEstimate,
};
use crate::spa::group_channel_output;
use crate::states::DensityMatrix;

/// How binary-POVM means are obtained.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "sampling", rename_all = "kebab-case")]
pub enum Sampling {
    /// Use p₊ itself (no shot noise).
    PlugIn,
    /// The same number of shots for every estimated parameter.
    Shots { shots: u64 },
    /// Shots per estimated parameter, in protocol order.
    PerParameter { shots: Vec<u64> },
}

impl Sampling {
    pub fn shots(shots: u64) -> Self {
        Sampling::Shots { shots }
    }

    /// Shots for parameter `index`, or `None` in plug-in mode.
    pub fn shots_for(&self, index: usize) -> Result<Option<u64>> {
        let n = match self {
            Sampling::PlugIn => return Ok(None),
            Sampling::Shots { shots } => *shots,
            Sampling::PerParameter { shots } => *shots.get(index).ok_or_else(|| {
                Error::InvalidParameter(format!("no shot count for parameter {index}"))
            })?,
        };
        if n == 0 {
            return Err(Error::InvalidParameter("shots must be at least 1".into()));
        }
        Ok(Some(n))
    }

    pub fn is_plug_in(&self) -> bool {
        matches!(self, Sampling::PlugIn)
    }

    fn inversion_config(&self) -> InversionConfig {
        if self.is_plug_in() {
            InversionConfig::EXACT
        } else {
            InversionConfig::SAMPLED
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShotRecord {
    pub shots: u64,
    pub successes: u64,
    /// The Bernoulli parameter used to sample, rounded to f64.
    pub target_mean: f64,
}

/// One binary-POVM readout: p₊ = (1 + t)/2 for the exact trace t.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParameterSample {
    /// Moment index k, or the power order n for the spectrum protocol.
    pub order: usize,
    pub p_plus: f64,
    pub record: Option<ShotRecord>,
    /// Estimate of t: 2p̂₊ − 1.
    pub trace_estimate: f64,
    pub copies_consumed: u64,
    pub ancillas: u64,
}

fn sample_trace(order: usize, trace: Dd, copies_per_shot: u64, shots: Option<u64>, rng: Prng) -> Result<(ParameterSample, Dd)> {
    let half = Dd::from_f64(0.5);
    let p_plus = (Dd::ONE + trace) * half;
    let p_plus_f = p_plus.to_f64().clamp(0.0, 1.0);
    let (record, p_hat) = match shots {
        None => (None, p_plus),
        Some(n) => {
            let binomial = Binomial::new(n, p_plus_f)
                .map_err(|e| Error::InvalidParameter(format!("binomial({n}, {p_plus_f}): {e}")))?;
            let successes = binomial.sample(&mut rng.rng());
            let record = ShotRecord {
                shots: n,
                successes,
                target_mean: p_plus_f,
            };
            (Some(record), Dd::from_f64(successes as f64) / Dd::from_f64(n as f64))
        }
    };
    let trace_hat = p_hat * Dd::from_f64(2.0) - Dd::ONE;
    let shots_used = shots.unwrap_or(0);
    Ok((
        ParameterSample {
            order,
            p_plus: p_plus_f,
            record,
            trace_estimate: trace_hat.to_f64(),
            copies_consumed: shots_used * copies_per_shot,
            ancillas: shots_used,
        },
        trace_hat,
    ))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentSample {
    pub sample: ParameterSample,
    /// p̂_k = (d_k³+1)·(2p̂₊ − 1) − κ_k.
    pub estimate: f64,
}

/// Samples the k-th group's binary POVM. The rng is used as given; callers
/// assign stream ids.
pub fn sample_moment_povm(rho: &DensityMatrix, k: usize, shots: Option<u64>, rng: Prng) -> Result<MomentSample> {
    let output = group_channel_output(rho, k)?;
    let observable = MomentObservable::new(k)?;
    let (sample, trace_hat) = sample_trace(k, output.shift_trace_dd()?, 2 * k as u64, shots, rng)?;
    Ok(MomentSample {
        estimate: observable.moment_from_shift_trace(trace_hat).to_f64(),
        sample,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimatorRun {
    pub rng: Prng,
    pub sampling: Sampling,
    pub inversion: InversionConfig,
    pub samples: Vec<MomentSample>,
    pub estimate: ConcurrenceEstimate,
    pub copies_consumed: u64,
    pub ancillas: u64,
}

impl EstimatorRun {
    /// Rebuilds the estimate from the recorded shots alone.
    pub fn recompute(&self) -> Result<ConcurrenceEstimate> {
        let mut p = [0.0; 4];
        for (slot, s) in p.iter_mut().zip(&self.samples) {
            let observable = MomentObservable::new(s.sample.order)?;
            let p_hat = match s.sample.record {
                Some(r) => Dd::from_f64(r.successes as f64) / Dd::from_f64(r.shots as f64),
                None => return Ok(self.estimate.clone()),
            };
            let trace_hat = p_hat * Dd::from_f64(2.0) - Dd::ONE;
            *slot = observable.moment_from_shift_trace(trace_hat).to_f64();
        }
        let moments = MomentVector {
            p,
            provenance: MomentProvenance::SpaSampled,
        };
        concurrence_from_moments(&moments, &self.inversion)
    }
}

/// Four independent moment readouts (stream id k) and the concurrence they imply.
pub fn run_concurrence_protocol(rho: &DensityMatrix, sampling: &Sampling, rng: Prng) -> Result<EstimatorRun> {
    let mut samples = Vec::with_capacity(4);
    for k in 1..=4 {
        samples.push(sample_moment_povm(rho, k, sampling.shots_for(k - 1)?, rng.with_stream(k as u64))?);
    }
    let p = [0, 1, 2, 3].map(|i| samples[i].estimate);
    let provenance = if sampling.is_plug_in() {
        MomentProvenance::SpaIdeal
    } else {
        MomentProvenance::SpaSampled
    };
    let inversion = sampling.inversion_config();
    let estimate = concurrence_from_moments(&MomentVector { p, provenance }, &inversion)?;
    Ok(EstimatorRun {
        rng,
        sampling: sampling.clone(),
        inversion,
        copies_consumed: samples.iter().map(|s| s.sample.copies_consumed).sum(),
        ancillas: samples.iter().map(|s| s.sample.ancillas).sum(),
        samples,
        estimate,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumRun {
    pub rng: Prng,
    pub sampling: Sampling,
    /// One readout per order n = 2..D.
    pub samples: Vec<ParameterSample>,
    pub estimate: SpectrumEstimate,
    pub copies_consumed: u64,
    pub ancillas: u64,
}

/// Samples Tr(σⁿ) for n = 2..D (stream id n) and inverts for the PT spectrum.
pub fn run_spectrum_protocol(rho: &DensityMatrix, sampling: &Sampling, rng: Prng) -> Result<SpectrumRun> {
    let d = rho.shape().dim_a as u64;
    let exact = spectrum_power_sums(rho)?;
    let mut sums = vec![exact[0]];
    let mut samples = Vec::with_capacity(exact.len() - 1);
    for (i, &trace) in exact.iter().enumerate().skip(1) {
        let n = i + 1;
        let (sample, trace_hat) = sample_trace(n, trace, n as u64, sampling.shots_for(i - 1)?, rng.with_stream(n as u64))?;
        samples.push(sample);
        sums.push(trace_hat);
    }
    let config = if sampling.is_plug_in() {
        InversionConfig::EXACT_DD
    } else {
        InversionConfig::SAMPLED
    };
    let estimate = spectrum_from_power_sums(&sums, d, &config)?;
    Ok(SpectrumRun {
        rng,
        sampling: sampling.clone(),
        copies_consumed: samples.iter().map(|s| s.copies_consumed).sum(),
        ancillas: samples.iter().map(|s| s.ancillas).sum(),
        samples,
        estimate,
    })
}

/// Noise budget of one moment readout at a given shot count.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentNoise {
    pub k: usize,
    pub amplification: u64,
    pub p_plus: f64,
    pub shots: u64,
    /// 2(d_k³+1)·√(p₊(1−p₊)/N): p̂_k is (d_k³+1)(2p̂₊ − 1) − κ_k.
    pub standard_error: f64,
    /// (d_k³+1)·√(p₊(1−p₊)/N), the same expression without the factor 2 of 2p̂₊.
    pub undoubled_standard_error: f64,
}

pub fn moment_noise(rho: &DensityMatrix, k: usize, shots: u64) -> Result<MomentNoise> {
    let output = group_channel_output(rho, k)?;
    let p_plus = ((Dd::ONE + output.shift_trace_dd()?) * Dd::from_f64(0.5)).to_f64();
    let a = output.spec.amplification();
    let base = (p_plus * (1.0 - p_plus) / shots as f64).sqrt();
    Ok(MomentNoise {
        k,
        amplification: a,
        p_plus,
        shots,
        standard_error: 2.0 * a as f64 * base,
        undoubled_standard_error: a as f64 * base,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::BipartiteShape;
    use crate::measures::{concurrence, negativity_report};
    use crate::protocols::{concurrence_protocol, exact_moments};
    use crate::states::{make_state, StateFamily};

    fn bell() -> DensityMatrix {
        make_state(&StateFamily::Bell, Prng::new(0, 0)).unwrap()
    }

    fn random_qubits(seed: u64) -> DensityMatrix {
        make_state(&StateFamily::RandomMixed { dim_a: 2, dim_b: 2 }, Prng::new(seed, 5)).unwrap()
    }

    #[test]
    fn bell_k1_target_mean() {
        let s = sample_moment_povm(&bell(), 1, Some(1000), Prng::new(1, 1)).unwrap();
        assert!((s.sample.p_plus - 41.0 / 65.0).abs() < 1e-15);
        assert_eq!(s.sample.copies_consumed, 2000);
        assert_eq!(s.sample.ancillas, 1000);
        let r = s.sample.record.unwrap();
        assert!(r.successes <= 1000);
        assert_eq!(r.target_mean, s.sample.p_plus);
    }

    #[test]
    fn maximally_mixed_k2_target_mean() {
        let rho = DensityMatrix::maximally_mixed(BipartiteShape::qubits());
        let s = sample_moment_povm(&rho, 2, None, Prng::new(1, 2)).unwrap();
        let want = (1.0 + (4.0 * 16.0 + 1.0 / 64.0) / 4097.0) / 2.0;
        assert!((s.sample.p_plus - want).abs() < 1e-15);
        assert!((s.estimate - 1.0 / 64.0).abs() < 1e-15);
    }

    #[test]
    fn plug_in_reproduces_moments() {
        for seed in 0..20 {
            let rho = random_qubits(seed);
            let exact = exact_moments(&rho).unwrap();
            for k in 1..=4 {
                let s = sample_moment_povm(&rho, k, None, Prng::new(0, k as u64)).unwrap();
                assert!((s.estimate - exact.p[k - 1]).abs() < 1e-12);
                assert!(s.sample.record.is_none() && s.sample.copies_consumed == 0);
            }
        }
    }

    #[test]
    fn plug_in_concurrence_matches_ideal() {
        let run = run_concurrence_protocol(&bell(), &Sampling::PlugIn, Prng::new(3, 0)).unwrap();
        assert!((run.estimate.breakdown.concurrence - 1.0).abs() < 1e-8);
        for seed in 0..20 {
            let rho = random_qubits(seed);
            let run = run_concurrence_protocol(&rho, &Sampling::PlugIn, Prng::new(3, 0)).unwrap();
            let ideal = concurrence_protocol(&rho).unwrap();
            assert!((run.estimate.breakdown.concurrence - ideal.breakdown.concurrence).abs() < 1e-8);
            assert!((run.estimate.breakdown.concurrence - concurrence(&rho).unwrap().concurrence).abs() < 1e-6);
        }
    }

    #[test]
    fn runs_are_deterministic_and_recomputable() {
        let rho = random_qubits(4);
        let sampling = Sampling::shots(10_000);
        let a = run_concurrence_protocol(&rho, &sampling, Prng::new(99, 0)).unwrap();
        let b = run_concurrence_protocol(&rho, &sampling, Prng::new(99, 0)).unwrap();
        assert_eq!(a, b);
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        assert_eq!(a.recompute().unwrap(), a.estimate);
        assert_eq!(a.copies_consumed, 10_000 * 20);
        assert_eq!(a.ancillas, 40_000);
        let c = run_concurrence_protocol(&rho, &sampling, Prng::new(100, 0)).unwrap();
        assert_ne!(a.samples, c.samples);
    }

    #[test]
    fn moment_streams_are_independent_of_other_groups() {
        let rho = random_qubits(4);
        let full = run_concurrence_protocol(&rho, &Sampling::shots(500), Prng::new(7, 0)).unwrap();
        let alone = sample_moment_povm(&rho, 3, Some(500), Prng::new(7, 0).with_stream(3)).unwrap();
        assert_eq!(full.samples[2], alone);
    }

    #[test]
    fn per_parameter_allocation() {
        let rho = random_qubits(1);
        let sampling = Sampling::PerParameter {
            shots: vec![10, 20, 30, 40],
        };
        let run = run_concurrence_protocol(&rho, &sampling, Prng::new(7, 0)).unwrap();
        assert_eq!(run.copies_consumed, 10 * 2 + 20 * 4 + 30 * 6 + 40 * 8);
        let short = Sampling::PerParameter { shots: vec![10] };
        assert!(run_concurrence_protocol(&rho, &short, Prng::new(7, 0)).is_err());
        assert!(run_concurrence_protocol(&rho, &Sampling::shots(0), Prng::new(7, 0)).is_err());
    }

    #[test]
    fn spectrum_plug_in() {
        let run = run_spectrum_protocol(&bell(), &Sampling::PlugIn, Prng::new(0, 0)).unwrap();
        assert!((run.estimate.report.ec - 1.0).abs() < 1e-8);
        assert_eq!(run.samples.len(), 3);
        for seed in 0..20 {
            let rho = random_qubits(seed);
            let run = run_spectrum_protocol(&rho, &Sampling::PlugIn, Prng::new(0, 0)).unwrap();
            assert!((run.estimate.report.ec - negativity_report(&rho).unwrap().ec).abs() < 1e-6);
        }
    }

    #[test]
    fn spectrum_sampled_copies() {
        let run = run_spectrum_protocol(&bell(), &Sampling::shots(100), Prng::new(0, 0)).unwrap();
        assert_eq!(run.copies_consumed, 100 * (2 + 3 + 4));
        assert!(run.estimate.report.ec.is_finite());
    }

    #[test]
    fn noise_budget() {
        let n = moment_noise(&bell(), 1, 1_000_000).unwrap();
        let p: f64 = 41.0 / 65.0;
        assert!((n.standard_error - 130.0 * (p * (1.0 - p) / 1e6).sqrt()).abs() < 1e-12);
        assert!((n.standard_error / n.undoubled_standard_error - 2.0).abs() < 1e-15);
        let n4 = moment_noise(&bell(), 4, 1_000_000).unwrap();
        assert_eq!(n4.amplification, 16_777_217);
        assert!(n4.standard_error > 1.0);
    }
}
