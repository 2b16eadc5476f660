//! Estimation pipelines built on the SPA channels.
//!
//! The concurrence protocol measures the four moments p_k = Tr((ρρ̃)^k) on
//! grouped copies and inverts them into the spectrum of ρρ̃. The spectrum
//! protocol does the same for Λ(ρ) on a d⊗d state and maps the result back to
//! the partial-transpose spectrum. The two-stage protocol decides PPT first
//! and only then spends copies on the γ-matrix estimate.

mod resources;
mod roots;

pub use resources::{resource_ledger, ProtocolKind, ResourceLedger, QUOTED_TOMOGRAPHY_R};
pub use roots::{elementary_symmetric, roots_from_power_sums, Inversion, InversionConfig, InversionFlags};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{cyclic_trace, power_sums_dd, Dd, DdMatrix};
use crate::measures::{
    spin_flip, wellens_kus_gamma, ConcurrenceBreakdown, NegativityReport, Verdict, WellensKusReport, PPT_TOL,
};
use crate::spa::{apply_spa_pt, group_channel_output, inverse_affine, GroupChannelSpec, GroupOutput};
use crate::states::DensityMatrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MomentProvenance {
    /// Directly from ρ and ρ̃.
    Ideal,
    /// From exact shift traces of the group channel outputs.
    SpaIdeal,
    /// From finite-shot estimates of those shift traces.
    SpaSampled,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentVector {
    /// p_k = Σᵢ λᵢᵏ, k = 1..4.
    pub p: [f64; 4],
    pub provenance: MomentProvenance,
}

impl MomentVector {
    /// p₁ ≥ p₂ ≥ p₃ ≥ p₄ ≥ 0 and p₁ ≤ 1, as exact moments of a spectrum in [0, 1] satisfy.
    pub fn is_consistent(&self) -> bool {
        let p = self.p;
        p[0] <= 1.0 + 1e-12 && p.windows(2).all(|w| w[0] >= w[1] - 1e-12) && p[3] >= -1e-12
    }
}

/// M_k: the binary-POVM observable on 2k copies whose mean is p_k.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentObservable {
    pub k: usize,
    pub d_k: u64,
    /// (d_k³+1)/2.
    pub scale: f64,
    /// κ_k = 4·d_k, the constant that makes ⟨M_k⟩ = p_k.
    pub offset: u64,
    /// d_k³, the constant offset as printed in the literature; yields p_k + 4d_k − d_k³.
    pub literature_offset: u64,
    pub shift_order: usize,
}

impl MomentObservable {
    pub fn new(k: usize) -> Result<Self> {
        let spec = GroupChannelSpec::new(k)?;
        Ok(Self {
            k,
            d_k: spec.d_k,
            scale: spec.amplification() as f64 / 2.0,
            offset: 4 * spec.d_k,
            literature_offset: spec.d_k.pow(3),
            shift_order: spec.copies,
        })
    }

    /// scale·2·Re Tr(Vρ_k) − κ_k in double-double.
    pub fn moment_from_shift_trace(&self, re_trace: Dd) -> Dd {
        let a = Dd::from_f64(2.0 * self.scale);
        a * re_trace - Dd::from_f64(self.offset as f64)
    }

    /// The same map with the literature offset d_k³ instead of κ_k.
    pub fn literature_moment(&self, re_trace: Dd) -> Dd {
        let a = Dd::from_f64(2.0 * self.scale);
        a * re_trace - Dd::from_f64(self.literature_offset as f64)
    }
}

/// p_k as the cyclic trace of 2k alternating factors ρ, ρ̃.
pub fn exact_moments(rho: &DensityMatrix) -> Result<MomentVector> {
    let tilde = spin_flip(rho)?;
    let mut p = [0.0; 4];
    for (k, slot) in p.iter_mut().enumerate() {
        let factors: Vec<_> = (0..2 * (k + 1))
            .map(|i| if i % 2 == 0 { rho.matrix().clone() } else { tilde.clone() })
            .collect();
        *slot = cyclic_trace(&factors)?.re;
    }
    Ok(MomentVector {
        p,
        provenance: MomentProvenance::Ideal,
    })
}

pub fn moment_from_channel(output: &GroupOutput, observable: &MomentObservable) -> Result<f64> {
    if output.spec.k != observable.k {
        return Err(Error::InvalidParameter(format!(
            "observable for k = {} applied to group output k = {}",
            observable.k, output.spec.k
        )));
    }
    Ok(observable.moment_from_shift_trace(output.shift_trace_dd()?).to_f64())
}

/// All four moments read off the exact group channel outputs.
pub fn channel_moments(rho: &DensityMatrix) -> Result<MomentVector> {
    let mut p = [0.0; 4];
    for (i, slot) in p.iter_mut().enumerate() {
        let k = i + 1;
        *slot = moment_from_channel(&group_channel_output(rho, k)?, &MomentObservable::new(k)?)?;
    }
    Ok(MomentVector {
        p,
        provenance: MomentProvenance::SpaIdeal,
    })
}

/// λ̂ of ρρ̃ from four moments, descending.
pub fn newton_invert(moments: &MomentVector, config: &InversionConfig) -> Result<Inversion> {
    let sums: Vec<Dd> = moments.p.iter().map(|&x| Dd::from_f64(x)).collect();
    roots_from_power_sums(&sums, config)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConcurrenceEstimate {
    pub moments: MomentVector,
    pub breakdown: ConcurrenceBreakdown,
    pub flags: InversionFlags,
}

pub fn concurrence_from_moments(moments: &MomentVector, config: &InversionConfig) -> Result<ConcurrenceEstimate> {
    let inv = newton_invert(moments, config)?;
    let lambdas = [inv.roots[0], inv.roots[1], inv.roots[2], inv.roots[3]];
    Ok(ConcurrenceEstimate {
        moments: *moments,
        breakdown: ConcurrenceBreakdown::from_lambdas(lambdas),
        flags: inv.flags,
    })
}

/// The full four-moment pipeline on exact channel outputs.
pub fn concurrence_protocol(rho: &DensityMatrix) -> Result<ConcurrenceEstimate> {
    concurrence_from_moments(&channel_moments(rho)?, &InversionConfig::EXACT)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumEstimate {
    /// Local dimension d of the d⊗d input.
    pub d: u64,
    /// Orders n of the measured moments Tr(σⁿ); Tr σ = 1 is not measured.
    pub measured_orders: Vec<usize>,
    /// Tr(σⁿ) for n = 1..D, the first entry fixed at 1.
    pub power_sums: Vec<f64>,
    /// Recovered spectrum of σ = Λ(ρ), descending.
    pub output_eigenvalues: Vec<f64>,
    /// λ′ = (d³+1)λ − d, descending.
    pub pt_eigenvalues: Vec<f64>,
    pub report: NegativityReport,
    pub flags: InversionFlags,
}

/// Tr(σⁿ), n = 1..D, of σ = Λ(ρ) in double-double.
///
/// Tr σ = 1 is known rather than measured, but the first entry is the trace
/// of the rounded σ itself: replacing it with an exact 1 would be inconsistent
/// with the higher sums at the 1e-16 level, which a triple eigenvalue turns
/// into errors near 1e-5.
pub fn spectrum_power_sums(rho: &DensityMatrix) -> Result<Vec<Dd>> {
    let sigma = apply_spa_pt(rho)?;
    power_sums_dd(&DdMatrix::from_matrix(sigma.matrix())?, sigma.dim())
}

/// Inverts Tr(σⁿ) for the spectrum of σ and maps it back to the PT spectrum.
pub fn spectrum_from_power_sums(power_sums: &[Dd], d: u64, config: &InversionConfig) -> Result<SpectrumEstimate> {
    let dim = (d * d) as usize;
    if power_sums.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            actual: power_sums.len(),
        });
    }
    let inv = roots_from_power_sums(power_sums, config)?;
    let pt: Vec<f64> = inv.roots.iter().map(|&l| inverse_affine(l, d)).collect();
    Ok(SpectrumEstimate {
        d,
        measured_orders: (2..=dim).collect(),
        power_sums: power_sums.iter().map(|p| p.to_f64()).collect(),
        report: NegativityReport::from_pt_spectrum(pt.clone()),
        output_eigenvalues: inv.roots,
        pt_eigenvalues: pt,
        flags: inv.flags,
    })
}

pub fn spectrum_protocol(rho: &DensityMatrix) -> Result<SpectrumEstimate> {
    let d = rho.shape().dim_a as u64;
    spectrum_from_power_sums(&spectrum_power_sums(rho)?, d, &InversionConfig::EXACT_DD)
}

pub const SECOND_STAGE_ABANDONED: &str = "no entanglement detected, second stage abandoned";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwoStageOutcome {
    /// Smallest eigenvalue of Λ(ρ).
    pub min_output_eigenvalue: f64,
    /// d/(d³+1): Λ(ρ) has an eigenvalue below it iff ρ^{T_B} has a negative one.
    pub threshold: f64,
    pub verdict: Verdict,
    pub second_stage: Option<WellensKusReport>,
    pub message: String,
}

pub fn two_stage_protocol(rho: &DensityMatrix) -> Result<TwoStageOutcome> {
    rho.require_two_qubit()?;
    let sigma = apply_spa_pt(rho)?;
    let min = crate::linalg::herm_eigen(sigma.matrix())?.min();
    let npt = inverse_affine(min, 2) < -PPT_TOL;
    let (verdict, second_stage, message) = if npt {
        let wk = wellens_kus_gamma(rho)?;
        let msg = format!("entangled; concurrence estimate {:.6}", wk.concurrence_estimate);
        (Verdict::Npt, Some(wk), msg)
    } else {
        (Verdict::Ppt, None, SECOND_STAGE_ABANDONED.to_string())
    };
    Ok(TwoStageOutcome {
        min_output_eigenvalue: min,
        threshold: 2.0 / 9.0,
        verdict,
        second_stage,
        message,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{herm_eigen, BipartiteShape};
    use crate::measures::{concurrence, negativity_report, partial_transpose_b};
    use crate::prng::Prng;
    use crate::spa::GROUP_AMPLIFICATION;
    use crate::states::{make_state, StateFamily};

    fn state(f: StateFamily) -> DensityMatrix {
        make_state(&f, Prng::new(0, 0)).unwrap()
    }

    fn random_qubits(seed: u64) -> DensityMatrix {
        make_state(&StateFamily::RandomMixed { dim_a: 2, dim_b: 2 }, Prng::new(seed, 21)).unwrap()
    }

    /// Σλᵢᵏ from an eigendecomposition of the Hermitian form √ρρ̃√ρ.
    fn eigen_moments(rho: &DensityMatrix) -> [f64; 4] {
        let l = herm_eigen(&crate::measures::concurrence_matrix(rho).unwrap()).unwrap().values;
        [1, 2, 3, 4].map(|k| l.iter().map(|x| x.max(0.0).powi(k)).sum())
    }

    #[test]
    fn observables() {
        for k in 1..=4 {
            let o = MomentObservable::new(k).unwrap();
            assert_eq!(2.0 * o.scale, GROUP_AMPLIFICATION[k - 1] as f64);
            assert_eq!(o.offset, 4 * 4u64.pow(k as u32));
            assert_eq!(o.shift_order, 2 * k);
        }
    }

    #[test]
    fn exact_moment_examples() {
        let bell = exact_moments(&state(StateFamily::Bell)).unwrap();
        for p in bell.p {
            assert!((p - 1.0).abs() < 1e-12);
        }
        let mixed = exact_moments(&DensityMatrix::maximally_mixed(BipartiteShape::qubits())).unwrap();
        for (p, w) in mixed.p.iter().zip([0.25, 1.0 / 64.0, 1.0 / 1024.0, 1.0 / 16384.0]) {
            assert!((p - w).abs() < 1e-15);
        }
        assert!(mixed.is_consistent());
    }

    #[test]
    fn exact_moments_match_eigendecomposition() {
        for seed in 0..100 {
            let rho = random_qubits(seed);
            let p = exact_moments(&rho).unwrap().p;
            for (a, b) in p.iter().zip(eigen_moments(&rho)) {
                assert!((a - b).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn channel_moment_examples() {
        let bell = group_channel_output(&state(StateFamily::Bell), 1).unwrap();
        let o = MomentObservable::new(1).unwrap();
        assert!((moment_from_channel(&bell, &o).unwrap() - 1.0).abs() < 1e-14);
        let lit = o.literature_moment(bell.shift_trace_dd().unwrap()).to_f64();
        assert!((lit - (1.0 + 16.0 - 64.0)).abs() < 1e-12);
        let mixed = DensityMatrix::maximally_mixed(BipartiteShape::qubits());
        let out = group_channel_output(&mixed, 1).unwrap();
        assert!((moment_from_channel(&out, &o).unwrap() - 0.25).abs() < 1e-14);
        let wrong = MomentObservable::new(2).unwrap();
        assert!(moment_from_channel(&out, &wrong).is_err());
    }

    #[test]
    fn defining_identity() {
        for seed in 0..200 {
            let rho = random_qubits(seed);
            let channel = channel_moments(&rho).unwrap();
            for (a, b) in channel.p.iter().zip(eigen_moments(&rho)) {
                assert!((a - b).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn inversion_examples() {
        let bell = MomentVector {
            p: [1.0; 4],
            provenance: MomentProvenance::Ideal,
        };
        let inv = newton_invert(&bell, &InversionConfig::EXACT).unwrap();
        assert!((inv.roots[0] - 1.0).abs() < 1e-12 && inv.roots[1..].iter().all(|x| x.abs() < 1e-12));
        let est = concurrence_from_moments(&bell, &InversionConfig::EXACT).unwrap();
        assert!((est.breakdown.concurrence - 1.0).abs() < 1e-12);
        assert!((est.breakdown.ef - 1.0).abs() < 1e-12);
    }

    #[test]
    fn werner_from_moments() {
        let rho = state(StateFamily::Werner { p: 0.6 });
        let est = concurrence_protocol(&rho).unwrap();
        assert!((est.breakdown.concurrence - 0.4).abs() < 1e-8);
        let sep = state(StateFamily::Werner { p: 0.2 });
        assert_eq!(concurrence_protocol(&sep).unwrap().breakdown.concurrence, 0.0);
        let product = state(StateFamily::ProductPure { dim_a: 2, dim_b: 2 });
        assert_eq!(concurrence_protocol(&product).unwrap().breakdown.concurrence, 0.0);
    }

    #[test]
    fn werner_estimates_increase() {
        let c: Vec<f64> = [0.4, 0.6, 0.8, 1.0]
            .iter()
            .map(|&p| concurrence_protocol(&state(StateFamily::Werner { p })).unwrap().breakdown.concurrence)
            .collect();
        assert!(c.windows(2).all(|w| w[1] > w[0]), "{c:?}");
    }

    #[test]
    fn protocol_matches_wootters() {
        for seed in 0..50 {
            let rho = random_qubits(seed);
            let est = concurrence_protocol(&rho).unwrap();
            let exact = concurrence(&rho).unwrap();
            assert!((est.breakdown.concurrence - exact.concurrence).abs() < 1e-6, "seed {seed}");
            assert!((est.breakdown.ef - exact.ef).abs() < 1e-6);
        }
    }

    #[test]
    fn spectrum_examples() {
        let bell = spectrum_protocol(&state(StateFamily::Bell)).unwrap();
        let want = [0.5, 0.5, 0.5, -0.5];
        for (a, w) in bell.pt_eigenvalues.iter().zip(want) {
            assert!((a - w).abs() < 1e-8);
        }
        assert!((bell.report.ec - 1.0).abs() < 1e-8);
        assert_eq!(bell.measured_orders, vec![2, 3, 4]);
        let mixed = spectrum_protocol(&DensityMatrix::maximally_mixed(BipartiteShape::qubits())).unwrap();
        assert!(mixed.pt_eigenvalues.iter().all(|l| (l - 0.25).abs() < 1e-8));
        assert!(mixed.report.ec.abs() < 1e-8);
    }

    fn check_spectrum(rho: &DensityMatrix) {
        let est = spectrum_protocol(rho).unwrap();
        let exact = herm_eigen(&partial_transpose_b(rho)).unwrap().values;
        for (a, b) in est.pt_eigenvalues.iter().zip(exact.iter().rev()) {
            assert!((a - b).abs() < 1e-6, "{:?} vs {exact:?}", est.pt_eigenvalues);
        }
        assert!((est.report.ec - negativity_report(rho).unwrap().ec).abs() < 1e-6);
    }

    #[test]
    fn spectrum_protocol_qubits() {
        for seed in 0..50 {
            check_spectrum(&random_qubits(seed));
        }
        check_spectrum(&state(StateFamily::Werner { p: 0.8 }));
    }

    #[test]
    fn spectrum_protocol_qutrits() {
        for seed in 0..10 {
            let rho = make_state(&StateFamily::RandomMixed { dim_a: 3, dim_b: 3 }, Prng::new(seed, 3)).unwrap();
            check_spectrum(&rho);
        }
        check_spectrum(&state(StateFamily::Isotropic { p: 0.7, d: 3 }));
        check_spectrum(&DensityMatrix::maximally_mixed(BipartiteShape::new(3, 3).unwrap()));
    }

    #[test]
    fn spectrum_rejects_wrong_length() {
        assert!(spectrum_from_power_sums(&[Dd::ONE; 3], 2, &InversionConfig::EXACT_DD).is_err());
    }

    #[test]
    fn two_stage_examples() {
        let ppt = two_stage_protocol(&state(StateFamily::Werner { p: 0.2 })).unwrap();
        assert_eq!(ppt.verdict, Verdict::Ppt);
        assert!(ppt.second_stage.is_none());
        assert_eq!(ppt.message, SECOND_STAGE_ABANDONED);

        let npt = two_stage_protocol(&state(StateFamily::Werner { p: 0.8 })).unwrap();
        assert_eq!(npt.verdict, Verdict::Npt);
        let c = npt.second_stage.unwrap().concurrence_estimate;
        assert!((c - 0.7).abs() < 1e-9);

        let bell = two_stage_protocol(&state(StateFamily::Bell)).unwrap();
        assert!((bell.min_output_eigenvalue - 1.0 / 6.0).abs() < 1e-14);
        assert!(bell.min_output_eigenvalue < bell.threshold);
    }
}
