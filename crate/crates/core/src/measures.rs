//! Ground-truth entanglement quantities computed directly from a known state.
//!
//! These are the references every estimation pipeline is checked against:
//! Wootters concurrence and entanglement of formation for two qubits, the
//! partial-transpose spectrum with negativity and the log trace norm E_c,
//! the PPT verdict, and the γ-matrix spectrum whose smallest eigenvalue
//! tracks C²/4 on entangled two-qubit states.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    general_eigenvalues, herm_eigen, partial_transpose, pauli, sqrt_psd, ComplexMatrix,
    Subsystem, C64,
};
use crate::prng::Prng;
use crate::states::{make_state, DensityMatrix, StateFamily};

/// Threshold below which a partial-transpose eigenvalue counts as negative.
pub const PPT_TOL: f64 = 1e-9;

/// Ratio 4·λ_min(γ)/C² on entangled two-qubit states. Fixed by a calibration
/// sweep over random entangled states (see [`wellens_kus_calibration`]); the
/// regression test in this module keeps it honest.
pub const WELLENS_KUS_KAPPA: f64 = 1.0;

/// Imaginary part of λ_min(γ) above which the γ estimate is flagged.
pub const GAMMA_IMAG_GUARD: f64 = 1e-6;

/// Σ = σ_y ⊗ σ_y.
pub fn spin_flip_operator() -> ComplexMatrix {
    pauli(2).tensor(&pauli(2))
}

/// ρ̃ = Σρ*Σ.
pub fn spin_flip(rho: &DensityMatrix) -> Result<ComplexMatrix> {
    rho.require_two_qubit()?;
    let sigma = spin_flip_operator();
    Ok(&(&sigma * &rho.matrix().conj()) * &sigma)
}

/// −x log₂x − (1−x) log₂(1−x), with 0·log 0 = 0.
pub fn binary_entropy(x: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::InvalidParameter(format!("binary entropy argument {x} outside [0, 1]")));
    }
    let term = |t: f64| if t <= 0.0 { 0.0 } else { -t * t.log2() };
    Ok(term(x) + term(1.0 - x))
}

/// E_f = h((1 + √(1 − C²))/2) for C ∈ [0, 1].
pub fn entanglement_of_formation(c: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&c) {
        return Err(Error::InvalidParameter(format!("concurrence {c} outside [0, 1]")));
    }
    binary_entropy((1.0 + (1.0 - c * c).max(0.0).sqrt()) / 2.0)
}

/// max(√λ₁ − √λ₂ − √λ₃ − √λ₄, 0) for λ sorted descending; negatives count as 0.
pub fn concurrence_from_lambdas(lambdas: &[f64; 4]) -> f64 {
    let s: Vec<f64> = lambdas.iter().map(|l| l.max(0.0).sqrt()).collect();
    (s[0] - s[1] - s[2] - s[3]).max(0.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConcurrenceBreakdown {
    /// Eigenvalues of ρρ̃, descending, non-negative.
    pub lambdas: [f64; 4],
    pub concurrence: f64,
    pub ef: f64,
}

impl ConcurrenceBreakdown {
    /// Applies the concurrence and E_f formulas to a descending λ list.
    pub fn from_lambdas(lambdas: [f64; 4]) -> Self {
        let concurrence = concurrence_from_lambdas(&lambdas).min(1.0);
        let ef = entanglement_of_formation(concurrence).expect("concurrence clamped to [0, 1]");
        Self {
            lambdas,
            concurrence,
            ef,
        }
    }
}

/// Eigenvalues of ρ at or below this are treated as exact zeros by [`concurrence`].
pub const RANK_CUTOFF: f64 = 1e-14;

/// Wootters concurrence. With ρ = WW† (W = V·diag(√μ) over the support of ρ),
/// the square roots of the eigenvalues of ρρ̃ are the singular values of the
/// complex-symmetric τ = WᵀΣW. Going through τ avoids square-rooting rounding
/// noise on rank-deficient states, where √ρ·ρ̃·√ρ loses about 1e-8.
pub fn concurrence(rho: &DensityMatrix) -> Result<ConcurrenceBreakdown> {
    rho.require_two_qubit()?;
    let eig = herm_eigen(rho.matrix())?;
    let support: Vec<usize> = (0..4).filter(|&i| eig.values[i] > RANK_CUTOFF).collect();
    let v = eig.vectors.as_dmatrix();
    let w = DMatrix::from_fn(4, support.len(), |r, c| {
        v[(r, support[c])] * eig.values[support[c]].sqrt()
    });
    let sigma = spin_flip_operator();
    let tau = w.transpose() * sigma.as_dmatrix() * &w;
    let mut sv: Vec<f64> = if support.is_empty() {
        Vec::new()
    } else {
        tau.singular_values().iter().copied().collect()
    };
    sv.sort_by(|a, b| b.total_cmp(a));
    let mut lambdas = [0.0; 4];
    for (slot, s) in lambdas.iter_mut().zip(sv) {
        *slot = s * s;
    }
    Ok(ConcurrenceBreakdown::from_lambdas(lambdas))
}

/// The Hermitian form √ρ·ρ̃·√ρ, which shares its spectrum with ρρ̃.
pub fn concurrence_matrix(rho: &DensityMatrix) -> Result<ComplexMatrix> {
    let tilde = spin_flip(rho)?;
    let root = sqrt_psd(rho.matrix())?;
    Ok((&(&root * &tilde) * &root).hermitian_part())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NegativityReport {
    /// Spectrum of ρ^{T_B}, ascending.
    pub pt_eigenvalues: Vec<f64>,
    pub trace_norm_pt: f64,
    pub negativity: f64,
    /// log₂ ‖ρ^{T_B}‖₁.
    pub ec: f64,
}

impl NegativityReport {
    pub fn from_pt_spectrum(mut pt_eigenvalues: Vec<f64>) -> Self {
        pt_eigenvalues.sort_by(f64::total_cmp);
        let trace_norm_pt: f64 = pt_eigenvalues.iter().map(|l| l.abs()).sum();
        Self {
            negativity: (trace_norm_pt - 1.0) / 2.0,
            ec: trace_norm_pt.log2(),
            trace_norm_pt,
            pt_eigenvalues,
        }
    }
}

pub fn partial_transpose_b(rho: &DensityMatrix) -> ComplexMatrix {
    partial_transpose(rho.matrix(), rho.shape(), Subsystem::B).expect("state shape is consistent")
}

pub fn negativity_report(rho: &DensityMatrix) -> Result<NegativityReport> {
    let spectrum = herm_eigen(&partial_transpose_b(rho))?.values;
    Ok(NegativityReport::from_pt_spectrum(spectrum))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    /// Negative partial transpose: entangled.
    Npt,
    Ppt,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PptResult {
    pub verdict: Verdict,
    pub min_pt_eigenvalue: f64,
}

pub fn ppt_verdict(rho: &DensityMatrix) -> Result<PptResult> {
    let min = herm_eigen(&partial_transpose_b(rho))?.min();
    Ok(PptResult {
        verdict: if min < -PPT_TOL { Verdict::Npt } else { Verdict::Ppt },
        min_pt_eigenvalue: min,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WellensKusReport {
    #[serde(skip)]
    pub gamma: Option<ComplexMatrix>,
    /// Full spectrum of γ as (re, im) pairs, sorted by real part.
    pub spectrum: Vec<[f64; 2]>,
    /// Eigenvalue of smallest real part.
    pub lambda_min: [f64; 2],
    /// |Im λ_min| exceeded [`GAMMA_IMAG_GUARD`].
    pub imaginary_flag: bool,
    /// √(4·Re λ_min / κ), with negative arguments clamped to 0.
    pub concurrence_estimate: f64,
}

/// γ = Σ·ρ^{T_A}·Σ·ρ^{T_B} and the concurrence read off its smallest eigenvalue.
pub fn wellens_kus_gamma(rho: &DensityMatrix) -> Result<WellensKusReport> {
    rho.require_two_qubit()?;
    let sigma = spin_flip_operator();
    let ta = partial_transpose(rho.matrix(), rho.shape(), Subsystem::A)?;
    let tb = partial_transpose_b(rho);
    let gamma = &(&(&sigma * &ta) * &sigma) * &tb;
    let mut eig = general_eigenvalues(&gamma)?;
    eig.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    let lambda_min: C64 = eig[0];
    let concurrence_estimate = (4.0 * lambda_min.re / WELLENS_KUS_KAPPA).max(0.0).sqrt();
    Ok(WellensKusReport {
        gamma: Some(gamma),
        spectrum: eig.iter().map(|z| [z.re, z.im]).collect(),
        lambda_min: [lambda_min.re, lambda_min.im],
        imaginary_flag: lambda_min.im.abs() > GAMMA_IMAG_GUARD,
        concurrence_estimate,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub states: usize,
    pub min_concurrence: f64,
    pub ratio_min: f64,
    pub ratio_max: f64,
    pub ratio_mean: f64,
    pub max_abs_deviation_from_kappa: f64,
    pub max_imaginary_residual: f64,
    /// Ratio constant to 1e-6 across the sweep.
    pub constant: bool,
    /// Counts of |ratio − κ| per decade bucket: <1e-12, <1e-10, <1e-8, <1e-6, ≥1e-6.
    pub deviation_histogram: [usize; 5],
}

/// Sweeps random Hilbert–Schmidt two-qubit states with C > `min_concurrence`
/// and reports the spread of 4·λ_min(γ)/C².
pub fn wellens_kus_calibration(states: usize, min_concurrence: f64, rng: Prng) -> Result<CalibrationReport> {
    let family = StateFamily::RandomMixed { dim_a: 2, dim_b: 2 };
    let mut ratios = Vec::with_capacity(states);
    let mut max_imag = 0.0f64;
    let mut draw = 0u64;
    while ratios.len() < states {
        let rho = make_state(&family, rng.derive(draw))?;
        draw += 1;
        let c = concurrence(&rho)?.concurrence;
        if c <= min_concurrence {
            continue;
        }
        let wk = wellens_kus_gamma(&rho)?;
        max_imag = max_imag.max(wk.lambda_min[1].abs());
        ratios.push(4.0 * wk.lambda_min[0] / (c * c));
    }
    let mut histogram = [0usize; 5];
    let mut max_dev = 0.0f64;
    for r in &ratios {
        let dev = (r - WELLENS_KUS_KAPPA).abs();
        max_dev = max_dev.max(dev);
        let bucket = [1e-12, 1e-10, 1e-8, 1e-6].iter().position(|&b| dev < b).unwrap_or(4);
        histogram[bucket] += 1;
    }
    Ok(CalibrationReport {
        states,
        min_concurrence,
        ratio_min: ratios.iter().copied().fold(f64::INFINITY, f64::min),
        ratio_max: ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        ratio_mean: ratios.iter().sum::<f64>() / ratios.len().max(1) as f64,
        max_abs_deviation_from_kappa: max_dev,
        max_imaginary_residual: max_imag,
        constant: max_dev <= 1e-6,
        deviation_histogram: histogram,
    })
}

/// ⟨ψ|Σ|ψ*⟩ helper kept for tests: Σ acting on the conjugate of a pure state.
#[cfg(test)]
fn spin_flip_vector(psi: &[C64]) -> Vec<C64> {
    let sigma = spin_flip_operator();
    (0..4)
        .map(|i| (0..4).map(|j| sigma.get(i, j) * psi[j].conj()).sum())
        .collect()
}
