use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{herm_eigen, pauli, BipartiteShape, ComplexMatrix};
use crate::measures::{concurrence, ConcurrenceBreakdown};
use crate::prng::Prng;
use crate::states::{DensityMatrix, StateRecord};

use super::{Sampling, ShotRecord};

/// Stream id of the first Pauli pair; pair i uses base + i.
pub const TOMOGRAPHY_STREAM_BASE: u64 = 100;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PauliEstimate {
    /// Indices into (I, X, Y, Z) for qubit A and B.
    pub pair: [usize; 2],
    pub exact: f64,
    pub estimate: f64,
    pub record: Option<ShotRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TomographyRun {
    pub rng: Prng,
    pub sampling: Sampling,
    pub estimates: Vec<PauliEstimate>,
    /// Linear inversion before projection.
    pub linear: StateRecord,
    /// Smallest eigenvalue of the linear inversion; negative values were clamped.
    pub linear_min_eigenvalue: f64,
    pub reconstructed: StateRecord,
    pub breakdown: ConcurrenceBreakdown,
    pub copies_consumed: u64,
}

fn pauli_pairs() -> impl Iterator<Item = [usize; 2]> {
    (0..4).flat_map(|i| (0..4).map(move |j| [i, j])).skip(1)
}

/// Estimates the 15 non-identity Pauli correlators, inverts linearly and
/// projects onto the density matrices by clamping negative eigenvalues.
pub fn run_tomography_baseline(rho: &DensityMatrix, sampling: &Sampling, rng: Prng) -> Result<TomographyRun> {
    rho.require_two_qubit()?;
    let mut estimates = Vec::with_capacity(15);
    let mut linear = ComplexMatrix::identity(4).scale(0.25);
    let mut copies = 0;
    for (idx, pair) in pauli_pairs().enumerate() {
        let op = pauli(pair[0]).tensor(&pauli(pair[1]));
        let exact = (rho.matrix() * &op).trace().re;
        let (estimate, record) = match sampling.shots_for(idx)? {
            None => (exact, None),
            Some(n) => {
                let p_plus = ((1.0 + exact) / 2.0).clamp(0.0, 1.0);
                let binomial = Binomial::new(n, p_plus)
                    .map_err(|e| Error::InvalidParameter(format!("binomial({n}, {p_plus}): {e}")))?;
                let successes = binomial.sample(&mut rng.with_stream(TOMOGRAPHY_STREAM_BASE + idx as u64).rng());
                copies += n;
                let record = ShotRecord {
                    shots: n,
                    successes,
                    target_mean: p_plus,
                };
                (2.0 * successes as f64 / n as f64 - 1.0, Some(record))
            }
        };
        linear = &linear + &op.scale(estimate / 4.0);
        estimates.push(PauliEstimate {
            pair,
            exact,
            estimate,
            record,
        });
    }
    let linear = linear.hermitian_part();
    let eig = herm_eigen(&linear)?;
    let clamped_trace: f64 = eig.values.iter().map(|l| l.max(0.0)).sum();
    let projected = eig
        .reconstruct_with(|l| l.max(0.0) / clamped_trace)
        .hermitian_part();
    let reconstructed = DensityMatrix::new(projected, BipartiteShape::qubits())?;
    Ok(TomographyRun {
        rng,
        sampling: sampling.clone(),
        estimates,
        linear_min_eigenvalue: eig.min(),
        linear: StateRecord::from_matrix(&linear, BipartiteShape::qubits()),
        breakdown: concurrence(&reconstructed)?,
        reconstructed: reconstructed.to_record(),
        copies_consumed: copies,
    })
}
