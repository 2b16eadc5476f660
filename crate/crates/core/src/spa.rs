//! Structural physical approximation of the partial transpose.
//!
//! Mixing a positive-but-not-CP map with enough white noise makes it a
//! channel. For the partial transpose on d⊗d the mixture is
//! Λ(ρ) = d/(d³+1)·I + ρ^{T_B}/(d³+1); for other shapes the noise weight is
//! found by bisection on the Choi matrix. The group outputs ρ_k used by the
//! four-moment protocol are kept implicit: every query reduces to products of
//! 4×4 matrices.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    cyclic_trace, cyclic_trace_dd, herm_eigen, partial_transpose, permute_subsystems, tensor_all,
    BipartiteShape, ComplexMatrix, Dd, DdMatrix, Subsystem, C64,
};
use crate::measures::{spin_flip, spin_flip_operator};
use crate::states::DensityMatrix;

/// PSD tolerance of the Choi test.
pub const CHOI_TOL: f64 = 1e-10;

/// d_k³+1 for d_k = 4^k, k = 1..4.
pub const GROUP_AMPLIFICATION: [u64; 4] = [65, 4097, 262_145, 16_777_217];

/// Largest k for which [`materialize_group_output`] builds ρ_k.
pub const MAX_MATERIALIZED_GROUP: usize = 2;

/// d³+1.
pub fn amplification(d: u64) -> u64 {
    d.pow(3) + 1
}

/// λ = d/(d³+1) + λ′/(d³+1).
pub fn affine_map(lambda_pt: f64, d: u64) -> f64 {
    let a = amplification(d) as f64;
    (d as f64 + lambda_pt) / a
}

/// λ′ = (d³+1)λ − d.
pub fn inverse_affine(lambda: f64, d: u64) -> f64 {
    amplification(d) as f64 * lambda - d as f64
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TargetMap {
    PartialTransposeB,
    Identity,
}

impl TargetMap {
    fn apply(self, m: &ComplexMatrix, shape: BipartiteShape) -> Result<ComplexMatrix> {
        match self {
            TargetMap::PartialTransposeB => partial_transpose(m, shape, Subsystem::B),
            TargetMap::Identity => Ok(m.clone()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpaChannel {
    pub shape: BipartiteShape,
    /// Weight of the maximally mixed output.
    pub noise_weight: f64,
    /// 1 − noise_weight.
    pub shrink: f64,
    pub target: TargetMap,
}

impl SpaChannel {
    /// SPA of the partial transpose on B. Square shapes use the closed form,
    /// others the Choi threshold.
    pub fn partial_transpose(shape: BipartiteShape) -> Result<Self> {
        let shrink = if shape.is_square() {
            1.0 / amplification(shape.dim_a as u64) as f64
        } else {
            spa_threshold_by_choi(TargetMap::PartialTransposeB, shape, CHOI_TOL)?
        };
        Ok(Self {
            shape,
            noise_weight: 1.0 - shrink,
            shrink,
            target: TargetMap::PartialTransposeB,
        })
    }

    /// shrink·Φ(m) + noise_weight·Tr(m)·I/D, without validating the output.
    pub fn apply_matrix(&self, m: &ComplexMatrix) -> Result<ComplexMatrix> {
        self.shape.check(m)?;
        let total = self.shape.total();
        let noise = ComplexMatrix::identity(total).scale_complex(m.trace() * (self.noise_weight / total as f64));
        Ok(&self.target.apply(m, self.shape)?.scale(self.shrink) + &noise)
    }

    pub fn apply(&self, rho: &DensityMatrix) -> Result<DensityMatrix> {
        if rho.shape() != self.shape {
            return Err(Error::DimensionMismatch {
                expected: self.shape.total(),
                actual: rho.dim(),
            });
        }
        DensityMatrix::new(self.apply_matrix(rho.matrix())?, self.shape)
    }
}

/// Λ(ρ) = d/(d³+1)·I + ρ^{T_B}/(d³+1) on a d⊗d state.
pub fn apply_spa_pt(rho: &DensityMatrix) -> Result<DensityMatrix> {
    let shape = rho.shape();
    if !shape.is_square() {
        return Err(Error::NonSquareShape(shape.dim_a, shape.dim_b));
    }
    let d = shape.dim_a as u64;
    let a = amplification(d) as f64;
    let pt = partial_transpose(rho.matrix(), shape, Subsystem::B)?;
    let out = &ComplexMatrix::identity(shape.total()).scale(d as f64 / a) + &pt.scale(1.0 / a);
    DensityMatrix::new(out, shape)
}

/// Choi matrix Σ_{ab} |a⟩⟨b| ⊗ Φ(|a⟩⟨b|) of p·Φ + (1−p)·Tr(·)I/D.
fn mixed_choi(target: TargetMap, shape: BipartiteShape, p: f64) -> Result<ComplexMatrix> {
    let n = shape.total();
    let mut choi = ComplexMatrix::zeros(n * n).into_dmatrix();
    let unit = C64::new(1.0, 0.0);
    for a in 0..n {
        for b in 0..n {
            let e = ComplexMatrix::from_fn(n, n, |i, j| if i == a && j == b { unit } else { C64::default() });
            let mut out = target.apply(&e, shape)?.scale(p);
            if a == b {
                out = &out + &ComplexMatrix::identity(n).scale((1.0 - p) / n as f64);
            }
            for i in 0..n {
                for j in 0..n {
                    choi[(a * n + i, b * n + j)] = out.get(i, j);
                }
            }
        }
    }
    ComplexMatrix::try_from_dmatrix(choi)
}

/// Largest mixing weight p for which p·Φ + (1−p)·(white noise) has a Choi
/// matrix with minimum eigenvalue ≥ −tol. Returns 1 if Φ is already CP.
pub fn spa_threshold_by_choi(target: TargetMap, shape: BipartiteShape, tol: f64) -> Result<f64> {
    let feasible = |p: f64| -> Result<bool> {
        Ok(herm_eigen(&mixed_choi(target, shape, p)?)?.min() >= -tol)
    };
    if feasible(1.0)? {
        return Ok(1.0);
    }
    if !feasible(0.0)? {
        return Err(Error::BracketFailure);
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    while hi - lo > 1e-13 {
        let mid = 0.5 * (lo + hi);
        if feasible(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupChannelSpec {
    pub k: usize,
    /// 4^k, the local dimension the group's SPA acts on.
    pub d_k: u64,
    /// 2k copies; odd copies form X, even copies form Y.
    pub copies: usize,
}

impl GroupChannelSpec {
    pub fn new(k: usize) -> Result<Self> {
        if !(1..=4).contains(&k) {
            return Err(Error::InvalidParameter(format!("group index {k} outside 1..=4")));
        }
        Ok(Self {
            k,
            d_k: 4u64.pow(k as u32),
            copies: 2 * k,
        })
    }

    /// d_k³+1.
    pub fn amplification(&self) -> u64 {
        amplification(self.d_k)
    }
}

/// ρ_k = d_k/(d_k³+1)·I + (ρ⊗ρ̃)^{⊗k}/(d_k³+1), stored as (ρ, ρ̃, k).
#[derive(Clone, Debug)]
pub struct GroupOutput {
    pub spec: GroupChannelSpec,
    rho: ComplexMatrix,
    rho_tilde: ComplexMatrix,
}

pub fn group_channel_output(rho: &DensityMatrix, k: usize) -> Result<GroupOutput> {
    let spec = GroupChannelSpec::new(k)?;
    Ok(GroupOutput {
        spec,
        rho_tilde: spin_flip(rho)?,
        rho: rho.matrix().clone(),
    })
}

impl GroupOutput {
    fn alternating(&self) -> Vec<ComplexMatrix> {
        (0..self.spec.copies)
            .map(|i| if i % 2 == 0 { self.rho.clone() } else { self.rho_tilde.clone() })
            .collect()
    }

    pub fn rho(&self) -> &ComplexMatrix {
        &self.rho
    }

    pub fn rho_tilde(&self) -> &ComplexMatrix {
        &self.rho_tilde
    }

    /// Tr ρ_k from its two terms.
    pub fn trace(&self) -> f64 {
        let d = self.spec.d_k as f64;
        let a = self.spec.amplification() as f64;
        let product = (self.rho.trace() * self.rho_tilde.trace()).powu(self.spec.k as u32);
        d * d * d / a + product.re / a
    }

    /// p_k = Tr((ρρ̃)^k) as the cyclic trace of 2k alternating factors.
    pub fn power_sum(&self) -> Result<C64> {
        cyclic_trace(&self.alternating())
    }

    /// Tr(V₍₂ₖ₎ρ_k) = (d_k·Tr V + p_k)/(d_k³+1), with Tr V = 4 from the cyclic
    /// trace of identities.
    pub fn shift_trace(&self) -> Result<C64> {
        let identities = vec![ComplexMatrix::identity(4); self.spec.copies];
        let trace_v = cyclic_trace(&identities)?;
        let a = self.spec.amplification() as f64;
        Ok((trace_v * self.spec.d_k as f64 + self.power_sum()?) / a)
    }

    /// p_k in double-double.
    pub fn power_sum_dd(&self) -> Result<Dd> {
        let rho = DdMatrix::from_matrix(&self.rho)?;
        let tilde = DdMatrix::from_matrix(&self.rho_tilde)?;
        let factors: Vec<DdMatrix> = (0..self.spec.copies)
            .map(|i| if i % 2 == 0 { rho.clone() } else { tilde.clone() })
            .collect();
        Ok(cyclic_trace_dd(&factors)?.re)
    }

    /// Re Tr(V₍₂ₖ₎ρ_k) in double-double. The amplification d_k³+1 reaches
    /// 1.7e7 at k = 4, so undoing it in f64 would cost about seven digits.
    pub fn shift_trace_dd(&self) -> Result<Dd> {
        let identities = vec![DdMatrix::identity(4); self.spec.copies];
        let trace_v = cyclic_trace_dd(&identities)?.re;
        let d = Dd::from_f64(self.spec.d_k as f64);
        let a = Dd::from_f64(self.spec.amplification() as f64);
        Ok((trace_v * d + self.power_sum_dd()?) / a)
    }
}

/// Builds ρ_k explicitly for k ≤ 2 by applying the SPA to ρ^{⊗2k} split as
/// X|Y, then Σ on every Y copy, then restoring the interleaved copy order.
pub fn materialize_group_output(rho: &DensityMatrix, k: usize) -> Result<ComplexMatrix> {
    let spec = GroupChannelSpec::new(k)?;
    rho.shape().is_two_qubit().then_some(()).ok_or(Error::NotTwoQubit(rho.shape().dim_a, rho.shape().dim_b))?;
    if k > MAX_MATERIALIZED_GROUP {
        return Err(Error::MaterializationCap {
            dim: (spec.d_k * spec.d_k) as usize,
            cap: 4usize.pow(2 * MAX_MATERIALIZED_GROUP as u32),
        });
    }
    let n = spec.copies;
    let copies: Vec<&ComplexMatrix> = vec![rho.matrix(); n];
    let joint = tensor_all(&copies);
    let to_xy: Vec<usize> = (0..n).step_by(2).chain((1..n).step_by(2)).collect();
    let grouped = permute_subsystems(&joint, 4, &to_xy)?;

    let d = spec.d_k as usize;
    let channel = SpaChannel {
        shape: BipartiteShape::new(d, d)?,
        noise_weight: 1.0 - 1.0 / spec.amplification() as f64,
        shrink: 1.0 / spec.amplification() as f64,
        target: TargetMap::PartialTransposeB,
    };
    let out = channel.apply_matrix(&grouped)?;

    let sigma = spin_flip_operator();
    let mut factors = vec![ComplexMatrix::identity(4); k];
    factors.extend(std::iter::repeat_n(sigma, k));
    let refs: Vec<&ComplexMatrix> = factors.iter().collect();
    let u = tensor_all(&refs);
    let flipped = &(&u * &out) * &u.adjoint();

    let mut back = vec![0; n];
    for (t, &src) in to_xy.iter().enumerate() {
        back[src] = t;
    }
    permute_subsystems(&flipped, 4, &back)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::ShiftOperator;
    use crate::linalg::DEFAULT_MATERIALIZATION_CAP;
    use crate::prng::Prng;
    use crate::states::{make_state, StateFamily};

    fn state(f: StateFamily, seed: u64) -> DensityMatrix {
        make_state(&f, Prng::new(seed, 11)).unwrap()
    }

    fn random_qubits(seed: u64) -> DensityMatrix {
        state(StateFamily::RandomMixed { dim_a: 2, dim_b: 2 }, seed)
    }

    #[test]
    fn amplification_constants() {
        for (k, &a) in GROUP_AMPLIFICATION.iter().enumerate() {
            let spec = GroupChannelSpec::new(k + 1).unwrap();
            assert_eq!(spec.d_k, 4u64.pow(k as u32 + 1));
            assert_eq!(spec.copies, 2 * (k + 1));
            assert_eq!(spec.amplification(), a);
        }
        assert!(GroupChannelSpec::new(0).is_err());
        assert!(GroupChannelSpec::new(5).is_err());
    }

    #[test]
    fn maximally_mixed_is_fixed() {
        let rho = DensityMatrix::maximally_mixed(BipartiteShape::qubits());
        let out = apply_spa_pt(&rho).unwrap();
        assert!(out.matrix().max_abs_diff(rho.matrix()) < 1e-15);
    }

    #[test]
    fn bell_output_spectrum() {
        let out = apply_spa_pt(&state(StateFamily::Bell, 0)).unwrap();
        let ev = herm_eigen(out.matrix()).unwrap().values;
        let want = [1.0 / 6.0, 5.0 / 18.0, 5.0 / 18.0, 5.0 / 18.0];
        for (x, w) in ev.iter().zip(want) {
            assert!((x - w).abs() < 1e-14);
        }
        assert!((affine_map(-0.5, 2) - 1.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn affine_examples() {
        assert!((affine_map(0.0, 4) - 4.0 / 65.0).abs() < 1e-16);
        for d in 2..=5u64 {
            for i in -20..=20 {
                let l = i as f64 / 20.0;
                assert!((inverse_affine(affine_map(l, d), d) - l).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn spectrum_is_affine_image_of_pt_spectrum() {
        for seed in 0..100 {
            let dims = if seed % 2 == 0 { 2 } else { 3 };
            let rho = state(StateFamily::RandomMixed { dim_a: dims, dim_b: dims }, seed);
            let pt = partial_transpose(rho.matrix(), rho.shape(), Subsystem::B).unwrap();
            let pt_ev = herm_eigen(&pt).unwrap().values;
            let out_ev = herm_eigen(apply_spa_pt(&rho).unwrap().matrix()).unwrap().values;
            for (o, p) in out_ev.iter().zip(&pt_ev) {
                assert!((o - affine_map(*p, dims as u64)).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn output_is_a_state() {
        for seed in 0..500 {
            let out = apply_spa_pt(&random_qubits(seed)).unwrap();
            assert!((out.matrix().trace().re - 1.0).abs() < 1e-12);
            assert!(herm_eigen(out.matrix()).unwrap().min() >= -1e-10);
        }
    }

    #[test]
    fn rejects_non_square() {
        let rho = state(StateFamily::RandomMixed { dim_a: 2, dim_b: 3 }, 1);
        assert!(matches!(apply_spa_pt(&rho), Err(Error::NonSquareShape(2, 3))));
    }

    #[test]
    fn choi_thresholds() {
        let q = BipartiteShape::qubits();
        let p2 = spa_threshold_by_choi(TargetMap::PartialTransposeB, q, CHOI_TOL).unwrap();
        assert!((p2 - 1.0 / 9.0).abs() < 1e-6, "{p2}");
        let q3 = BipartiteShape::new(3, 3).unwrap();
        let p3 = spa_threshold_by_choi(TargetMap::PartialTransposeB, q3, CHOI_TOL).unwrap();
        assert!((p3 - 1.0 / 28.0).abs() < 1e-6, "{p3}");
        assert_eq!(spa_threshold_by_choi(TargetMap::Identity, q, CHOI_TOL).unwrap(), 1.0);
    }

    #[test]
    fn non_square_channel_is_cp_and_trace_preserving() {
        let shape = BipartiteShape::new(2, 3).unwrap();
        let ch = SpaChannel::partial_transpose(shape).unwrap();
        // the Choi minimum of the partial transpose is −d_A, giving 1/(d_A·D+1)
        assert!((ch.shrink - 1.0 / 13.0).abs() < 1e-9, "{}", ch.shrink);
        for seed in 0..20 {
            let rho = state(StateFamily::RandomMixed { dim_a: 2, dim_b: 3 }, seed);
            let out = ch.apply(&rho).unwrap();
            assert!((out.matrix().trace().re - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn square_channel_matches_closed_form() {
        let ch = SpaChannel::partial_transpose(BipartiteShape::qubits()).unwrap();
        assert_eq!(ch.shrink, 1.0 / 9.0);
        let rho = random_qubits(3);
        let a = ch.apply(&rho).unwrap();
        let b = apply_spa_pt(&rho).unwrap();
        assert!(a.matrix().max_abs_diff(b.matrix()) < 1e-15);
    }

    #[test]
    fn bell_group_one_shift_trace() {
        let out = group_channel_output(&state(StateFamily::Bell, 0), 1).unwrap();
        assert!((out.shift_trace().unwrap().re - 17.0 / 65.0).abs() < 1e-15);
        assert!((out.trace() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn double_double_shift_trace_agrees() {
        for seed in 0..20 {
            let rho = random_qubits(seed);
            for k in 1..=4 {
                let out = group_channel_output(&rho, k).unwrap();
                let a = out.shift_trace().unwrap().re;
                let b = out.shift_trace_dd().unwrap().to_f64();
                assert!((a - b).abs() <= 1e-15 * b.abs());
            }
        }
    }

    #[test]
    fn implicit_trace_is_one_for_all_k() {
        for seed in 0..20 {
            let rho = random_qubits(seed);
            for k in 1..=4 {
                assert!((group_channel_output(&rho, k).unwrap().trace() - 1.0).abs() < 1e-12);
            }
        }
    }

    fn materialized_shift_trace(rho: &DensityMatrix, k: usize) -> C64 {
        let m = materialize_group_output(rho, k).unwrap();
        let v = ShiftOperator::new(2 * k, 4, DEFAULT_MATERIALIZATION_CAP).unwrap();
        assert!(v.is_explicit());
        v.trace_with(&m).unwrap()
    }

    #[test]
    fn materialized_k1_matches_implicit() {
        let rho = state(StateFamily::Bell, 0);
        assert!((materialized_shift_trace(&rho, 1).re - 17.0 / 65.0).abs() < 1e-12);
        for seed in 0..20 {
            let rho = random_qubits(seed);
            let m = materialize_group_output(&rho, 1).unwrap();
            assert!((m.trace().re - 1.0).abs() < 1e-12);
            // the materialized operator equals the closed form built from ρ and ρ̃
            let tilde = spin_flip(&rho).unwrap();
            let closed = &ComplexMatrix::identity(16).scale(4.0 / 65.0)
                + &rho.matrix().tensor(&tilde).scale(1.0 / 65.0);
            assert!(m.max_abs_diff(&closed) < 1e-14);
            let implicit = group_channel_output(&rho, 1).unwrap().shift_trace().unwrap();
            assert!((materialized_shift_trace(&rho, 1) - implicit).norm() < 1e-12);
        }
    }

    #[test]
    fn materialized_k2_matches_implicit() {
        for seed in 0..3 {
            let rho = random_qubits(seed);
            let implicit = group_channel_output(&rho, 2).unwrap().shift_trace().unwrap();
            assert!((materialized_shift_trace(&rho, 2) - implicit).norm() < 1e-10);
        }
    }

    #[test]
    fn materialization_is_capped() {
        let rho = random_qubits(0);
        assert!(matches!(materialize_group_output(&rho, 3), Err(Error::MaterializationCap { .. })));
    }
}
