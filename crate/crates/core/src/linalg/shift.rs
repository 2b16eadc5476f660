//! Cyclic shift operators on n tensor factors.
//!
//! The shift V₍ₙ₎ permutes basis states |i₁ i₂ … iₙ⟩ ↦ |i₂ … iₙ i₁⟩. With that
//! orientation Tr(V₍ₙ₎·A₁⊗…⊗Aₙ) = Tr(A₁A₂…Aₙ), so any expectation of a shift
//! operator on a product operator collapses to an ordinary matrix product of
//! the factors. [`cyclic_trace`] is that fast path; [`explicit_shift`] builds
//! the permutation matrix for oracle checks on small spaces.

use super::{c64, tensor_all, ComplexMatrix, C64};
use crate::error::{Error, Result};

/// Largest dimension for which an explicit shift operator is built.
pub const DEFAULT_MATERIALIZATION_CAP: usize = 4096;

/// Tr(A₁A₂…Aₙ).
pub fn cyclic_trace(factors: &[ComplexMatrix]) -> Result<C64> {
    let first = factors
        .first()
        .ok_or_else(|| Error::InvalidParameter("cyclic trace of zero factors".into()))?;
    let d = first.require_square()?;
    for f in factors {
        let fd = f.require_square()?;
        if fd != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                actual: fd,
            });
        }
    }
    let product = factors[1..].iter().fold(first.clone(), |acc, f| &acc * f);
    Ok(product.trace())
}

/// Permutation matrix of the cyclic shift on `n` factors of dimension `local_dim`.
pub fn explicit_shift(n: usize, local_dim: usize, cap: usize) -> Result<ComplexMatrix> {
    if n == 0 || local_dim == 0 {
        return Err(Error::InvalidParameter("shift needs n >= 1 and local_dim >= 1".into()));
    }
    let dim = (local_dim as u128)
        .checked_pow(n as u32)
        .filter(|&d| d <= cap as u128)
        .ok_or(Error::MaterializationCap {
            dim: local_dim.saturating_pow(n as u32),
            cap,
        })? as usize;
    let top = dim / local_dim;
    // |j₁ j₂ … jₙ⟩ ↦ |j₂ … jₙ j₁⟩: drop the leading digit, append it at the end
    let target = |j: usize| (j % top) * local_dim + j / top;
    let mut v = ComplexMatrix::zeros(dim).into_dmatrix();
    for j in 0..dim {
        v[(target(j), j)] = c64(1.0, 0.0);
    }
    Ok(ComplexMatrix::from_dmatrix_unchecked(v))
}

/// V₍ₙ₎ either as an explicit matrix or as a tag evaluated through [`cyclic_trace`].
#[derive(Clone, Debug)]
pub enum ShiftOperator {
    Explicit {
        n: usize,
        local_dim: usize,
        matrix: ComplexMatrix,
    },
    Implicit {
        n: usize,
        local_dim: usize,
    },
}

impl ShiftOperator {
    /// Materializes when `local_dim^n <= cap`, otherwise stays implicit.
    pub fn new(n: usize, local_dim: usize, cap: usize) -> Result<Self> {
        match explicit_shift(n, local_dim, cap) {
            Ok(matrix) => Ok(Self::Explicit {
                n,
                local_dim,
                matrix,
            }),
            Err(Error::MaterializationCap { .. }) => Ok(Self::Implicit { n, local_dim }),
            Err(e) => Err(e),
        }
    }

    pub fn implicit(n: usize, local_dim: usize) -> Self {
        Self::Implicit { n, local_dim }
    }

    pub fn copies(&self) -> usize {
        match self {
            Self::Explicit { n, .. } | Self::Implicit { n, .. } => *n,
        }
    }

    pub fn local_dim(&self) -> usize {
        match self {
            Self::Explicit { local_dim, .. } | Self::Implicit { local_dim, .. } => *local_dim,
        }
    }

    pub fn is_explicit(&self) -> bool {
        matches!(self, Self::Explicit { .. })
    }

    /// Tr(V·A₁⊗…⊗Aₙ). The explicit form contracts against the materialized
    /// product operator; the implicit form uses the cyclic trace.
    pub fn trace_with_product(&self, factors: &[ComplexMatrix]) -> Result<C64> {
        if factors.len() != self.copies() {
            return Err(Error::DimensionMismatch {
                expected: self.copies(),
                actual: factors.len(),
            });
        }
        match self {
            Self::Implicit { local_dim, .. } => {
                if let Some(f) = factors.iter().find(|f| f.rows() != *local_dim) {
                    return Err(Error::DimensionMismatch {
                        expected: *local_dim,
                        actual: f.rows(),
                    });
                }
                cyclic_trace(factors)
            }
            Self::Explicit { matrix, .. } => {
                let refs: Vec<&ComplexMatrix> = factors.iter().collect();
                let product = tensor_all(&refs);
                if product.rows() != matrix.rows() {
                    return Err(Error::DimensionMismatch {
                        expected: matrix.rows(),
                        actual: product.rows(),
                    });
                }
                Ok((matrix * &product).trace())
            }
        }
    }

    /// Tr(V·M) for an explicit shift and an arbitrary operator M on the full space.
    pub fn trace_with(&self, m: &ComplexMatrix) -> Result<C64> {
        match self {
            Self::Explicit { matrix, .. } => {
                if m.rows() != matrix.rows() {
                    return Err(Error::DimensionMismatch {
                        expected: matrix.rows(),
                        actual: m.rows(),
                    });
                }
                Ok((matrix * m).trace())
            }
            Self::Implicit { local_dim, n } => Err(Error::MaterializationCap {
                dim: local_dim.saturating_pow(*n as u32),
                cap: 0,
            }),
        }
    }
}
