//! Dense complex linear algebra used throughout the crate.
//!
//! [`ComplexMatrix`] is a thin newtype over a `nalgebra` dense matrix. On top
//! of it this module provides Kronecker products, partial transposition on a
//! bipartite split, Hermitian and general eigenvalue routines, and the cyclic
//! shift-operator trace machinery in [`shift`].

mod dd;
mod eigen;
pub mod shift;

use std::ops::{Add, Mul, Sub};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use dd::{cyclic_trace_dd, power_sums_dd, CDd, Dd, DdMatrix};
pub use eigen::{
    general_eigenvalues, herm_eigen, sqrt_psd, trace_norm, HermEigen, HERMITIAN_TOL, PSD_CLAMP,
};
pub use shift::{cyclic_trace, explicit_shift, ShiftOperator, DEFAULT_MATERIALIZATION_CAP};

pub type C64 = Complex64;

#[inline]
pub fn c64(re: f64, im: f64) -> C64 {
    Complex64::new(re, im)
}

/// Square (or rectangular, where stated) complex matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexMatrix(DMatrix<C64>);

impl ComplexMatrix {
    /// Wraps a nalgebra matrix, rejecting NaN/Inf entries.
    pub fn try_from_dmatrix(m: DMatrix<C64>) -> Result<Self> {
        for j in 0..m.ncols() {
            for i in 0..m.nrows() {
                let z = m[(i, j)];
                if !z.re.is_finite() || !z.im.is_finite() {
                    return Err(Error::NonFinite(i, j));
                }
            }
        }
        Ok(Self(m))
    }

    pub(crate) fn from_dmatrix_unchecked(m: DMatrix<C64>) -> Self {
        Self(m)
    }

    /// Builds a matrix from row-major entries.
    pub fn from_row_slice(rows: usize, cols: usize, entries: &[C64]) -> Result<Self> {
        if entries.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                actual: entries.len(),
            });
        }
        Self::try_from_dmatrix(DMatrix::from_row_slice(rows, cols, entries))
    }

    /// Builds a real matrix from row-major entries.
    pub fn from_real_rows(rows: &[&[f64]]) -> Result<Self> {
        let n = rows.len();
        let m = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != m) {
            return Err(Error::MalformedRecord("ragged rows".into()));
        }
        let entries: Vec<C64> = rows.iter().flat_map(|r| r.iter().map(|&x| c64(x, 0.0))).collect();
        Self::from_row_slice(n, m, &entries)
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl FnMut(usize, usize) -> C64) -> Self {
        Self(DMatrix::from_fn(rows, cols, f))
    }

    pub fn zeros(n: usize) -> Self {
        Self(DMatrix::zeros(n, n))
    }

    pub fn identity(n: usize) -> Self {
        Self(DMatrix::identity(n, n))
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        Self::from_fn(n, n, |i, j| if i == j { c64(diag[i], 0.0) } else { C64::default() })
    }

    /// Rank-one projector |v⟩⟨v| (no normalization applied).
    pub fn projector(v: &[C64]) -> Self {
        let n = v.len();
        Self::from_fn(n, n, |i, j| v[i] * v[j].conj())
    }

    pub fn rows(&self) -> usize {
        self.0.nrows()
    }

    pub fn cols(&self) -> usize {
        self.0.ncols()
    }

    /// Dimension of a square matrix (row count).
    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn is_square(&self) -> bool {
        self.0.nrows() == self.0.ncols()
    }

    pub(crate) fn require_square(&self) -> Result<usize> {
        if self.is_square() {
            Ok(self.dim())
        } else {
            Err(Error::NotSquare(self.rows(), self.cols()))
        }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.0[(i, j)]
    }

    pub fn as_dmatrix(&self) -> &DMatrix<C64> {
        &self.0
    }

    pub fn into_dmatrix(self) -> DMatrix<C64> {
        self.0
    }

    pub fn adjoint(&self) -> Self {
        Self(self.0.adjoint())
    }

    pub fn conj(&self) -> Self {
        Self(self.0.map(|z| z.conj()))
    }

    pub fn transpose(&self) -> Self {
        Self(self.0.transpose())
    }

    pub fn trace(&self) -> C64 {
        self.0.trace()
    }

    pub fn scale(&self, s: f64) -> Self {
        Self(self.0.map(|z| z * s))
    }

    pub fn scale_complex(&self, s: C64) -> Self {
        Self(self.0.map(|z| z * s))
    }

    /// Largest entry modulus.
    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0, |acc, z| acc.max(z.norm()))
    }

    /// max |m − m†| over entries.
    pub fn hermiticity_defect(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let n = self.dim();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in i..n {
                worst = worst.max((self.get(i, j) - self.get(j, i).conj()).norm());
            }
        }
        worst
    }

    /// (m + m†)/2.
    pub fn hermitian_part(&self) -> Self {
        Self((&self.0 + self.0.adjoint()).map(|z| z * 0.5))
    }

    /// Kronecker product, first factor carries the slow index.
    pub fn tensor(&self, other: &ComplexMatrix) -> ComplexMatrix {
        Self(self.0.kronecker(&other.0))
    }

    /// Hilbert–Schmidt inner product Tr(self† · other).
    pub fn hs_inner(&self, other: &ComplexMatrix) -> C64 {
        self.0.iter().zip(other.0.iter()).map(|(a, b)| a.conj() * b).sum()
    }

    /// Maximum entrywise distance to another matrix of the same shape.
    pub fn max_abs_diff(&self, other: &ComplexMatrix) -> f64 {
        self.0
            .iter()
            .zip(other.0.iter())
            .fold(0.0, |acc, (a, b)| acc.max((a - b).norm()))
    }

    /// Row-major real and imaginary grids.
    pub fn to_grids(&self) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let re = (0..self.rows())
            .map(|i| (0..self.cols()).map(|j| self.get(i, j).re).collect())
            .collect();
        let im = (0..self.rows())
            .map(|i| (0..self.cols()).map(|j| self.get(i, j).im).collect())
            .collect();
        (re, im)
    }
}

/// Kronecker product of two matrices.
pub fn tensor(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    a.tensor(b)
}

/// Kronecker product of a non-empty list of factors, left to right.
pub fn tensor_all(factors: &[&ComplexMatrix]) -> ComplexMatrix {
    let mut it = factors.iter();
    let first = (*it.next().expect("tensor_all needs at least one factor")).clone();
    it.fold(first, |acc, f| acc.tensor(f))
}

impl<'a> Mul<&'a ComplexMatrix> for &'a ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: &'a ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix(&self.0 * &rhs.0)
    }
}

impl Mul for ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix(self.0 * rhs.0)
    }
}

impl<'a> Add<&'a ComplexMatrix> for &'a ComplexMatrix {
    type Output = ComplexMatrix;
    fn add(self, rhs: &'a ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix(&self.0 + &rhs.0)
    }
}

impl<'a> Sub<&'a ComplexMatrix> for &'a ComplexMatrix {
    type Output = ComplexMatrix;
    fn sub(self, rhs: &'a ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix(&self.0 - &rhs.0)
    }
}

/// Local dimensions of a bipartite system A⊗B.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BipartiteShape {
    pub dim_a: usize,
    pub dim_b: usize,
}

impl BipartiteShape {
    pub fn new(dim_a: usize, dim_b: usize) -> Result<Self> {
        if dim_a < 2 || dim_b < 2 {
            return Err(Error::InvalidShape(dim_a, dim_b));
        }
        Ok(Self { dim_a, dim_b })
    }

    pub const fn qubits() -> Self {
        Self { dim_a: 2, dim_b: 2 }
    }

    pub fn total(&self) -> usize {
        self.dim_a * self.dim_b
    }

    pub fn is_square(&self) -> bool {
        self.dim_a == self.dim_b
    }

    pub fn is_two_qubit(&self) -> bool {
        self.dim_a == 2 && self.dim_b == 2
    }

    pub(crate) fn check(&self, m: &ComplexMatrix) -> Result<()> {
        let n = m.require_square()?;
        if n != self.total() {
            return Err(Error::DimensionMismatch {
                expected: self.total(),
                actual: n,
            });
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Subsystem {
    A,
    B,
}

/// Transposes the indices of one subsystem.
///
/// For `Subsystem::B`: ⟨i,j|out|k,l⟩ = ⟨i,l|m|k,j⟩.
pub fn partial_transpose(
    m: &ComplexMatrix,
    shape: BipartiteShape,
    subsystem: Subsystem,
) -> Result<ComplexMatrix> {
    shape.check(m)?;
    let db = shape.dim_b;
    let split = |r: usize| (r / db, r % db);
    let out = ComplexMatrix::from_fn(m.rows(), m.cols(), |r, c| {
        let (i, j) = split(r);
        let (k, l) = split(c);
        match subsystem {
            Subsystem::B => m.get(i * db + l, k * db + j),
            Subsystem::A => m.get(k * db + j, i * db + l),
        }
    });
    Ok(out)
}

/// Reorders the tensor factors of an operator on `(local_dim)^n`.
///
/// Output factor `t` is input factor `perm[t]`.
pub fn permute_subsystems(
    m: &ComplexMatrix,
    local_dim: usize,
    perm: &[usize],
) -> Result<ComplexMatrix> {
    let n = perm.len();
    let dim = local_dim.pow(n as u32);
    if m.rows() != dim || m.cols() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            actual: m.rows(),
        });
    }
    let mut seen = vec![false; n];
    for &p in perm {
        if p >= n || seen[p] {
            return Err(Error::InvalidParameter(format!("not a permutation: {perm:?}")));
        }
        seen[p] = true;
    }
    // map output basis index -> input basis index
    let source: Vec<usize> = (0..dim)
        .map(|out| {
            let mut digits = vec![0usize; n];
            let mut x = out;
            for t in (0..n).rev() {
                digits[t] = x % local_dim;
                x /= local_dim;
            }
            let mut input_digits = vec![0usize; n];
            for t in 0..n {
                input_digits[perm[t]] = digits[t];
            }
            input_digits.iter().fold(0, |acc, &d| acc * local_dim + d)
        })
        .collect();
    Ok(ComplexMatrix::from_fn(dim, dim, |r, c| m.get(source[r], source[c])))
}

/// Pauli matrices σ₀ = I, σ_x, σ_y, σ_z.
pub fn pauli(index: usize) -> ComplexMatrix {
    let o = C64::default();
    let one = c64(1.0, 0.0);
    let i = c64(0.0, 1.0);
    let entries = match index {
        0 => [one, o, o, one],
        1 => [o, one, one, o],
        2 => [o, -i, i, o],
        3 => [one, o, o, -one],
        _ => panic!("pauli index must be 0..=3"),
    };
    ComplexMatrix::from_dmatrix_unchecked(DMatrix::from_row_slice(2, 2, &entries))
}
