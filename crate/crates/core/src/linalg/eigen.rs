use nalgebra::{DMatrix, SymmetricEigen};

use super::{c64, ComplexMatrix, C64};
use crate::error::{Error, Result};

/// Max-abs deviation from Hermiticity accepted by the Hermitian routines.
pub const HERMITIAN_TOL: f64 = 1e-9;
/// Eigenvalues above `-PSD_CLAMP` are treated as zero by [`sqrt_psd`].
pub const PSD_CLAMP: f64 = 1e-9;

/// Spectral decomposition of a Hermitian matrix, eigenvalues ascending.
#[derive(Clone, Debug)]
pub struct HermEigen {
    pub values: Vec<f64>,
    /// Column `i` is the eigenvector of `values[i]`.
    pub vectors: ComplexMatrix,
}

impl HermEigen {
    /// U·diag(f(λ))·U†.
    pub fn reconstruct_with(&self, f: impl Fn(f64) -> f64) -> ComplexMatrix {
        let u = self.vectors.as_dmatrix();
        let n = self.values.len();
        let mut scaled = u.clone();
        for (j, &l) in self.values.iter().enumerate() {
            let fl = f(l);
            for i in 0..n {
                scaled[(i, j)] *= fl;
            }
        }
        ComplexMatrix::from_dmatrix_unchecked(scaled * u.adjoint())
    }

    pub fn min(&self) -> f64 {
        self.values[0]
    }

    pub fn max(&self) -> f64 {
        *self.values.last().expect("empty spectrum")
    }
}

/// Eigendecomposition of a Hermitian matrix.
pub fn herm_eigen(m: &ComplexMatrix) -> Result<HermEigen> {
    let n = m.require_square()?;
    let defect = m.hermiticity_defect();
    if defect > HERMITIAN_TOL {
        return Err(Error::NotHermitian(defect));
    }
    let eig = SymmetricEigen::new(m.hermitian_part().into_dmatrix());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    Ok(HermEigen {
        values,
        vectors: ComplexMatrix::from_dmatrix_unchecked(vectors),
    })
}

/// Principal square root of a positive semidefinite Hermitian matrix.
pub fn sqrt_psd(m: &ComplexMatrix) -> Result<ComplexMatrix> {
    let eig = herm_eigen(m)?;
    if eig.min() < -PSD_CLAMP {
        return Err(Error::NegativeSpectrum(eig.min()));
    }
    Ok(eig.reconstruct_with(|l| l.max(0.0).sqrt()).hermitian_part())
}

/// Trace norm Σ|λᵢ| of a Hermitian matrix.
pub fn trace_norm(m: &ComplexMatrix) -> Result<f64> {
    Ok(herm_eigen(m)?.values.iter().map(|l| l.abs()).sum())
}

const MAX_SWEEPS_PER_EIGENVALUE: usize = 60;

/// Eigenvalues of a general complex square matrix, unordered.
///
/// Balancing, Householder reduction to upper Hessenberg form, then
/// single-shift complex QR sweeps with Wilkinson shifts and deflation.
pub fn general_eigenvalues(m: &ComplexMatrix) -> Result<Vec<C64>> {
    let n = m.require_square()?;
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut h: Vec<Vec<C64>> = (0..n).map(|i| (0..n).map(|j| m.get(i, j)).collect()).collect();
    balance(&mut h);
    hessenberg(&mut h);
    hessenberg_qr(h)
}

/// Parlett–Reinsch diagonal similarity scaling by powers of two.
fn balance(a: &mut [Vec<C64>]) {
    let n = a.len();
    let radix = 2.0f64;
    let mut done = false;
    while !done {
        done = true;
        for i in 0..n {
            let mut c = 0.0;
            let mut r = 0.0;
            for j in 0..n {
                if j != i {
                    c += a[j][i].l1_norm();
                    r += a[i][j].l1_norm();
                }
            }
            if c == 0.0 || r == 0.0 {
                continue;
            }
            let s = c + r;
            let mut f = 1.0;
            let mut g = r / radix;
            while c < g {
                f *= radix;
                c *= radix * radix;
            }
            g = r * radix;
            while c > g {
                f /= radix;
                c /= radix * radix;
            }
            if (c + r) / f < 0.95 * s {
                done = false;
                for j in 0..n {
                    a[i][j] /= f;
                }
                for row in a.iter_mut() {
                    row[i] *= f;
                }
            }
        }
    }
}

fn hessenberg(a: &mut [Vec<C64>]) {
    let n = a.len();
    for k in 0..n.saturating_sub(2) {
        let norm: f64 = (k + 1..n).map(|i| a[i][k].norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        let x0 = a[k + 1][k];
        let phase = if x0.norm() == 0.0 { c64(1.0, 0.0) } else { x0 / x0.norm() };
        let alpha = -phase * norm;
        let mut v: Vec<C64> = (k + 1..n).map(|i| a[i][k]).collect();
        v[0] -= alpha;
        let vnorm: f64 = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if vnorm == 0.0 {
            continue;
        }
        for z in v.iter_mut() {
            *z /= vnorm;
        }
        // A ← (I − 2vv†) A
        for j in 0..n {
            let s: C64 = v.iter().enumerate().map(|(t, vt)| vt.conj() * a[k + 1 + t][j]).sum();
            for (t, vt) in v.iter().enumerate() {
                a[k + 1 + t][j] -= *vt * s * 2.0;
            }
        }
        // A ← A (I − 2vv†)
        for row in a.iter_mut() {
            let s: C64 = v.iter().enumerate().map(|(t, vt)| row[k + 1 + t] * vt).sum();
            for (t, vt) in v.iter().enumerate() {
                row[k + 1 + t] -= s * vt.conj() * 2.0;
            }
        }
        for i in k + 2..n {
            a[i][k] = C64::default();
        }
    }
}

/// Rotation (c, s) with c real such that [c s; −s̄ c]·[a; b] = [r; 0].
fn givens(a: C64, b: C64) -> (f64, C64) {
    if b.norm() == 0.0 {
        return (1.0, C64::default());
    }
    if a.norm() == 0.0 {
        return (0.0, b.conj() / b.norm());
    }
    let r = a.norm().hypot(b.norm());
    let c = a.norm() / r;
    let s = (a / a.norm()) * b.conj() / r;
    (c, s)
}

fn wilkinson_shift(a: C64, b: C64, c: C64, d: C64) -> C64 {
    let half = (a - d) * 0.5;
    let disc = (half * half + b * c).sqrt();
    let mid = (a + d) * 0.5;
    let mu1 = mid + disc;
    let mu2 = mid - disc;
    if (mu1 - d).norm() <= (mu2 - d).norm() {
        mu1
    } else {
        mu2
    }
}

fn hessenberg_qr(mut h: Vec<Vec<C64>>) -> Result<Vec<C64>> {
    let n = h.len();
    let scale = h.iter().flatten().fold(0.0f64, |acc, z| acc.max(z.norm()));
    let mut eigs = Vec::with_capacity(n);
    let mut hi = n - 1;
    let mut iter = 0usize;
    let mut total = 0usize;
    let max_total = MAX_SWEEPS_PER_EIGENVALUE * n.max(1);
    loop {
        if hi == 0 {
            eigs.push(h[0][0]);
            break;
        }
        let mut lo = hi;
        while lo > 0 {
            let mut s = h[lo - 1][lo - 1].norm() + h[lo][lo].norm();
            if s == 0.0 {
                s = scale;
            }
            if h[lo][lo - 1].norm() <= f64::EPSILON * s {
                h[lo][lo - 1] = C64::default();
                break;
            }
            lo -= 1;
        }
        if lo == hi {
            eigs.push(h[hi][hi]);
            hi -= 1;
            iter = 0;
            continue;
        }
        iter += 1;
        total += 1;
        if total > max_total {
            return Err(Error::NoConvergence(total));
        }
        let mu = if iter % 11 == 0 {
            // exceptional shift to break cycles
            h[hi][hi] + c64(0.75, 0.25) * h[hi][hi - 1].norm()
        } else {
            wilkinson_shift(h[hi - 1][hi - 1], h[hi - 1][hi], h[hi][hi - 1], h[hi][hi])
        };
        for i in lo..=hi {
            h[i][i] -= mu;
        }
        let mut rotations = Vec::with_capacity(hi - lo);
        for i in lo..hi {
            let (c, s) = givens(h[i][i], h[i + 1][i]);
            for j in i..=hi {
                let x = h[i][j];
                let y = h[i + 1][j];
                h[i][j] = x * c + s * y;
                h[i + 1][j] = -s.conj() * x + y * c;
            }
            rotations.push((c, s));
        }
        for (off, &(c, s)) in rotations.iter().enumerate() {
            let i = lo + off;
            let last = (i + 2).min(hi);
            for row in h.iter_mut().take(last + 1).skip(lo) {
                let x = row[i];
                let y = row[i + 1];
                row[i] = x * c + y * s.conj();
                row[i + 1] = -x * s + y * c;
            }
        }
        for i in lo..=hi {
            h[i][i] += mu;
        }
    }
    Ok(eigs)
}
