//! Double-double arithmetic (an unevaluated sum hi + lo of two f64, ~106 bits).
//!
//! Used where power sums of a tightly clustered spectrum have to be turned
//! back into eigenvalues: the map from moments to roots amplifies rounding
//! far beyond what plain f64 can absorb.

use std::cmp::Ordering;
use std::ops::{Add, Div, Mul, Neg, Sub};

use super::{ComplexMatrix, C64};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Dd {
    pub hi: f64,
    pub lo: f64,
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let e = (a - (s - bb)) + (b - bb);
    (s, e)
}

#[inline]
fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

impl Dd {
    pub const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };
    pub const ONE: Dd = Dd { hi: 1.0, lo: 0.0 };

    pub const fn from_f64(x: f64) -> Self {
        Dd { hi: x, lo: 0.0 }
    }

    pub fn from_usize(n: usize) -> Self {
        let hi = n as f64;
        let lo = (n as i128 - hi as i128) as f64;
        let (hi, lo) = quick_two_sum(hi, lo);
        Dd { hi, lo }
    }

    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    pub fn abs(self) -> Self {
        if self.hi < 0.0 {
            -self
        } else {
            self
        }
    }

    pub fn recip(self) -> Self {
        Dd::ONE / self
    }

    pub fn sqrt(self) -> Self {
        if self.hi <= 0.0 {
            return Dd::ZERO;
        }
        let x = self.hi.sqrt();
        let x = Dd::from_f64(x);
        // one Newton step: x + (a − x²)/(2x)
        x + (self - x * x) / (x * Dd::from_f64(2.0))
    }

    pub fn powi(self, n: u32) -> Self {
        let mut acc = Dd::ONE;
        let mut base = self;
        let mut e = n;
        while e > 0 {
            if e & 1 == 1 {
                acc = acc * base;
            }
            base = base * base;
            e >>= 1;
        }
        acc
    }

    pub fn is_finite(self) -> bool {
        self.hi.is_finite() && self.lo.is_finite()
    }
}

impl From<f64> for Dd {
    fn from(x: f64) -> Self {
        Dd::from_f64(x)
    }
}

impl Add for Dd {
    type Output = Dd;
    #[inline]
    fn add(self, b: Dd) -> Dd {
        let (s1, s2) = two_sum(self.hi, b.hi);
        let (t1, t2) = two_sum(self.lo, b.lo);
        let s2 = s2 + t1;
        let (s1, s2) = quick_two_sum(s1, s2);
        let s2 = s2 + t2;
        let (hi, lo) = quick_two_sum(s1, s2);
        Dd { hi, lo }
    }
}

impl Neg for Dd {
    type Output = Dd;
    #[inline]
    fn neg(self) -> Dd {
        Dd {
            hi: -self.hi,
            lo: -self.lo,
        }
    }
}

impl Sub for Dd {
    type Output = Dd;
    #[inline]
    fn sub(self, b: Dd) -> Dd {
        self + (-b)
    }
}

impl Mul for Dd {
    type Output = Dd;
    #[inline]
    fn mul(self, b: Dd) -> Dd {
        let (p1, p2) = two_prod(self.hi, b.hi);
        let p2 = p2 + (self.hi * b.lo + self.lo * b.hi);
        let (hi, lo) = quick_two_sum(p1, p2);
        Dd { hi, lo }
    }
}

impl Div for Dd {
    type Output = Dd;
    #[inline]
    fn div(self, b: Dd) -> Dd {
        let q1 = self.hi / b.hi;
        let r = self - b * Dd::from_f64(q1);
        let q2 = r.hi / b.hi;
        let r = r - b * Dd::from_f64(q2);
        let q3 = r.hi / b.hi;
        let (hi, lo) = quick_two_sum(q1, q2);
        Dd { hi, lo } + Dd::from_f64(q3)
    }
}

impl PartialOrd for Dd {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        match self.hi.partial_cmp(&other.hi) {
            Some(Ordering::Equal) => self.lo.partial_cmp(&other.lo),
            o => o,
        }
    }
}

/// Complex double-double.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct CDd {
    pub re: Dd,
    pub im: Dd,
}

impl CDd {
    pub const ZERO: CDd = CDd {
        re: Dd::ZERO,
        im: Dd::ZERO,
    };

    pub fn new(re: Dd, im: Dd) -> Self {
        CDd { re, im }
    }

    pub fn from_c64(z: C64) -> Self {
        CDd {
            re: Dd::from_f64(z.re),
            im: Dd::from_f64(z.im),
        }
    }

    pub fn real(x: Dd) -> Self {
        CDd { re: x, im: Dd::ZERO }
    }

    pub fn to_c64(self) -> C64 {
        C64::new(self.re.to_f64(), self.im.to_f64())
    }

    pub fn conj(self) -> Self {
        CDd {
            re: self.re,
            im: -self.im,
        }
    }

    pub fn norm_sqr(self) -> Dd {
        self.re * self.re + self.im * self.im
    }

    /// Modulus rounded to f64.
    pub fn norm(self) -> f64 {
        self.re.to_f64().hypot(self.im.to_f64())
    }

    pub fn scale(self, s: Dd) -> Self {
        CDd {
            re: self.re * s,
            im: self.im * s,
        }
    }
}

impl Add for CDd {
    type Output = CDd;
    #[inline]
    fn add(self, b: CDd) -> CDd {
        CDd {
            re: self.re + b.re,
            im: self.im + b.im,
        }
    }
}

impl Sub for CDd {
    type Output = CDd;
    #[inline]
    fn sub(self, b: CDd) -> CDd {
        CDd {
            re: self.re - b.re,
            im: self.im - b.im,
        }
    }
}

impl Neg for CDd {
    type Output = CDd;
    fn neg(self) -> CDd {
        CDd {
            re: -self.re,
            im: -self.im,
        }
    }
}

impl Mul for CDd {
    type Output = CDd;
    #[inline]
    fn mul(self, b: CDd) -> CDd {
        CDd {
            re: self.re * b.re - self.im * b.im,
            im: self.re * b.im + self.im * b.re,
        }
    }
}

impl Div for CDd {
    type Output = CDd;
    fn div(self, b: CDd) -> CDd {
        let den = b.norm_sqr();
        let num = self * b.conj();
        CDd {
            re: num.re / den,
            im: num.im / den,
        }
    }
}

/// Dense square complex matrix in double-double precision.
#[derive(Clone, Debug, PartialEq)]
pub struct DdMatrix {
    n: usize,
    data: Vec<CDd>,
}

impl DdMatrix {
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> CDd) -> Self {
        let mut data = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                data.push(f(i, j));
            }
        }
        DdMatrix { n, data }
    }

    pub fn from_matrix(m: &ComplexMatrix) -> Result<Self> {
        let n = m.require_square()?;
        Ok(Self::from_fn(n, |i, j| CDd::from_c64(m.get(i, j))))
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, |i, j| if i == j { CDd::real(Dd::ONE) } else { CDd::ZERO })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> CDd {
        self.data[i * self.n + j]
    }

    pub fn mul(&self, b: &DdMatrix) -> DdMatrix {
        let n = self.n;
        DdMatrix::from_fn(n, |i, j| {
            (0..n).fold(CDd::ZERO, |acc, k| acc + self.get(i, k) * b.get(k, j))
        })
    }

    pub fn trace(&self) -> CDd {
        (0..self.n).fold(CDd::ZERO, |acc, i| acc + self.get(i, i))
    }
}

/// Tr(A₁A₂…Aₙ) in double-double precision.
pub fn cyclic_trace_dd(factors: &[DdMatrix]) -> Result<CDd> {
    let first = factors
        .first()
        .ok_or_else(|| Error::InvalidParameter("cyclic trace of zero factors".into()))?;
    if let Some(f) = factors.iter().find(|f| f.dim() != first.dim()) {
        return Err(Error::DimensionMismatch {
            expected: first.dim(),
            actual: f.dim(),
        });
    }
    let product = factors[1..].iter().fold(first.clone(), |acc, f| acc.mul(f));
    Ok(product.trace())
}

/// Re Tr(mⁿ) for n = 1..=max_order, each as the cyclic trace of n copies.
pub fn power_sums_dd(m: &DdMatrix, max_order: usize) -> Result<Vec<Dd>> {
    (1..=max_order)
        .map(|n| {
            let copies = vec![m.clone(); n];
            cyclic_trace_dd(&copies).map(|t| t.re)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_third_times_three() {
        let third = Dd::ONE / Dd::from_f64(3.0);
        let back = third * Dd::from_f64(3.0) - Dd::ONE;
        assert!(back.to_f64().abs() < 1e-31);
        // more precise than f64: hi + lo differs from the f64 quotient
        assert!(third.lo != 0.0);
    }

    #[test]
    fn cancellation_retains_low_bits() {
        let a = Dd::from_f64(1.0) + Dd::from_f64(1e-20);
        let b = a - Dd::ONE;
        assert!((b.to_f64() - 1e-20).abs() < 1e-35);
    }

    #[test]
    fn sqrt_of_two_squares_back() {
        let r = Dd::from_f64(2.0).sqrt();
        assert!((r * r - Dd::from_f64(2.0)).to_f64().abs() < 1e-30);
    }

    #[test]
    fn complex_division_round_trip() {
        let a = CDd::from_c64(C64::new(0.3, -1.7));
        let b = CDd::from_c64(C64::new(-2.1, 0.4));
        let q = a / b;
        let back = q * b - a;
        assert!(back.norm() < 1e-30);
    }

    #[test]
    fn power_sums_of_diagonal() {
        let m = ComplexMatrix::from_real_diagonal(&[0.5, 0.25]);
        let p = power_sums_dd(&DdMatrix::from_matrix(&m).unwrap(), 3).unwrap();
        let want = [0.75, 0.3125, 0.140625];
        for (x, w) in p.iter().zip(want) {
            assert_eq!(x.to_f64(), w);
        }
    }

    #[test]
    fn ordering() {
        let a = Dd { hi: 1.0, lo: 1e-20 };
        let b = Dd::ONE;
        assert!(a > b);
        assert_eq!(Dd::from_usize(7).to_f64(), 7.0);
        assert_eq!(Dd::from_f64(3.0).powi(4).to_f64(), 81.0);
    }
}
