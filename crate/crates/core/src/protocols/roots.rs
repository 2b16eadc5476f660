//! Eigenvalues from power sums.
//!
//! Newton's identities turn p₁..pₙ into the elementary symmetric functions,
//! i.e. the characteristic polynomial. Its roots are seeded from companion
//! matrix eigenvalues and polished by Aberth iteration in double-double.
//! Multiple roots are only recovered to about ε^{1/m} by any root finder, so
//! nearby roots are then tentatively merged: a merge is accepted when a fit of
//! the merged values to the low-order power sums also reproduces the
//! higher-order ones.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::linalg::{general_eigenvalues, CDd, ComplexMatrix, Dd, C64};

/// How inverted roots are projected and how aggressively clusters merge.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InversionConfig {
    /// Roots with |Im| above this raise the imaginary flag.
    pub imag_guard: f64,
    /// Roots below −negative_tol raise the negative flag (all negatives are clamped).
    pub negative_tol: f64,
    /// Largest normalized residual on the unfitted power sums that still
    /// accepts a merge. `None` disables merging.
    pub merge_tol: Option<f64>,
}

impl InversionConfig {
    /// Noiseless moments computed in f64.
    pub const EXACT: Self = Self {
        imag_guard: 1e-6,
        negative_tol: 1e-9,
        merge_tol: Some(1e-13),
    };

    /// Noiseless moments computed in double-double.
    pub const EXACT_DD: Self = Self {
        imag_guard: 1e-6,
        negative_tol: 1e-9,
        merge_tol: Some(1e-24),
    };

    /// Shot-noise moments: no merging, same projection.
    pub const SAMPLED: Self = Self {
        imag_guard: 1e-6,
        negative_tol: 1e-9,
        merge_tol: None,
    };
}

impl Default for InversionConfig {
    fn default() -> Self {
        Self::EXACT
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct InversionFlags {
    /// Some root had |Im| above the guard; its real part was kept.
    pub imaginary_discarded: bool,
    pub max_imaginary: f64,
    /// Some root was below −negative_tol before clamping.
    pub negative_clamped: bool,
    pub min_real: f64,
}

impl InversionFlags {
    pub fn any(&self) -> bool {
        self.imaginary_discarded || self.negative_clamped
    }

    pub fn merge(self, other: Self) -> Self {
        Self {
            imaginary_discarded: self.imaginary_discarded || other.imaginary_discarded,
            max_imaginary: self.max_imaginary.max(other.max_imaginary),
            negative_clamped: self.negative_clamped || other.negative_clamped,
            min_real: self.min_real.min(other.min_real),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Inversion {
    /// Real, clamped at 0, descending.
    pub roots: Vec<f64>,
    /// Roots before projection as (re, im), sorted by real part descending.
    pub raw: Vec<[f64; 2]>,
    /// Multiplicities found by merging, aligned with the distinct values.
    pub multiplicities: Vec<usize>,
    pub flags: InversionFlags,
}

/// e₀..eₙ from p₁..pₙ: e_m = (1/m)·Σᵢ (−1)^{i−1} e_{m−i} pᵢ.
pub fn elementary_symmetric(power_sums: &[Dd]) -> Vec<Dd> {
    let mut e = vec![Dd::ONE];
    for m in 1..=power_sums.len() {
        let mut acc = Dd::ZERO;
        for i in 1..=m {
            let term = e[m - i] * power_sums[i - 1];
            acc = if i % 2 == 1 { acc + term } else { acc - term };
        }
        e.push(acc / Dd::from_usize(m));
    }
    e
}

/// Monic coefficients [c₀, …, c_{n−1}, 1] of xⁿ − e₁xⁿ⁻¹ + e₂xⁿ⁻² − …, lowest degree first.
fn monic_coefficients(e: &[Dd]) -> Vec<Dd> {
    let n = e.len() - 1;
    let mut c = vec![Dd::ZERO; n + 1];
    for (m, em) in e.iter().enumerate() {
        c[n - m] = if m % 2 == 0 { *em } else { -*em };
    }
    c
}

fn eval_with_derivative(c: &[Dd], z: CDd) -> (CDd, CDd) {
    let mut p = CDd::real(*c.last().unwrap());
    let mut dp = CDd::ZERO;
    for coef in c.iter().rev().skip(1) {
        dp = dp * z + p;
        p = p * z + CDd::real(*coef);
    }
    (p, dp)
}

fn companion_seeds(c: &[Dd], scale: f64) -> Vec<C64> {
    let n = c.len() - 1;
    let companion = ComplexMatrix::from_fn(n, n, |i, j| {
        if i == 0 {
            C64::new(-c[n - 1 - j].to_f64(), 0.0)
        } else if i == j + 1 {
            C64::new(1.0, 0.0)
        } else {
            C64::default()
        }
    });
    let mut seeds = general_eigenvalues(&companion).unwrap_or_else(|_| {
        (0..n)
            .map(|i| C64::from_polar(scale, std::f64::consts::TAU * (i as f64 + 0.25) / n as f64))
            .collect()
    });
    // Aberth needs pairwise distinct starting points
    for i in 0..n {
        for j in 0..i {
            if (seeds[i] - seeds[j]).norm() <= 1e-12 * scale {
                let angle = 2.399_963 * (i as f64 + 1.0);
                seeds[i] += C64::from_polar(1e-6 * scale, angle);
            }
        }
    }
    seeds
}

fn aberth(c: &[Dd], seeds: &[C64], scale: f64) -> Vec<CDd> {
    let mut z: Vec<CDd> = seeds.iter().map(|s| CDd::from_c64(*s)).collect();
    let n = z.len();
    let stop = 1e-30 * scale;
    // near a multiple root the steps stall at the noise floor; stop once they
    // have not shrunk for a while
    let mut best = f64::INFINITY;
    let mut stalled = 0;
    for _ in 0..1000 {
        let mut largest = 0.0f64;
        for i in 0..n {
            let (p, dp) = eval_with_derivative(c, z[i]);
            if p.norm() == 0.0 {
                continue;
            }
            let mut repulsion = CDd::ZERO;
            for j in 0..n {
                if j != i {
                    let diff = z[i] - z[j];
                    if diff.norm() > 0.0 {
                        repulsion = repulsion + CDd::real(Dd::ONE) / diff;
                    }
                }
            }
            let ratio = p / dp;
            let w = ratio / (CDd::real(Dd::ONE) - ratio * repulsion);
            if !(w.re.is_finite() && w.im.is_finite()) {
                continue;
            }
            z[i] = z[i] - w;
            largest = largest.max(w.norm());
        }
        if largest <= stop {
            break;
        }
        if largest < 0.5 * best || largest > 1e-6 * scale {
            best = best.min(largest);
            stalled = 0;
        } else {
            stalled += 1;
            if stalled >= 20 {
                break;
            }
        }
    }
    z
}

/// Solves Σⱼ mⱼ μⱼˢ = pₛ for s = 1..q by Newton's method in double-double.
fn fit_multiplicities(p: &[Dd], mult: &[usize], start: &[Dd]) -> Option<Vec<Dd>> {
    let q = mult.len();
    let mut mu = start.to_vec();
    let mut best = f64::INFINITY;
    let mut stalled = 0;
    for _ in 0..100 {
        let mut jac = vec![vec![Dd::ZERO; q + 1]; q];
        for s in 1..=q {
            let mut f = -p[s - 1];
            for j in 0..q {
                let m = Dd::from_usize(mult[j]);
                f = f + m * mu[j].powi(s as u32);
                jac[s - 1][j] = Dd::from_usize(s) * m * mu[j].powi(s as u32 - 1);
            }
            jac[s - 1][q] = -f;
        }
        let step = solve_dd(jac)?;
        let mut largest = 0.0f64;
        for j in 0..q {
            mu[j] = mu[j] + step[j];
            largest = largest.max(step[j].to_f64().abs());
        }
        if !mu.iter().all(|m| m.is_finite()) {
            return None;
        }
        if largest <= 1e-31 {
            break;
        }
        if largest < 0.5 * best || largest > 1e-12 {
            best = best.min(largest);
            stalled = 0;
        } else {
            stalled += 1;
            if stalled >= 5 {
                break;
            }
        }
    }
    Some(mu)
}

/// Gaussian elimination with partial pivoting on an augmented q×(q+1) system.
fn solve_dd(mut a: Vec<Vec<Dd>>) -> Option<Vec<Dd>> {
    let q = a.len();
    for col in 0..q {
        let pivot = (col..q).max_by(|&x, &y| a[x][col].abs().to_f64().total_cmp(&a[y][col].abs().to_f64()))?;
        if a[pivot][col].to_f64() == 0.0 {
            return None;
        }
        a.swap(col, pivot);
        for row in col + 1..q {
            let factor = a[row][col] / a[col][col];
            for k in col..=q {
                let t = a[col][k];
                a[row][k] = a[row][k] - factor * t;
            }
        }
    }
    let mut x = vec![Dd::ZERO; q];
    for row in (0..q).rev() {
        let mut acc = a[row][q];
        for k in row + 1..q {
            acc = acc - a[row][k] * x[k];
        }
        x[row] = acc / a[row][row];
    }
    Some(x)
}

/// Max over the unfitted orders of |Σ mⱼμⱼˢ − pₛ| / (n·scaleˢ).
fn merge_residual(p: &[Dd], mult: &[usize], mu: &[Dd], scale: f64) -> f64 {
    let n = p.len();
    (mult.len() + 1..=n)
        .map(|s| {
            let mut r = -p[s - 1];
            for (m, v) in mult.iter().zip(mu) {
                r = r + Dd::from_usize(*m) * v.powi(s as u32);
            }
            r.to_f64().abs() / (n as f64 * scale.powi(s as i32))
        })
        .fold(0.0, f64::max)
}

/// Largest gap, relative to the root scale, that a merge may close.
const MAX_MERGE_GAP: f64 = 1e-2;

/// Single-linkage clusters of `roots` joining every pair closer than `gap`.
fn single_linkage(roots: &[C64], gap: f64) -> Vec<Vec<usize>> {
    let n = roots.len();
    let mut label: Vec<usize> = (0..n).collect();
    for i in 0..n {
        for j in i + 1..n {
            if (roots[i] - roots[j]).norm() <= gap {
                let (from, to) = (label[j], label[i]);
                if from != to {
                    for l in label.iter_mut() {
                        if *l == from {
                            *l = to;
                        }
                    }
                }
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for i in 0..n {
        match groups.iter_mut().find(|g| label[g[0]] == label[i]) {
            Some(g) => g.push(i),
            None => groups.push(vec![i]),
        }
    }
    groups
}

/// Tries the single-linkage partition at every pairwise gap up to
/// [`MAX_MERGE_GAP`] and keeps the coarsest one whose fitted values reproduce
/// all power sums. Returns (distinct values, multiplicities) or `None` when no
/// merge was accepted.
fn merge_clusters(p: &[Dd], roots: &[CDd], scale: f64, tol: f64) -> Option<(Vec<Dd>, Vec<usize>)> {
    let approx: Vec<C64> = roots.iter().map(|z| z.to_c64()).collect();
    let n = roots.len();
    let mut gaps: Vec<f64> = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .map(|(i, j)| (approx[i] - approx[j]).norm())
        .filter(|&g| g <= MAX_MERGE_GAP * scale)
        .collect();
    gaps.sort_by(f64::total_cmp);
    gaps.dedup();
    let mut best: Option<(Vec<Dd>, Vec<usize>)> = None;
    let mut last_count = n;
    for gap in gaps {
        let groups = single_linkage(&approx, gap);
        if groups.len() == last_count {
            continue;
        }
        last_count = groups.len();
        let mult: Vec<usize> = groups.iter().map(Vec::len).collect();
        let start: Vec<Dd> = groups
            .iter()
            .map(|g| g.iter().fold(Dd::ZERO, |acc, &i| acc + roots[i].re) / Dd::from_usize(g.len()))
            .collect();
        if let Some(mu) = fit_multiplicities(p, &mult, &start) {
            if merge_residual(p, &mult, &mu, scale) <= tol {
                best = Some((mu, mult));
            }
        }
    }
    best
}

/// Roots of the polynomial whose power sums are p₁..pₙ, projected to the
/// non-negative reals and sorted descending.
pub fn roots_from_power_sums(power_sums: &[Dd], config: &InversionConfig) -> Result<Inversion> {
    let n = power_sums.len();
    if n == 0 {
        return Err(crate::Error::InvalidParameter("no power sums given".into()));
    }
    if let Some(bad) = power_sums.iter().position(|p| !p.is_finite()) {
        return Err(crate::Error::NonFinite(bad, 0));
    }
    let e = elementary_symmetric(power_sums);
    let c = monic_coefficients(&e);
    // bounds the root modulus for real spectra; capped by the Cauchy bound otherwise
    let bound = c[..n].iter().map(|x| x.to_f64().abs()).fold(0.0, f64::max);
    let scale = power_sums
        .iter()
        .enumerate()
        .map(|(k, p)| p.to_f64().abs().powf(1.0 / (k + 1) as f64))
        .fold(1e-300, f64::max)
        .min(1.0 + bound);
    let seeds = companion_seeds(&c, scale);
    let polished = aberth(&c, &seeds, scale);
    let root_scale = polished.iter().map(|z| z.norm()).fold(1e-300, f64::max);

    let (values, multiplicities, raw): (Vec<CDd>, Vec<usize>, Vec<CDd>) =
        match config.merge_tol.and_then(|tol| merge_clusters(power_sums, &polished, root_scale, tol)) {
            Some((mu, mult)) => {
                let expanded = mu
                    .iter()
                    .zip(&mult)
                    .flat_map(|(v, m)| std::iter::repeat_n(CDd::real(*v), *m))
                    .collect();
                (expanded, mult, polished)
            }
            None => (polished.clone(), vec![1; n], polished),
        };

    let mut flags = InversionFlags {
        min_real: f64::INFINITY,
        ..InversionFlags::default()
    };
    let mut roots: Vec<f64> = values
        .iter()
        .map(|z| {
            let (re, im) = (z.re.to_f64(), z.im.to_f64());
            flags.max_imaginary = flags.max_imaginary.max(im.abs());
            flags.min_real = flags.min_real.min(re);
            re.max(0.0)
        })
        .collect();
    flags.imaginary_discarded = flags.max_imaginary > config.imag_guard;
    flags.negative_clamped = flags.min_real < -config.negative_tol;
    roots.sort_by(|a, b| b.total_cmp(a));
    let mut raw: Vec<[f64; 2]> = raw.iter().map(|z| [z.re.to_f64(), z.im.to_f64()]).collect();
    raw.sort_by(|a, b| b[0].total_cmp(&a[0]));
    Ok(Inversion {
        roots,
        raw,
        multiplicities,
        flags,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sums(lambda: &[f64]) -> Vec<Dd> {
        (1..=lambda.len())
            .map(|k| lambda.iter().fold(Dd::ZERO, |acc, &l| acc + Dd::from_f64(l).powi(k as u32)))
            .collect()
    }

    fn f64_sums(lambda: &[f64]) -> Vec<Dd> {
        (1..=lambda.len())
            .map(|k| Dd::from_f64(lambda.iter().map(|l| l.powi(k as i32)).sum()))
            .collect()
    }

    fn sorted_desc(v: &[f64]) -> Vec<f64> {
        let mut s = v.to_vec();
        s.sort_by(|a, b| b.total_cmp(a));
        s
    }

    fn assert_close(got: &[f64], want: &[f64], tol: f64) {
        let want = sorted_desc(want);
        for (g, w) in got.iter().zip(&want) {
            assert!((g - w).abs() <= tol, "got {got:?} want {want:?}");
        }
    }

    #[test]
    fn newton_identities_on_known_spectrum() {
        let e = elementary_symmetric(&sums(&[1.0, 2.0, 3.0]));
        let want = [1.0, 6.0, 11.0, 6.0];
        for (x, w) in e.iter().zip(want) {
            assert!((x.to_f64() - w).abs() < 1e-28);
        }
    }

    #[test]
    fn bell_moments() {
        let inv = roots_from_power_sums(&f64_sums(&[1.0, 0.0, 0.0, 0.0]), &InversionConfig::EXACT).unwrap();
        assert_close(&inv.roots, &[1.0, 0.0, 0.0, 0.0], 1e-12);
        assert!(!inv.flags.any());
    }

    #[test]
    fn maximally_mixed_moments() {
        // ρρ̃ = I/16 for ρ = I/4
        let p = [0.25, 1.0 / 64.0, 1.0 / 1024.0, 1.0 / 16384.0].map(Dd::from_f64);
        let inv = roots_from_power_sums(&p, &InversionConfig::EXACT).unwrap();
        assert_close(&inv.roots, &[1.0 / 16.0; 4], 1e-12);
        assert_eq!(inv.multiplicities, vec![4]);
        // (1/4)^k are the moments of a single eigenvalue 1/4
        let single = [0.25, 1.0 / 16.0, 1.0 / 64.0, 1.0 / 256.0].map(Dd::from_f64);
        let inv = roots_from_power_sums(&single, &InversionConfig::EXACT).unwrap();
        assert_close(&inv.roots, &[0.25, 0.0, 0.0, 0.0], 1e-12);
    }

    #[test]
    fn distinct_roots_without_merging() {
        let lambda = [0.7, 0.2, 0.05, 0.01];
        let inv = roots_from_power_sums(&sums(&lambda), &InversionConfig::SAMPLED).unwrap();
        assert_close(&inv.roots, &lambda, 1e-14);
    }

    #[test]
    fn round_trip_with_repeats() {
        let mut g = ChaCha8Rng::seed_from_u64(5);
        for case in 0..400 {
            let mut lambda: Vec<f64> = (0..4).map(|_| g.random::<f64>()).collect();
            match case % 4 {
                1 => lambda[1] = lambda[0],
                2 => {
                    lambda[1] = lambda[0];
                    lambda[2] = lambda[0];
                }
                3 => {
                    lambda[1] = lambda[0];
                    lambda[3] = lambda[2];
                }
                _ => {}
            }
            let inv = roots_from_power_sums(&f64_sums(&lambda), &InversionConfig::EXACT).unwrap();
            assert_close(&inv.roots, &lambda, 1e-8);
        }
    }

    #[test]
    fn nine_roots_in_double_double() {
        let mut g = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..50 {
            let lambda: Vec<f64> = (0..9).map(|_| 0.05 + 0.1 * g.random::<f64>()).collect();
            let inv = roots_from_power_sums(&sums(&lambda), &InversionConfig::EXACT_DD).unwrap();
            assert_close(&inv.roots, &lambda, 1e-12);
        }
        let repeated = [0.12, 0.12, 0.12, 0.12, 0.12, 0.12, 0.09, 0.09, 0.09];
        let inv = roots_from_power_sums(&sums(&repeated), &InversionConfig::EXACT_DD).unwrap();
        assert_close(&inv.roots, &repeated, 1e-14);
    }

    #[test]
    fn noisy_moments_are_flagged() {
        // not a valid spectrum: p₂ > p₁² forces complex or negative roots
        let p = [0.5, 0.9, 0.1, 0.2].map(Dd::from_f64);
        let inv = roots_from_power_sums(&p, &InversionConfig::SAMPLED).unwrap();
        assert!(inv.flags.any());
        assert!(inv.roots.iter().all(|r| *r >= 0.0));
    }

    #[test]
    fn negative_roots_are_clamped() {
        let lambda = [0.5, 0.5, 0.5, -0.5];
        let inv = roots_from_power_sums(&f64_sums(&lambda), &InversionConfig::EXACT).unwrap();
        assert!(inv.flags.negative_clamped);
        assert!((inv.flags.min_real + 0.5).abs() < 1e-10);
        assert_close(&inv.roots, &[0.5, 0.5, 0.5, 0.0], 1e-10);
    }

    #[test]
    fn rejects_non_finite() {
        assert!(roots_from_power_sums(&[Dd::from_f64(f64::NAN)], &InversionConfig::EXACT).is_err());
        assert!(roots_from_power_sums(&[], &InversionConfig::EXACT).is_err());
    }
}
