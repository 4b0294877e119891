// Copyright 2026 The qundo Authors
// SPDX-License-Identifier: Apache-2.0

//! Fixed-size dense complex matrices.
//!
//! Everything in this engine lives in a five-dimensional Hilbert space, so a
//! stack-allocated `[[Complex<T>; N]; N]` beats any heap-backed matrix type.
//! The dimension is a const generic so the same routines serve the two-level
//! oracles used in tests.

use std::ops::{Add, Index, IndexMut, Mul, Neg, Sub};

use num_complex::Complex;
use num_traits::{One, Zero};

use crate::scalar::{Real, C};

/// Complex column vector.
pub type CVector<T, const N: usize> = [C<T>; N];

/// Dense `N × N` complex matrix, row-major.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CMatrix<T: Real, const N: usize> {
    pub data: [[C<T>; N]; N],
}

impl<T: Real, const N: usize> Default for CMatrix<T, N> {
    fn default() -> Self {
        Self::zeros()
    }
}

impl<T: Real, const N: usize> Index<(usize, usize)> for CMatrix<T, N> {
    type Output = C<T>;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &C<T> {
        &self.data[i][j]
    }
}

impl<T: Real, const N: usize> IndexMut<(usize, usize)> for CMatrix<T, N> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C<T> {
        &mut self.data[i][j]
    }
}

impl<T: Real, const N: usize> CMatrix<T, N> {
    pub fn zeros() -> Self {
        Self {
            data: [[C::zero(); N]; N],
        }
    }

    pub fn identity() -> Self {
        let mut m = Self::zeros();
        for i in 0..N {
            m.data[i][i] = C::one();
        }
        m
    }

    pub fn from_rows(data: [[C<T>; N]; N]) -> Self {
        Self { data }
    }

    pub fn from_real_diagonal(diag: &[T; N]) -> Self {
        let mut m = Self::zeros();
        for i in 0..N {
            m.data[i][i] = C::new(diag[i], T::zero());
        }
        m
    }

    /// Outer product `|a⟩⟨b|`.
    pub fn outer(a: &CVector<T, N>, b: &CVector<T, N>) -> Self {
        let mut m = Self::zeros();
        for i in 0..N {
            for j in 0..N {
                m.data[i][j] = a[i] * b[j].conj();
            }
        }
        m
    }

    pub fn adjoint(&self) -> Self {
        let mut m = Self::zeros();
        for i in 0..N {
            for j in 0..N {
                m.data[j][i] = self.data[i][j].conj();
            }
        }
        m
    }

    pub fn trace(&self) -> C<T> {
        (0..N).map(|i| self.data[i][i]).fold(C::zero(), |a, b| a + b)
    }

    pub fn real_diagonal(&self) -> [T; N] {
        let mut d = [T::zero(); N];
        for i in 0..N {
            d[i] = self.data[i][i].re;
        }
        d
    }

    pub fn scale(&self, s: T) -> Self {
        self.map(|z| z * s)
    }

    pub fn scale_complex(&self, s: C<T>) -> Self {
        self.map(|z| z * s)
    }

    pub fn map(&self, f: impl Fn(C<T>) -> C<T>) -> Self {
        let mut m = *self;
        for row in m.data.iter_mut() {
            for z in row.iter_mut() {
                *z = f(*z);
            }
        }
        m
    }

    pub fn mul_vec(&self, v: &CVector<T, N>) -> CVector<T, N> {
        let mut out = [C::zero(); N];
        for i in 0..N {
            let mut acc = C::zero();
            for j in 0..N {
                acc = acc + self.data[i][j] * v[j];
            }
            out[i] = acc;
        }
        out
    }

    /// `[self, other]`.
    pub fn commutator(&self, other: &Self) -> Self {
        *self * *other - *other * *self
    }

    pub fn frobenius_norm(&self) -> T {
        self.data
            .iter()
            .flat_map(|r| r.iter())
            .map(|z| z.norm_sqr())
            .sum::<T>()
            .sqrt()
    }

    /// Maximum absolute column sum.
    pub fn one_norm(&self) -> T {
        (0..N)
            .map(|j| (0..N).map(|i| self.data[i][j].norm()).sum::<T>())
            .fold(T::zero(), T::max)
    }

    /// Largest entrywise deviation from Hermiticity.
    pub fn hermiticity_defect(&self) -> T {
        let mut worst = T::zero();
        for i in 0..N {
            for j in i..N {
                worst = worst.max((self.data[i][j] - self.data[j][i].conj()).norm());
            }
        }
        worst
    }

    pub fn max_abs_diff(&self, other: &Self) -> T {
        let mut worst = T::zero();
        for i in 0..N {
            for j in 0..N {
                worst = worst.max((self.data[i][j] - other.data[i][j]).norm());
            }
        }
        worst
    }

    pub fn is_finite(&self) -> bool {
        self.data
            .iter()
            .flat_map(|r| r.iter())
            .all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Replaces the matrix by `(A + A†)/2`.
    pub fn hermitian_part(&self) -> Self {
        let half = T::lit(0.5);
        let mut m = *self;
        for i in 0..N {
            m.data[i][i] = C::new(self.data[i][i].re, T::zero());
            for j in (i + 1)..N {
                let z = (self.data[i][j] + self.data[j][i].conj()) * half;
                m.data[i][j] = z;
                m.data[j][i] = z.conj();
            }
        }
        m
    }

    /// Eigendecomposition of a Hermitian matrix; only the upper triangle and
    /// the real part of the diagonal are read.
    pub fn hermitian_eigen(&self) -> HermitianEigen<T, N> {
        jacobi_eigen(self)
    }

    /// Square root of a positive semidefinite Hermitian matrix. Eigenvalues
    /// below `clip` are treated as exact zeros.
    pub fn sqrt_psd(&self, clip: T) -> Self {
        let eig = self.hermitian_eigen();
        eig.reconstruct(|l| if l <= clip { T::zero() } else { l.sqrt() })
    }

    /// Dense `exp(-i H t)` of a Hermitian `H` by Taylor series with scaling
    /// and squaring.
    pub fn unitary_exp(&self, t: T) -> Self {
        let generator = self.scale_complex(C::new(T::zero(), -t));
        let norm = generator.one_norm();
        let mut squarings = 0u32;
        let mut scaled_norm = norm;
        while scaled_norm > T::lit(0.5) {
            scaled_norm *= T::lit(0.5);
            squarings += 1;
        }
        let a = generator.scale(T::lit(0.5).powi(squarings as i32));
        let mut result = Self::identity();
        let mut term = Self::identity();
        let eps = T::epsilon();
        for k in 1..=30 {
            term = (term * a).scale(T::one() / T::from_usize(k).unwrap());
            result = result + term;
            if term.one_norm() <= eps * result.one_norm() {
                break;
            }
        }
        for _ in 0..squarings {
            result = result * result;
        }
        result
    }
}

impl<T: Real, const N: usize> Add for CMatrix<T, N> {
    type Output = Self;

    fn add(mut self, rhs: Self) -> Self {
        for i in 0..N {
            for j in 0..N {
                self.data[i][j] = self.data[i][j] + rhs.data[i][j];
            }
        }
        self
    }
}

impl<T: Real, const N: usize> Sub for CMatrix<T, N> {
    type Output = Self;

    fn sub(mut self, rhs: Self) -> Self {
        for i in 0..N {
            for j in 0..N {
                self.data[i][j] = self.data[i][j] - rhs.data[i][j];
            }
        }
        self
    }
}

impl<T: Real, const N: usize> Neg for CMatrix<T, N> {
    type Output = Self;

    fn neg(self) -> Self {
        self.map(|z| -z)
    }
}

impl<T: Real, const N: usize> Mul for CMatrix<T, N> {
    type Output = Self;

    fn mul(self, rhs: Self) -> Self {
        let mut out = Self::zeros();
        for i in 0..N {
            for k in 0..N {
                let a = self.data[i][k];
                if a.is_zero() {
                    continue;
                }
                for j in 0..N {
                    out.data[i][j] = out.data[i][j] + a * rhs.data[k][j];
                }
            }
        }
        out
    }
}

/// Applies `exp(-i H t)` to `psi` without forming the propagator.
///
/// Taylor series of the action, split into substeps so that each substep has
/// `‖H t‖₁ ≤ 1`, truncated once terms drop below machine precision.
pub fn apply_unitary_exp<T: Real, const N: usize>(
    h: &CMatrix<T, N>,
    t: T,
    psi: &CVector<T, N>,
) -> CVector<T, N> {
    let theta = h.one_norm() * t.abs();
    let substeps = theta.ceil().max(T::one());
    let n_sub = substeps.to_usize().unwrap_or(1).max(1);
    let tau = t / substeps;
    let factor = C::new(T::zero(), -tau);
    let eps = T::epsilon();
    let mut v = *psi;
    for _ in 0..n_sub {
        let v_norm = vec_norm(&v);
        let mut term = v;
        let mut acc = v;
        for k in 1..=40 {
            let mut next = h.mul_vec(&term);
            let scale = factor / T::from_usize(k).unwrap();
            for z in next.iter_mut() {
                *z = *z * scale;
            }
            term = next;
            for i in 0..N {
                acc[i] = acc[i] + term[i];
            }
            if vec_norm(&term) <= eps * v_norm {
                break;
            }
        }
        v = acc;
    }
    v
}

/// Real symmetric tridiagonal matrix; `off[i]` couples `i` and `i + 1`
/// (the last entry is unused).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RealTridiagonal<T: Real, const N: usize> {
    pub diag: [T; N],
    pub off: [T; N],
}

impl<T: Real, const N: usize> RealTridiagonal<T, N> {
    /// Extracts the tridiagonal form if `m` is real, symmetric and tridiagonal.
    pub fn from_matrix(m: &CMatrix<T, N>) -> Option<Self> {
        let mut diag = [T::zero(); N];
        let mut off = [T::zero(); N];
        for i in 0..N {
            for j in 0..N {
                let z = m.data[i][j];
                if z.im != T::zero() {
                    return None;
                }
                let band = i == j || i + 1 == j || j + 1 == i;
                if !band && z.re != T::zero() {
                    return None;
                }
            }
            diag[i] = m.data[i][i].re;
            if i + 1 < N {
                if m.data[i][i + 1].re != m.data[i + 1][i].re {
                    return None;
                }
                off[i] = m.data[i][i + 1].re;
            }
        }
        Some(Self { diag, off })
    }

    pub fn to_matrix(&self) -> CMatrix<T, N> {
        let mut m = CMatrix::from_real_diagonal(&self.diag);
        for i in 0..N.saturating_sub(1) {
            m.data[i][i + 1] = re(self.off[i]);
            m.data[i + 1][i] = re(self.off[i]);
        }
        m
    }

    fn one_norm(&self) -> T {
        (0..N)
            .map(|j| {
                let mut s = self.diag[j].abs();
                if j > 0 {
                    s += self.off[j - 1].abs();
                }
                if j + 1 < N {
                    s += self.off[j].abs();
                }
                s
            })
            .fold(T::zero(), T::max)
    }

    #[inline]
    fn mul_vec(&self, v: &CVector<T, N>) -> CVector<T, N> {
        let mut out = [C::new(T::zero(), T::zero()); N];
        for i in 0..N {
            let mut acc = v[i] * self.diag[i];
            if i > 0 {
                acc = acc + v[i - 1] * self.off[i - 1];
            }
            if i + 1 < N {
                acc = acc + v[i + 1] * self.off[i];
            }
            out[i] = acc;
        }
        out
    }

    /// Same action as [`apply_unitary_exp`] using the band structure.
    pub fn apply_exp(&self, t: T, psi: &CVector<T, N>) -> CVector<T, N> {
        let theta = self.one_norm() * t.abs();
        let substeps = theta.ceil().max(T::one());
        let n_sub = substeps.to_usize().unwrap_or(1).max(1);
        let tau = t / substeps;
        let eps2 = T::epsilon() * T::epsilon();
        let mut v = *psi;
        for _ in 0..n_sub {
            let v_norm2: T = v.iter().map(|z| z.norm_sqr()).sum();
            let mut term = v;
            let mut acc = v;
            for k in 1..=40 {
                let w = self.mul_vec(&term);
                let s = tau / T::from_usize(k).unwrap();
                let mut norm2 = T::zero();
                for i in 0..N {
                    // (-i s) (a + i b) = s b - i s a
                    term[i] = C::new(s * w[i].im, -s * w[i].re);
                    acc[i] = acc[i] + term[i];
                    norm2 += term[i].norm_sqr();
                }
                if norm2 <= eps2 * v_norm2 {
                    break;
                }
            }
            v = acc;
        }
        v
    }
}

pub fn vec_norm<T: Real, const N: usize>(v: &CVector<T, N>) -> T {
    v.iter().map(|z| z.norm_sqr()).sum::<T>().sqrt()
}

/// `⟨a|b⟩`.
pub fn inner<T: Real, const N: usize>(a: &CVector<T, N>, b: &CVector<T, N>) -> C<T> {
    a.iter()
        .zip(b.iter())
        .fold(C::zero(), |acc, (x, y)| acc + x.conj() * *y)
}

/// Eigenpairs of a Hermitian matrix, eigenvalues ascending.
#[derive(Clone, Debug)]
pub struct HermitianEigen<T: Real, const N: usize> {
    pub values: [T; N],
    /// Column `j` is the eigenvector for `values[j]`.
    pub vectors: CMatrix<T, N>,
}

impl<T: Real, const N: usize> HermitianEigen<T, N> {
    pub fn vector(&self, j: usize) -> CVector<T, N> {
        let mut v = [C::zero(); N];
        for i in 0..N {
            v[i] = self.vectors.data[i][j];
        }
        v
    }

    /// `V g(Λ) V†`.
    pub fn reconstruct(&self, g: impl Fn(T) -> T) -> CMatrix<T, N> {
        let mut out = CMatrix::zeros();
        for k in 0..N {
            let w = g(self.values[k]);
            if w == T::zero() {
                continue;
            }
            for i in 0..N {
                let vik = self.vectors.data[i][k] * w;
                for j in 0..N {
                    out.data[i][j] = out.data[i][j] + vik * self.vectors.data[j][k].conj();
                }
            }
        }
        out
    }
}

/// Cyclic complex Jacobi sweeps.
fn jacobi_eigen<T: Real, const N: usize>(input: &CMatrix<T, N>) -> HermitianEigen<T, N> {
    let mut a = input.hermitian_part();
    let mut v = CMatrix::<T, N>::identity();
    let scale = a.frobenius_norm();
    let tiny = T::min_positive_value();

    for _sweep in 0..100 {
        let mut off = T::zero();
        for p in 0..N {
            for q in (p + 1)..N {
                off += a.data[p][q].norm_sqr();
            }
        }
        if off.sqrt() <= T::epsilon() * T::lit(1e-2) * scale || off <= tiny {
            break;
        }
        for p in 0..N {
            for q in (p + 1)..N {
                let apq = a.data[p][q];
                let mag = apq.norm();
                if mag <= tiny || mag <= T::epsilon() * T::lit(1e-3) * scale {
                    a.data[p][q] = C::zero();
                    a.data[q][p] = C::zero();
                    continue;
                }
                let phase = apq / mag;
                let app = a.data[p][p].re;
                let aqq = a.data[q][q].re;
                let theta = (aqq - app) / (T::lit(2.0) * mag);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                // J = diag(1, conj(phase)) · R(c, s) acting on the (p, q) plane.
                let jpp = C::new(c, T::zero());
                let jpq = C::new(s, T::zero());
                let jqp = phase.conj() * (-s);
                let jqq = phase.conj() * c;

                // A ← A J
                for k in 0..N {
                    let akp = a.data[k][p];
                    let akq = a.data[k][q];
                    a.data[k][p] = akp * jpp + akq * jqp;
                    a.data[k][q] = akp * jpq + akq * jqq;
                }
                // A ← J† A
                for k in 0..N {
                    let apk = a.data[p][k];
                    let aqk = a.data[q][k];
                    a.data[p][k] = jpp.conj() * apk + jqp.conj() * aqk;
                    a.data[q][k] = jpq.conj() * apk + jqq.conj() * aqk;
                }
                a.data[p][q] = C::zero();
                a.data[q][p] = C::zero();
                a.data[p][p].im = T::zero();
                a.data[q][q].im = T::zero();
                // V ← V J
                for k in 0..N {
                    let vkp = v.data[k][p];
                    let vkq = v.data[k][q];
                    v.data[k][p] = vkp * jpp + vkq * jqp;
                    v.data[k][q] = vkp * jpq + vkq * jqq;
                }
            }
        }
    }

    let mut order: [usize; N] = std::array::from_fn(|i| i);
    order.sort_by(|&i, &j| {
        a.data[i][i]
            .re
            .partial_cmp(&a.data[j][j].re)
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let mut values = [T::zero(); N];
    let mut vectors = CMatrix::zeros();
    for (dst, &src) in order.iter().enumerate() {
        values[dst] = a.data[src][src].re;
        for i in 0..N {
            vectors.data[i][dst] = v.data[i][src];
        }
    }
    HermitianEigen { values, vectors }
}

/// Convenience constructor for real-valued complex entries.
#[inline]
pub fn re<T: Real>(x: T) -> C<T> {
    Complex::new(x, T::zero())
}

#[cfg(test)]
mod tests {
    use super::*;

    type M5 = CMatrix<f64, 5>;

    fn sample_hermitian(seed: u64) -> M5 {
        // Small LCG keeps this test free of RNG dependencies.
        let mut state = seed.wrapping_mul(6364136223846793005).wrapping_add(1);
        let mut next = || {
            state = state
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        };
        let mut m = M5::zeros();
        for i in 0..5 {
            m[(i, i)] = re(next());
            for j in (i + 1)..5 {
                let z = C::new(next(), next());
                m[(i, j)] = z;
                m[(j, i)] = z.conj();
            }
        }
        m
    }

    #[test]
    fn eigen_reconstructs_and_orthonormal() {
        for seed in 0..50 {
            let h = sample_hermitian(seed);
            let eig = h.hermitian_eigen();
            let back = eig.reconstruct(|l| l);
            assert!(back.max_abs_diff(&h) < 1e-12, "seed {seed}");
            let vv = eig.vectors.adjoint() * eig.vectors;
            assert!(vv.max_abs_diff(&M5::identity()) < 1e-12);
            assert!(eig.values.windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn eigen_of_diagonal_is_exact() {
        let d = M5::from_real_diagonal(&[3.0, -1.0, 0.0, 2.0, 7.0]);
        let eig = d.hermitian_eigen();
        assert_eq!(eig.values, [-1.0, 0.0, 2.0, 3.0, 7.0]);
    }

    #[test]
    fn unitary_exp_matches_eigen_route() {
        for seed in 0..20 {
            let h = sample_hermitian(seed).scale(3.0);
            let u = h.unitary_exp(0.7);
            let eig = h.hermitian_eigen();
            let mut oracle = M5::zeros();
            for k in 0..5 {
                let phase = C::new(0.0, -0.7 * eig.values[k]).exp();
                let vk = eig.vector(k);
                oracle = oracle + M5::outer(&vk, &vk).scale_complex(phase);
            }
            assert!(u.max_abs_diff(&oracle) < 1e-12);
            assert!((u.adjoint() * u).max_abs_diff(&M5::identity()) < 1e-13);
        }
    }

    #[test]
    fn vector_action_matches_dense_exp() {
        let h = sample_hermitian(7).scale(40.0);
        let psi = [re(0.6), C::new(0.0, 0.8), re(0.0), re(0.0), re(0.0)];
        let a = apply_unitary_exp(&h, 0.3, &psi);
        let b = h.unitary_exp(0.3).mul_vec(&psi);
        for i in 0..5 {
            assert!((a[i] - b[i]).norm() < 1e-11);
        }
        assert!((vec_norm(&a) - 1.0).abs() < 1e-13);
    }

    #[test]
    fn tridiagonal_action_matches_dense() {
        let band = RealTridiagonal::<f64, 5> {
            diag: [3.0, -1.5, 0.0, 2.2, -4.0],
            off: [1.0, 1.2, 1.2, 1.0, 0.0],
        };
        let m = band.to_matrix();
        assert_eq!(RealTridiagonal::from_matrix(&m), Some(band));
        assert!(RealTridiagonal::from_matrix(&sample_hermitian(2)).is_none());
        let psi = [re(0.6), C::new(0.0, 0.8), re(0.0), re(0.0), re(0.0)];
        for t in [1e-3, 0.05, 2.0] {
            let a = band.apply_exp(t, &psi);
            let b = m.unitary_exp(t).mul_vec(&psi);
            for i in 0..5 {
                assert!((a[i] - b[i]).norm() < 1e-12, "t={t}");
            }
        }
    }

    #[test]
    fn sqrt_squares_back() {
        let h = sample_hermitian(3);
        let psd = h * h.adjoint();
        let r = psd.sqrt_psd(0.0);
        assert!((r * r).max_abs_diff(&psd) < 1e-12);
    }
}
