// Copyright 2026 The qundo Authors
// SPDX-License-Identifier: Apache-2.0

//! Density matrices on the five-level manifold.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{re, CVector};
use crate::scalar::{Real, C};
use crate::{Matrix5, DIM};

/// Tolerances used by [`DensityMatrix::validate`].
pub const HERMITIAN_TOL: f64 = 1e-10;
pub const TRACE_TOL: f64 = 1e-10;
pub const PSD_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DensityMatrix<T: Real>(pub Matrix5<T>);

impl<T: Real> DensityMatrix<T> {
    /// Wraps a matrix after checking Hermiticity, unit trace and positivity.
    pub fn new(m: Matrix5<T>) -> Result<Self> {
        let rho = Self(m);
        rho.validate()?;
        Ok(rho)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.0.is_finite() {
            return Err(Error::InvalidState("non-finite entries".into()));
        }
        let herm = self.0.hermiticity_defect();
        if herm > T::lit(HERMITIAN_TOL) {
            return Err(Error::InvalidState(format!(
                "not Hermitian (defect {:e})",
                herm.as_f64()
            )));
        }
        let tr = self.0.trace();
        if (tr.re - T::one()).abs() > T::lit(TRACE_TOL) || tr.im.abs() > T::lit(TRACE_TOL) {
            return Err(Error::InvalidState(format!(
                "trace {} + {}i differs from 1",
                tr.re, tr.im
            )));
        }
        let lowest = self.eigenvalues()[0];
        if lowest < -T::lit(PSD_TOL) {
            return Err(Error::InvalidState(format!(
                "negative eigenvalue {:e}",
                lowest.as_f64()
            )));
        }
        Ok(())
    }

    /// `|ψ⟩⟨ψ|` for a normalised copy of `psi`.
    pub fn pure(psi: &CVector<T, DIM>) -> Result<Self> {
        let norm = crate::linalg::vec_norm(psi);
        if !(norm > T::zero()) || !norm.is_finite() {
            return Err(Error::InvalidState("state vector has zero norm".into()));
        }
        let v = psi.map(|z| z / norm);
        Ok(Self(Matrix5::outer(&v, &v)))
    }

    /// Basis projector for matrix index `index` (0 ↔ m_F = +2).
    pub fn basis(index: usize) -> Self {
        assert!(index < DIM, "basis index {index} out of range");
        let mut m = Matrix5::zeros();
        m[(index, index)] = C::new(T::one(), T::zero());
        Self(m)
    }

    /// Diagonal state with the given populations.
    pub fn diagonal(populations: &[T; DIM]) -> Result<Self> {
        Self::new(Matrix5::from_real_diagonal(populations))
    }

    pub fn maximally_mixed() -> Self {
        Self(Matrix5::from_real_diagonal(&[T::one() / T::lit(DIM as f64); DIM]))
    }

    /// `(|+2⟩ + |−2⟩)/√2`.
    pub fn stretched_superposition() -> Self {
        let s = T::lit(0.5).sqrt();
        let mut psi = [re(T::zero()); DIM];
        psi[0] = re(s);
        psi[DIM - 1] = re(s);
        Self(Matrix5::outer(&psi, &psi))
    }

    pub fn matrix(&self) -> &Matrix5<T> {
        &self.0
    }

    /// Real diagonal, m_F = +2 first.
    pub fn populations(&self) -> [T; DIM] {
        self.0.real_diagonal()
    }

    pub fn trace(&self) -> T {
        self.0.trace().re
    }

    /// `Tr ρ²`.
    pub fn purity(&self) -> T {
        self.0
            .data
            .iter()
            .flat_map(|r| r.iter())
            .map(|z| z.norm_sqr())
            .sum()
    }

    pub fn eigenvalues(&self) -> [T; DIM] {
        self.0.hermitian_eigen().values
    }

    pub fn is_pure(&self, tol: T) -> bool {
        self.purity() >= T::one() - tol
    }

    /// Principal eigenvector of a (nearly) pure state.
    pub fn principal_vector(&self) -> CVector<T, DIM> {
        let eig = self.0.hermitian_eigen();
        eig.vector(DIM - 1)
    }

    /// `Tr[self · other]`, real part.
    pub fn overlap(&self, other: &Self) -> T {
        let mut acc = T::zero();
        for i in 0..DIM {
            for j in 0..DIM {
                let a = self.0[(i, j)];
                let b = other.0[(j, i)];
                acc += a.re * b.re - a.im * b.im;
            }
        }
        acc
    }
}

/// Named initial states accepted by the CLI and configs.
pub fn named_state<T: Real>(name: &str) -> Option<DensityMatrix<T>> {
    let rho = match name {
        "plus2" => DensityMatrix::basis(0),
        "plus1" => DensityMatrix::basis(1),
        "zero" => DensityMatrix::basis(2),
        "minus1" => DensityMatrix::basis(3),
        "minus2" => DensityMatrix::basis(4),
        "stretched_superposition" => DensityMatrix::stretched_superposition(),
        "mixed" => DensityMatrix::maximally_mixed(),
        _ => return None,
    };
    Some(rho)
}

pub const STATE_NAMES: [&str; 7] = [
    "plus2",
    "plus1",
    "zero",
    "minus1",
    "minus2",
    "stretched_superposition",
    "mixed",
];

/// JSON form of a density matrix: separate real and imaginary row arrays.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateFile {
    pub re: [[f64; DIM]; DIM],
    pub im: [[f64; DIM]; DIM],
}

impl DensityMatrix<f64> {
    pub fn to_file(&self) -> StateFile {
        let mut re = [[0.0; DIM]; DIM];
        let mut im = [[0.0; DIM]; DIM];
        for i in 0..DIM {
            for j in 0..DIM {
                re[i][j] = self.0[(i, j)].re;
                im[i][j] = self.0[(i, j)].im;
            }
        }
        StateFile { re, im }
    }

    pub fn from_file(file: &StateFile) -> Result<Self> {
        let mut m = Matrix5::zeros();
        for i in 0..DIM {
            for j in 0..DIM {
                m[(i, j)] = C::new(file.re[i][j], file.im[i][j]);
            }
        }
        Self::new(m)
    }
}
