// Copyright 2026 The qundo Authors
// SPDX-License-Identifier: Apache-2.0

//! Drift plus frequency-modulated RF control Hamiltonian, in the rotating
//! frame and with ħ = 1 (all entries are angular frequencies).

use crate::error::{Error, Result};
use crate::levels::{breit_rabi_levels, drift_hamiltonian, PhysicalConstants};
use crate::linalg::{re, RealTridiagonal};
use crate::pulse::Pulse;
use crate::scalar::Real;
use crate::{Matrix5, DIM};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HamiltonianMatrix<T: Real>(pub Matrix5<T>);

impl<T: Real> HamiltonianMatrix<T> {
    pub fn zeros() -> Self {
        Self(Matrix5::zeros())
    }

    pub fn matrix(&self) -> &Matrix5<T> {
        &self.0
    }

    pub fn is_hermitian(&self, rel_tol: T) -> bool {
        let scale = self.0.frobenius_norm().max(T::one());
        self.0.hermiticity_defect() <= rel_tol * scale
    }
}

impl<T: Real> std::ops::Add for HamiltonianMatrix<T> {
    type Output = Self;

    fn add(self, rhs: Self) -> Self {
        Self(self.0 + rhs.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ControlCoupling<T: Real> {
    /// Ω in rad/s.
    pub rabi_frequency: T,
}

impl<T: Real> ControlCoupling<T> {
    pub fn new(rabi_frequency: T) -> Result<Self> {
        if !(rabi_frequency > T::zero()) || !rabi_frequency.is_finite() {
            return Err(Error::domain(
                "Rabi frequency (rad/s)",
                rabi_frequency.as_f64(),
                "(0, inf)",
            ));
        }
        Ok(Self { rabi_frequency })
    }

    pub fn from_khz(rabi_khz: T) -> Result<Self> {
        Self::new(T::two_pi() * (rabi_khz * T::lit(1e3)))
    }

    /// Ω = 2π·60 kHz.
    pub fn default_rb87() -> Self {
        Self {
            rabi_frequency: T::two_pi() * T::lit(60.0e3),
        }
    }

    /// Zero coupling. Not a valid physical drive, only useful for analytic
    /// checks of the drift alone.
    pub fn off() -> Self {
        Self {
            rabi_frequency: T::zero(),
        }
    }
}

/// `⟨m|J_x|m-1⟩` for spin 2, listed from the m = +2 end.
pub fn spin2_jx_couplings<T: Real>() -> [T; DIM - 1] {
    let j = T::lit(2.0);
    std::array::from_fn(|i| {
        let m = T::from_i32(2 - i as i32).unwrap();
        (j * (j + T::one()) - m * (m - T::one())).sqrt() / T::lit(2.0)
    })
}

/// RF coupling in the rotating frame: diagonal `(-2f, -f, 0, f, 2f)` and
/// nearest-neighbour couplings `(Ω, √(3/2)Ω, √(3/2)Ω, Ω)`.
pub fn rf_hamiltonian<T: Real>(f_value: T, coupling: &ControlCoupling<T>) -> HamiltonianMatrix<T> {
    let mut m = Matrix5::zeros();
    let omega = coupling.rabi_frequency;
    let couplings = [
        T::one(),
        T::lit(1.5).sqrt(),
        T::lit(1.5).sqrt(),
        T::one(),
    ];
    for i in 0..DIM {
        m[(i, i)] = re(-T::from_i32(crate::levels::m_f(i)).unwrap() * f_value);
    }
    for (i, c) in couplings.iter().enumerate() {
        m[(i, i + 1)] = re(*c * omega);
        m[(i + 1, i)] = re(*c * omega);
    }
    HamiltonianMatrix(m)
}

/// `H(t) = H₀ + H_RF(f(t))`.
pub fn total_hamiltonian<T: Real>(
    t: T,
    pulse: &Pulse<T>,
    drift: &HamiltonianMatrix<T>,
    coupling: &ControlCoupling<T>,
) -> Result<HamiltonianMatrix<T>> {
    let f = pulse.evaluate(t)?;
    Ok(*drift + rf_hamiltonian(f, coupling))
}

/// Everything needed to build `H(t)` for a given pulse.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SystemModel<T: Real> {
    pub drift: HamiltonianMatrix<T>,
    pub coupling: ControlCoupling<T>,
    pub constants: PhysicalConstants<T>,
    /// Field the drift was computed at; `None` for hand-built drifts.
    pub bias_field: Option<T>,
}

impl<T: Real> SystemModel<T> {
    pub fn new(
        bias_gauss: T,
        coupling: ControlCoupling<T>,
        constants: PhysicalConstants<T>,
    ) -> Result<Self> {
        let levels = breit_rabi_levels(bias_gauss, &constants)?;
        Ok(Self {
            drift: drift_hamiltonian(&levels),
            coupling,
            constants,
            bias_field: Some(bias_gauss),
        })
    }

    /// B = 6.179 G, Ω = 2π·60 kHz, ⁸⁷Rb constants.
    pub fn rb87_default() -> Self {
        Self::new(
            T::lit(6.179),
            ControlCoupling::default_rb87(),
            PhysicalConstants::rb87(),
        )
        .expect("default field is in range")
    }

    pub fn with_drift(drift: HamiltonianMatrix<T>, coupling: ControlCoupling<T>) -> Self {
        Self {
            drift,
            coupling,
            constants: PhysicalConstants::rb87(),
            bias_field: None,
        }
    }

    /// Same model with the drift recomputed at another field.
    pub fn with_bias_field(&self, bias_gauss: T) -> Result<Self> {
        Self::new(bias_gauss, self.coupling, self.constants)
    }

    #[inline]
    pub fn hamiltonian_at(&self, f_value: T) -> HamiltonianMatrix<T> {
        self.drift + rf_hamiltonian(f_value, &self.coupling)
    }

    /// Band form of the model, available when the drift is real diagonal.
    pub fn banded(&self) -> Option<BandedModel<T>> {
        let drift = RealTridiagonal::from_matrix(&self.drift.0)?;
        if drift.off.iter().any(|&o| o != T::zero()) {
            return None;
        }
        let rf = RealTridiagonal::from_matrix(&rf_hamiltonian(T::zero(), &self.coupling).0)?;
        Some(BandedModel {
            drift: drift.diag,
            off: rf.off,
        })
    }
}

/// `H(f)` as a real tridiagonal matrix for fast propagation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BandedModel<T: Real> {
    drift: [T; DIM],
    off: [T; DIM],
}

impl<T: Real> BandedModel<T> {
    #[inline]
    pub fn at(&self, f_value: T) -> RealTridiagonal<T, DIM> {
        RealTridiagonal {
            diag: std::array::from_fn(|i| {
                self.drift[i] + -T::from_i32(crate::levels::m_f(i)).unwrap() * f_value
            }),
            off: self.off,
        }
    }
}
