// Copyright 2026 The qundo Authors
// SPDX-License-Identifier: Apache-2.0

//! Zeeman sub-levels of the ⁸⁷Rb F = 2 ground manifold.
//!
//! Energies come from the Breit–Rabi formula for the upper hyperfine
//! manifold and are re-referenced so that |F=2, m_F=0⟩ sits at zero. Index 0
//! is m_F = +2 everywhere in the crate.

use crate::error::{Error, Result};
use crate::hamiltonian::HamiltonianMatrix;
use crate::scalar::Real;
use crate::{Matrix5, DIM};

/// Upper edge of the field range handled here. Well below the Paschen–Back
/// crossover (~2.4 kG for ⁸⁷Rb).
pub const MAX_FIELD_GAUSS: f64 = 1000.0;

/// Magnetic quantum number stored at matrix index `i`.
#[inline]
pub fn m_f(index: usize) -> i32 {
    2 - index as i32
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhysicalConstants<T: Real> {
    /// Ground-state hyperfine interval, rad/s.
    pub hyperfine_splitting: T,
    pub electron_g_factor: T,
    /// Signed; negative for ⁸⁷Rb.
    pub nuclear_g_factor: T,
    /// μ_B/ħ in rad/s per gauss.
    pub bohr_magneton_over_hbar: T,
    pub nuclear_spin: T,
}

impl<T: Real> PhysicalConstants<T> {
    /// Published ⁸⁷Rb D-line reference values.
    pub fn rb87() -> Self {
        let tau = T::two_pi();
        Self {
            hyperfine_splitting: tau * T::lit(6.834_682_610_904_29e9),
            electron_g_factor: T::lit(2.002_331_13),
            nuclear_g_factor: T::lit(-0.000_995_141_4),
            bohr_magneton_over_hbar: tau * T::lit(1.399_624_493_61e6),
            nuclear_spin: T::lit(1.5),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("hyperfine_splitting", self.hyperfine_splitting),
            ("electron_g_factor", self.electron_g_factor),
            ("bohr_magneton_over_hbar", self.bohr_magneton_over_hbar),
            ("nuclear_spin", self.nuclear_spin),
        ];
        for (name, v) in positive {
            if !(v > T::zero()) || !v.is_finite() {
                return Err(Error::domain(name, v.as_f64(), "(0, inf)"));
            }
        }
        if !self.nuclear_g_factor.is_finite() {
            return Err(Error::domain(
                "nuclear_g_factor",
                self.nuclear_g_factor.as_f64(),
                "finite",
            ));
        }
        Ok(())
    }

    /// Landé factor of the F = 2 manifold in the weak-field limit.
    pub fn lande_g_f2(&self) -> T {
        let i = self.nuclear_spin;
        let f = T::lit(2.0);
        let j = T::lit(0.5);
        let ff = f * (f + T::one());
        let jj = j * (j + T::one());
        let ii = i * (i + T::one());
        let two = T::lit(2.0);
        self.electron_g_factor * (ff - ii + jj) / (two * ff)
            + self.nuclear_g_factor * (ff + ii - jj) / (two * ff)
    }
}

impl<T: Real> Default for PhysicalConstants<T> {
    fn default() -> Self {
        Self::rb87()
    }
}

/// The five F = 2 sub-level energies (rad/s), m_F = +2 first.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LevelSet<T: Real> {
    pub energies: [T; DIM],
    pub bias_field: T,
}

impl<T: Real> LevelSet<T> {
    /// Energies divided by 2π, in kHz.
    pub fn energies_khz(&self) -> [T; DIM] {
        let k = T::two_pi() * T::lit(1e3);
        self.energies.map(|e| e / k)
    }
}

/// Breit–Rabi energies of the F = 2 sub-levels at field `bias_gauss`,
/// relative to m_F = 0.
pub fn breit_rabi_levels<T: Real>(
    bias_gauss: T,
    constants: &PhysicalConstants<T>,
) -> Result<LevelSet<T>> {
    constants.validate()?;
    if !(bias_gauss >= T::zero()) || !(bias_gauss < T::lit(MAX_FIELD_GAUSS)) {
        return Err(Error::domain(
            "bias field (G)",
            bias_gauss.as_f64(),
            format!("[0, {MAX_FIELD_GAUSS})"),
        ));
    }
    let c = constants;
    let two_i_plus_one = T::lit(2.0) * c.nuclear_spin + T::one();
    let x = (c.electron_g_factor - c.nuclear_g_factor) * c.bohr_magneton_over_hbar * bias_gauss
        / c.hyperfine_splitting;
    let root0 = (T::one() + x * x).sqrt();
    let half_split = c.hyperfine_splitting / T::lit(2.0);

    let mut energies = [T::zero(); DIM];
    for (idx, e) in energies.iter_mut().enumerate() {
        let m = T::from_i32(m_f(idx)).unwrap();
        let linear = T::lit(4.0) * m * x / two_i_plus_one;
        let root = (T::one() + linear + x * x).sqrt();
        // sqrt(a) - sqrt(b) written without cancellation.
        let root_diff = linear / (root + root0);
        *e = c.nuclear_g_factor * c.bohr_magneton_over_hbar * m * bias_gauss + half_split * root_diff;
    }
    energies[2] = T::zero();
    Ok(LevelSet {
        energies,
        bias_field: bias_gauss,
    })
}

/// Diagonal drift Hamiltonian `H₀` (ħ = 1).
pub fn drift_hamiltonian<T: Real>(levels: &LevelSet<T>) -> HamiltonianMatrix<T> {
    HamiltonianMatrix(Matrix5::from_real_diagonal(&levels.energies))
}

#[cfg(test)]
mod tests {
    use super::*;

    const REFERENCE_KHZ: [f64; 5] = [8635.0, 4320.0, 0.0, -4326.0, -8657.0];

    #[test]
    fn reproduces_reference_diagonal() {
        let levels = breit_rabi_levels(6.179, &PhysicalConstants::rb87()).unwrap();
        let khz = levels.energies_khz();
        for (got, want) in khz.iter().zip(REFERENCE_KHZ) {
            assert!((got - want).abs() <= 2.0, "{got} vs {want}");
        }
        assert_eq!(khz[2], 0.0);
        assert!(khz.windows(2).all(|w| w[0] > w[1]));
    }

    #[test]
    fn zero_field_is_degenerate() {
        let levels = breit_rabi_levels(0.0, &PhysicalConstants::rb87()).unwrap();
        assert_eq!(levels.energies, [0.0; 5]);
        let h0 = drift_hamiltonian(&levels);
        assert_eq!(h0.0, Matrix5::zeros());
    }

    #[test]
    fn weak_field_is_linear_zeeman() {
        let c = PhysicalConstants::<f64>::rb87();
        let b = 0.1;
        let levels = breit_rabi_levels(b, &c).unwrap();
        // Independent small-field oracle: ħω = g_F μ_B m_F B with g_F = 1/2.
        let per_m = 0.5 * c.bohr_magneton_over_hbar * b;
        assert!((per_m / (2.0 * std::f64::consts::PI * 1e3) - 69.98).abs() < 0.01);
        for idx in 0..5 {
            let m = m_f(idx) as f64;
            if m == 0.0 {
                continue;
            }
            let oracle = per_m * m;
            assert!(((levels.energies[idx] - oracle) / oracle).abs() < 5e-3);
        }
        assert!((c.lande_g_f2() - 0.5).abs() < 2e-3);
    }

    #[test]
    fn nonlinear_zeeman_second_difference() {
        let levels = breit_rabi_levels(6.179, &PhysicalConstants::rb87()).unwrap();
        let e = levels.energies_khz();
        let dd: f64 = (e[0] - e[1]) - (e[1] - e[2]);
        assert!(dd.abs() > 1.0, "second difference {dd} kHz");
    }

    #[test]
    fn drift_is_diagonal_hermitian() {
        let levels = breit_rabi_levels(6.179, &PhysicalConstants::rb87()).unwrap();
        let h0 = drift_hamiltonian(&levels).0;
        for i in 0..5 {
            for j in 0..5 {
                if i != j {
                    assert_eq!(h0[(i, j)].norm(), 0.0);
                }
            }
            assert_eq!(h0[(i, i)].re, levels.energies[i]);
        }
        assert_eq!(h0.hermiticity_defect(), 0.0);
    }

    #[test]
    fn rejects_out_of_range_fields() {
        let c = PhysicalConstants::rb87();
        for b in [-0.1, 1000.0, f64::NAN, f64::INFINITY] {
            let err = breit_rabi_levels(b, &c).unwrap_err();
            assert!(err.to_string().contains("[0, 1000)"), "{err}");
        }
    }

    #[test]
    fn single_precision_agrees() {
        let levels = breit_rabi_levels(6.179f32, &PhysicalConstants::rb87()).unwrap();
        let khz = levels.energies_khz();
        for (got, want) in khz.iter().zip(REFERENCE_KHZ) {
            assert!((*got as f64 - want).abs() <= 2.5);
        }
    }
}
