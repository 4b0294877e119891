// Copyright 2026 The qundo Authors
// SPDX-License-Identifier: Apache-2.0

//! State comparison: population error, Uhlmann fidelity and Loschmidt echo.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::state::{DensityMatrix, PSD_TOL};
use crate::DIM;

/// Eigenvalues at or below this are treated as exact zeros when taking
/// matrix square roots. Keeps rounding noise on rank-deficient states from
/// being amplified by `sqrt`.
pub const SQRT_CLIP: f64 = 1e-13;

/// Purity threshold for the echo's pure-initial-state precondition.
pub const PURE_TOL: f64 = 1e-6;

/// `½ Σ_n |p_n − q_n|` between two population vectors.
pub fn population_distance<T: Real>(p: &[T; DIM], q: &[T; DIM]) -> T {
    p.iter()
        .zip(q.iter())
        .map(|(a, b)| (*a - *b).abs())
        .sum::<T>()
        / T::lit(2.0)
}

/// Error function `ε = ½ Σ_n |ρ_nn − ρ̂_nn|`.
pub fn error_function<T: Real>(achieved: &DensityMatrix<T>, target_populations: &[T; DIM]) -> T {
    population_distance(&achieved.populations(), target_populations)
        .max(T::zero())
        .min(T::one())
}

fn check_psd<T: Real>(rho: &DensityMatrix<T>, which: &str) -> Result<[T; DIM]> {
    let eig = rho.eigenvalues();
    if eig[0] < -T::lit(PSD_TOL) {
        return Err(Error::InvalidState(format!(
            "{which} has eigenvalue {:e} below -{PSD_TOL:e}",
            eig[0].as_f64()
        )));
    }
    Ok(eig)
}

/// `F(a, b) = (Tr √(√a b √a))²`, clipped to `[0, 1]`.
pub fn uhlmann_fidelity<T: Real>(a: &DensityMatrix<T>, b: &DensityMatrix<T>) -> Result<T> {
    check_psd(a, "first state")?;
    check_psd(b, "second state")?;
    let clip = T::lit(SQRT_CLIP);
    let root_a = a.0.sqrt_psd(clip);
    let inner = (root_a * b.0 * root_a).hermitian_part();
    let eig = inner.hermitian_eigen();
    let trace_norm: T = eig
        .values
        .iter()
        .map(|&l| if l <= clip { T::zero() } else { l.sqrt() })
        .sum();
    Ok((trace_norm * trace_norm).max(T::zero()).min(T::one()))
}

/// `M = Tr[ρ_returned ρ(0)]` for a pure initial state.
pub fn loschmidt_echo<T: Real>(
    initial: &DensityMatrix<T>,
    returned: &DensityMatrix<T>,
) -> Result<T> {
    let purity = initial.purity();
    if purity < T::one() - T::lit(PURE_TOL) {
        return Err(Error::Precondition(format!(
            "echo needs a pure initial state, purity is {}",
            purity
        )));
    }
    Ok(initial.overlap(returned).max(T::zero()).min(T::one()))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport<T: Real> {
    pub epsilon: T,
    pub accuracy: T,
    #[serde(rename = "fidelity")]
    pub uhlmann_fidelity: T,
    #[serde(rename = "echo")]
    pub loschmidt_echo: Option<T>,
}

/// Bundles ε, 1 − ε, fidelity and (for a pure `initial`) the echo.
pub fn compare<T: Real>(
    target: &DensityMatrix<T>,
    achieved: &DensityMatrix<T>,
    initial: Option<&DensityMatrix<T>>,
) -> Result<ComparisonReport<T>> {
    let epsilon = error_function(achieved, &target.populations());
    let fidelity = uhlmann_fidelity(target, achieved)?;
    let echo = match initial {
        Some(init) if init.is_pure(T::lit(PURE_TOL)) => Some(loschmidt_echo(init, achieved)?),
        _ => None,
    };
    Ok(ComparisonReport {
        epsilon,
        accuracy: T::one() - epsilon,
        uhlmann_fidelity: fidelity,
        loschmidt_echo: echo,
    })
}
