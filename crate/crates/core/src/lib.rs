// Copyright 2026 The qundo Authors
// SPDX-License-Identifier: Apache-2.0

//! Optimal time-reversal ("quantum undo") engine for the five Zeeman
//! sub-levels of the ⁸⁷Rb F = 2 ground state.
//!
//! The numerical core is generic over [`Real`] (`f32` or `f64`); the aliases
//! at the crate root fix it to `f64`, which is what every tolerance in the
//! test suites assumes.

pub mod dynamics;
pub mod error;
pub mod experiments;
pub mod hamiltonian;
pub mod levels;
pub mod linalg;
pub mod metrics;
pub mod optimizer;
pub mod pulse;
pub mod scalar;
pub mod state;

pub use error::{Error, Result};
pub use scalar::Real;

/// Dimension of the F = 2 manifold.
pub const DIM: usize = 5;

/// Generic 5×5 complex matrix.
pub type Matrix5<T> = linalg::CMatrix<T, DIM>;

pub type DensityMatrix = state::DensityMatrix<f64>;
pub type HamiltonianMatrix = hamiltonian::HamiltonianMatrix<f64>;
pub type ControlCoupling = hamiltonian::ControlCoupling<f64>;
pub type SystemModel = hamiltonian::SystemModel<f64>;
pub type PhysicalConstants = levels::PhysicalConstants<f64>;
pub type LevelSet = levels::LevelSet<f64>;
pub type Pulse = pulse::Pulse<f64>;
pub type HarmonicBasis = pulse::HarmonicBasis<f64>;
pub type NoiseModel = dynamics::NoiseModel<f64>;
pub type Trajectory = dynamics::Trajectory<f64>;
pub type Objective = optimizer::Objective<f64>;
pub type OptimizerConfig = optimizer::OptimizerConfig<f64>;
pub type OptimizationRun = optimizer::OptimizationRun<f64>;
pub type ComparisonReport = metrics::ComparisonReport<f64>;
