// Copyright 2026 The qundo Authors
// SPDX-License-Identifier: Apache-2.0

//! Pulse design: dCRAB over the harmonic basis, searched with subplex.
//!
//! Each super-iteration draws a harmonic basis (the plain Fourier set first,
//! randomly dressed frequencies afterwards), freezes the best waveform found
//! so far, and optimises additive corrections on top of it. The figure of
//! merit is the population error at the end of the pulse.

pub mod subplex;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dynamics::{
    evolve_unitary_final, propagate_gksl_sampled, sample_controls, controls_from_samples, sample_seed, NoiseModel, TimeGrid, DEFAULT_DT,
};
use crate::error::{Error, Result};
use crate::hamiltonian::SystemModel;
use crate::pulse::{basis_value, HarmonicBasis, Pulse, DEFAULT_CARRIER_KHZ, DEFAULT_CLAMP_KHZ};
use crate::scalar::Real;
use crate::state::DensityMatrix;
use crate::DIM;

pub use crate::metrics::error_function;
pub use subplex::{subplex_minimize, SubplexCoefficients, SubplexResult, SubplexSettings, Termination};

/// Tolerance on the target population sum.
const TARGET_SUM_TOL: f64 = 1e-9;

/// What a pulse must achieve: drive `initial_state` to `target_populations`
/// in `duration` under `system`, optionally with noise.
#[derive(Clone, Debug, PartialEq)]
pub struct Objective<T: Real> {
    pub initial_state: DensityMatrix<T>,
    pub target_populations: [T; DIM],
    pub system: SystemModel<T>,
    /// Pulse length, seconds.
    pub duration: T,
    pub noise: Option<NoiseModel<T>>,
    pub carrier_khz: T,
    pub clamp_khz: [T; 2],
    /// Propagation step, seconds.
    pub dt: T,
}

impl<T: Real> Objective<T> {
    /// Objective with the default carrier, clamp window and step.
    pub fn new(
        initial_state: DensityMatrix<T>,
        target_populations: [T; DIM],
        system: SystemModel<T>,
        duration: T,
    ) -> Self {
        Self {
            initial_state,
            target_populations,
            system,
            duration,
            noise: None,
            carrier_khz: T::lit(DEFAULT_CARRIER_KHZ),
            clamp_khz: DEFAULT_CLAMP_KHZ.map(T::lit),
            dt: T::lit(DEFAULT_DT),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.initial_state
            .validate()
            .map_err(|e| e.context("objective initial state"))?;
        let mut sum = T::zero();
        for &p in &self.target_populations {
            if !(p >= T::zero() && p <= T::one()) {
                return Err(Error::domain("target population", p.as_f64(), "[0, 1]"));
            }
            sum += p;
        }
        if (sum - T::one()).abs() > T::lit(TARGET_SUM_TOL) {
            return Err(Error::Precondition(format!(
                "target populations sum to {sum}, expected 1"
            )));
        }
        if !(self.duration > T::zero()) || !self.duration.is_finite() {
            return Err(Error::domain("duration (s)", self.duration.as_f64(), "(0, inf)"));
        }
        if !(self.dt > T::zero()) || !self.dt.is_finite() {
            return Err(Error::domain("dt (s)", self.dt.as_f64(), "(0, inf)"));
        }
        if let Some(noise) = &self.noise {
            noise.validate()?;
        }
        self.template().map(|_| ())
    }

    /// Carrier-only pulse with this objective's duration and window.
    pub fn template(&self) -> Result<Pulse<T>> {
        Pulse::from_parts(
            self.duration * T::lit(1e6),
            self.carrier_khz,
            self.clamp_khz,
            Vec::new(),
        )
    }

    /// Step used for propagation, never longer than the pulse.
    fn step(&self) -> T {
        self.dt.min(self.duration)
    }

    /// Final state reached by `pulse` from the initial state.
    pub fn final_state(&self, pulse: &Pulse<T>) -> Result<DensityMatrix<T>> {
        let grid = TimeGrid::new(pulse.duration(), self.step())?;
        self.final_state_sampled(&sample_controls(pulse, &grid), &grid)
    }

    fn final_state_sampled(&self, controls: &[T], grid: &TimeGrid<T>) -> Result<DensityMatrix<T>> {
        match &self.noise {
            None => evolve_unitary_final(&self.initial_state, controls, grid, &self.system),
            Some(noise) => {
                let traj =
                    propagate_gksl_sampled(&self.initial_state, controls, grid, &self.system, noise, 0)?;
                Ok(*traj.final_state())
            }
        }
    }

    /// ε reached by `pulse`.
    pub fn epsilon(&self, pulse: &Pulse<T>) -> Result<T> {
        Ok(error_function(&self.final_state(pulse)?, &self.target_populations))
    }
}

/// Search settings for [`dcrab_optimize`].
#[derive(Clone, Debug, PartialEq)]
pub struct OptimizerConfig<T: Real> {
    /// Objective evaluations per super-iteration.
    pub max_evaluations: usize,
    pub super_iterations: usize,
    pub subspace_size_range: [usize; 2],
    /// Initial simplex edge in amplitude units.
    pub initial_step: T,
    /// Relative objective tolerance per subplex cycle.
    pub ftol: T,
    /// Relative step-size tolerance.
    pub xtol: T,
    /// Stop a stage once ε falls to this value.
    pub stop_value: Option<T>,
    pub rng_seed: u64,
    /// Randomise basis frequencies after the first super-iteration.
    pub dressing: bool,
    /// Harmonics per basis (two real parameters each).
    pub harmonics: usize,
}

impl<T: Real> Default for OptimizerConfig<T> {
    fn default() -> Self {
        Self {
            max_evaluations: 4000,
            super_iterations: 3,
            subspace_size_range: [2, 5],
            initial_step: T::lit(0.02),
            ftol: T::lit(1e-6),
            xtol: T::lit(1e-10),
            stop_value: None,
            rng_seed: 0,
            dressing: true,
            harmonics: crate::pulse::DEFAULT_HARMONICS,
        }
    }
}

impl<T: Real> OptimizerConfig<T> {
    pub fn dimension(&self) -> usize {
        2 * self.harmonics
    }

    pub fn validate(&self) -> Result<()> {
        if self.harmonics == 0 {
            return Err(Error::Precondition("at least one harmonic is required".into()));
        }
        if self.super_iterations == 0 {
            return Err(Error::Precondition("super_iterations must be at least 1".into()));
        }
        subplex::validate_settings(&self.subplex_settings(), self.dimension())
    }

    pub fn subplex_settings(&self) -> SubplexSettings<T> {
        SubplexSettings {
            max_evaluations: self.max_evaluations,
            subspace_size_range: self.subspace_size_range,
            initial_step: self.initial_step,
            ftol: self.ftol,
            xtol: self.xtol,
            stop_value: self.stop_value,
            coefficients: SubplexCoefficients::default(),
        }
    }
}

/// One super-iteration of a dCRAB run.
#[derive(Clone, Debug, PartialEq)]
pub struct StageRecord<T: Real> {
    pub basis: HarmonicBasis<T>,
    pub coefficients: Vec<T>,
    /// Best ε after this stage.
    pub epsilon: T,
    pub evaluations: usize,
    pub termination: Termination,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OptimizationRun<T: Real> {
    /// `(Re A, Im A)` pairs of every harmonic in `resulting_pulse`.
    pub best_coefficients: Vec<T>,
    pub best_epsilon: T,
    pub evaluation_count: usize,
    /// `(evaluation index, best-so-far ε)`, one entry per improvement.
    pub history: Vec<(usize, T)>,
    pub resulting_pulse: Pulse<T>,
    pub stages: Vec<StageRecord<T>>,
}

/// Fast objective for one stage: the frozen baseline sampled at step
/// sample times plus a table of basis values, so each evaluation costs one
/// propagation and a small dot product per step.
pub struct PulseEvaluator<'a, T: Real> {
    objective: &'a Objective<T>,
    grid: TimeGrid<T>,
    baseline: Vec<T>,
    table: Vec<T>,
    dimension: usize,
    clamp: [T; 2],
    unclamped: Vec<T>,
    controls: Vec<T>,
}

impl<'a, T: Real> PulseEvaluator<'a, T> {
    /// `baseline` must be a forward pulse of the objective's duration.
    pub fn new(
        objective: &'a Objective<T>,
        baseline: &Pulse<T>,
        basis: &HarmonicBasis<T>,
    ) -> Result<Self> {
        if baseline.is_reversed() || baseline.is_negated() || baseline.start_us() != T::zero() {
            return Err(Error::Precondition(
                "optimisation baseline must be an unmodified forward pulse".into(),
            ));
        }
        let grid = TimeGrid::new(baseline.duration(), objective.step())?;
        let dimension = basis.dimension();
        let two_w0 = T::lit(2.0) * baseline.carrier();
        let nus: Vec<T> = basis
            .entries
            .iter()
            .map(|&(_, nu_khz)| nu_khz * T::lit(1e3) * T::two_pi())
            .collect();
        let points = 3 * grid.len() + 1;
        let mut table = Vec::with_capacity(points * dimension);
        let mut base = Vec::with_capacity(points);
        for t in grid.sample_times() {
            base.push(baseline.unclamped(t));
            for &nu in &nus {
                let b = basis_value(nu, t);
                table.push(two_w0 * b.re);
                table.push(-two_w0 * b.im);
            }
        }
        Ok(Self {
            objective,
            unclamped: vec![T::zero(); points],
            controls: Vec::with_capacity(2 * grid.len()),
            grid,
            baseline: base,
            table,
            dimension,
            clamp: baseline.clamp_range(),
        })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    /// Final state for correction coefficients `coeffs`.
    pub fn final_state(&mut self, coeffs: &[T]) -> Result<DensityMatrix<T>> {
        assert_eq!(coeffs.len(), self.dimension, "coefficient length");
        let n = self.dimension;
        for (i, (u, &b)) in self.unclamped.iter_mut().zip(&self.baseline).enumerate() {
            let row = &self.table[i * n..(i + 1) * n];
            let mut f = b;
            for (r, x) in row.iter().zip(coeffs) {
                f += *r * *x;
            }
            *u = f;
        }
        controls_from_samples(&self.unclamped, self.clamp, &mut self.controls);
        self.objective.final_state_sampled(&self.controls, &self.grid)
    }

    pub fn epsilon(&mut self, coeffs: &[T]) -> Result<T> {
        let rho = self.final_state(coeffs)?;
        Ok(error_function(&rho, &self.objective.target_populations))
    }
}

/// ε for basis coefficients `coeffs` on the carrier-only template.
pub fn evaluate_objective<T: Real>(
    coeffs: &[T],
    objective: &Objective<T>,
    basis: &HarmonicBasis<T>,
) -> Result<T> {
    if coeffs.len() != basis.dimension() {
        return Err(Error::Precondition(format!(
            "expected {} coefficients, got {}",
            basis.dimension(),
            coeffs.len()
        )));
    }
    let pulse = objective.template()?.with_added_harmonics(&basis.harmonics(coeffs))?;
    objective
        .epsilon(&pulse)
        .map_err(|e| e.context("objective evaluation"))
}

/// Basis for super-iteration `stage`.
pub fn stage_basis<T: Real>(config: &OptimizerConfig<T>, duration_us: T, stage: usize) -> HarmonicBasis<T> {
    if stage == 0 || !config.dressing {
        return HarmonicBasis::fourier(duration_us, config.harmonics);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(sample_seed(config.rng_seed, stage as u64));
    let shifts: Vec<T> = (0..config.harmonics)
        .map(|_| T::lit(rng.random_range(-0.5..0.5)))
        .collect();
    HarmonicBasis::shifted(duration_us, &shifts)
}

/// dCRAB search from the carrier-only pulse.
pub fn dcrab_optimize<T: Real>(
    objective: &Objective<T>,
    config: &OptimizerConfig<T>,
) -> Result<OptimizationRun<T>> {
    objective.validate()?;
    config.validate()?;
    let settings = config.subplex_settings();
    let mut pulse = objective.template()?;
    let mut best_epsilon = T::infinity();
    let mut history: Vec<(usize, T)> = Vec::new();
    let mut evaluations = 0usize;
    let mut stages = Vec::with_capacity(config.super_iterations);

    for stage in 0..config.super_iterations {
        let basis = stage_basis(config, pulse.duration_us(), stage);
        let mut evaluator = PulseEvaluator::new(objective, &pulse, &basis)?;
        let x0 = vec![T::zero(); basis.dimension()];
        let result = subplex_minimize(|x| evaluator.epsilon(x), &x0, &settings)
            .map_err(|e| e.context(format!("dCRAB super-iteration {}", stage + 1)))?;

        for &(idx, f) in &result.history {
            if f < best_epsilon {
                best_epsilon = f;
                history.push((evaluations + idx, f));
            }
        }
        evaluations += result.evaluations;
        if result.best_x.iter().any(|c| *c != T::zero()) {
            pulse = pulse.with_added_harmonics(&basis.harmonics(&result.best_x))?;
        }
        stages.push(StageRecord {
            basis,
            coefficients: result.best_x,
            epsilon: best_epsilon,
            evaluations: result.evaluations,
            termination: result.termination,
        });
        if matches!(config.stop_value, Some(v) if best_epsilon <= v) {
            break;
        }
    }

    let best_coefficients = pulse
        .harmonics()
        .iter()
        .flat_map(|h| [h.amplitude.re, h.amplitude.im])
        .collect();
    Ok(OptimizationRun {
        best_coefficients,
        best_epsilon,
        evaluation_count: evaluations,
        history,
        resulting_pulse: pulse,
        stages,
    })
}
