// Copyright 2026 The qundo Authors
// SPDX-License-Identifier: Apache-2.0

//! Closed and dephasing-noisy propagation of the five-level density matrix.
//!
//! Each step uses the fourth-order commutator-free Magnus propagator
//! `U = exp(-i h (a2 H1 + a1 H2)) exp(-i h (a1 H1 + a2 H2))` with `H1`, `H2`
//! taken at the two Gauss nodes and `a1,2 = 1/4 ± √3/6`. The Hamiltonian is
//! affine in the control with `a1 + a2 = 1/2`, so each factor is an exact
//! half-step exponential of `H` at an effective control value and every
//! factor is unitary.
//! Open dynamics integrate the GKSL equation with pure-dephasing dissipators
//! by classical RK4 in the interaction picture of that same step propagator,
//! so that with all rates at zero they coincide with the closed evolution.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::hamiltonian::{BandedModel, SystemModel};
use crate::linalg::{apply_unitary_exp, CVector};
use crate::pulse::Pulse;
use crate::scalar::{Real, C};
use crate::state::DensityMatrix;
use crate::{Matrix5, DIM};

/// Default step: 10 ns.
pub const DEFAULT_DT: f64 = 10e-9;
/// Default number of quasi-static field draws.
pub const DEFAULT_FIELD_SAMPLES: usize = 32;

/// Real diagonal of `rho`, m_F = +2 first.
pub fn populations<T: Real>(rho: &DensityMatrix<T>) -> [T; DIM] {
    rho.populations()
}

/// Uniform step grid over `[0, duration]`; the last step absorbs any
/// remainder.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimeGrid<T: Real> {
    duration: T,
    dt: T,
    steps: usize,
}

impl<T: Real> TimeGrid<T> {
    pub fn new(duration: T, dt: T) -> Result<Self> {
        if !(duration > T::zero()) || !duration.is_finite() {
            return Err(Error::domain("duration (s)", duration.as_f64(), "(0, inf)"));
        }
        if !(dt > T::zero()) || !(dt <= duration * (T::one() + T::lit(1e-12))) {
            return Err(Error::domain(
                "dt (s)",
                dt.as_f64(),
                format!("(0, {:e}]", duration.as_f64()),
            ));
        }
        let ratio = duration / dt;
        let nearest = ratio.round();
        let steps = if (ratio - nearest).abs() <= T::lit(1e-9) * nearest {
            nearest
        } else {
            ratio.ceil()
        };
        let steps = steps.to_usize().unwrap_or(1).max(1);
        Ok(Self { duration, dt, steps })
    }

    pub fn len(&self) -> usize {
        self.steps
    }

    pub fn is_empty(&self) -> bool {
        self.steps == 0
    }

    pub fn duration(&self) -> T {
        self.duration
    }

    pub fn dt(&self) -> T {
        self.dt
    }

    /// `(start, length)` of step `i`.
    #[inline]
    pub fn step(&self, i: usize) -> (T, T) {
        let start = self.dt * T::from_usize(i).unwrap();
        if i + 1 == self.steps {
            (start, self.duration - start)
        } else {
            (start, self.dt)
        }
    }

    #[inline]
    pub fn end_time(&self, i: usize) -> T {
        if i + 1 == self.steps {
            self.duration
        } else {
            self.dt * T::from_usize(i + 1).unwrap()
        }
    }

    /// Start and both Gauss nodes of every step, then the end of the grid:
    /// `3 len + 1` times in order.
    pub fn sample_times(&self) -> impl Iterator<Item = T> + '_ {
        let d = T::lit(3.0).sqrt() / T::lit(6.0);
        let half = T::lit(0.5);
        (0..self.steps)
            .flat_map(move |i| {
                let (s, h) = self.step(i);
                [s, s + h * (half - d), s + h * (half + d)]
            })
            .chain(std::iter::once(self.duration))
    }
}

/// Sub-intervals used to integrate a step across a clamp corner.
const CORNER_SUBSTEPS: usize = 64;

/// Node controls for the step whose unclamped values at its start, Gauss
/// nodes and end are `u`.
///
/// Where the clamp engages or releases inside the step the clamped control
/// has a corner and point samples lose their order. Those steps use the
/// zeroth and first moments of the clamped cubic through `u` instead,
/// mapped back to the node values of the linear function with the same
/// moments.
#[inline]
pub fn node_controls<T: Real>(u: [T; 4], clamp: [T; 2]) -> [T; 2] {
    let side = |x: T| {
        if x < clamp[0] {
            -1
        } else if x > clamp[1] {
            1
        } else {
            0
        }
    };
    let c = |x: T| x.max(clamp[0]).min(clamp[1]);
    let s0 = side(u[0]);
    if u[1..].iter().all(|&x| side(x) == s0) {
        return [c(u[1]), c(u[2])];
    }
    let d = T::lit(3.0).sqrt() / T::lit(6.0);
    let half = T::lit(0.5);
    let nodes = [-half, -d, d, half];
    let m = T::from_usize(CORNER_SUBSTEPS).unwrap();
    let (mut mu0, mut mu1) = (T::zero(), T::zero());
    for j in 0..CORNER_SUBSTEPS {
        let x = (T::from_usize(j).unwrap() + half) / m - half;
        let mut v = T::zero();
        for a in 0..4 {
            let mut w = T::one();
            for b in 0..4 {
                if a != b {
                    w = w * (x - nodes[b]) / (nodes[a] - nodes[b]);
                }
            }
            v += w * u[a];
        }
        let v = c(v);
        mu0 += v;
        mu1 += x * v;
    }
    mu0 /= m;
    mu1 /= m;
    let slope = T::lit(12.0) * mu1 * d;
    [mu0 - slope, mu0 + slope]
}

/// Node controls from unclamped values at [`TimeGrid::sample_times`].
pub fn controls_from_samples<T: Real>(unclamped: &[T], clamp: [T; 2], out: &mut Vec<T>) {
    out.clear();
    let steps = unclamped.len() / 3;
    for i in 0..steps {
        let u = [
            unclamped[3 * i],
            unclamped[3 * i + 1],
            unclamped[3 * i + 2],
            unclamped[3 * i + 3],
        ];
        out.extend(node_controls(u, clamp));
    }
}

/// Node controls of every step for `pulse`.
pub fn sample_controls<T: Real>(pulse: &Pulse<T>, grid: &TimeGrid<T>) -> Vec<T> {
    let unclamped: Vec<T> = grid.sample_times().map(|t| pulse.unclamped(t)).collect();
    let mut out = Vec::with_capacity(2 * grid.len());
    controls_from_samples(&unclamped, pulse.clamp_range(), &mut out);
    out
}

/// Effective controls of the two half-step factors, earlier factor first.
#[inline]
fn magnus_controls<T: Real>(f1: T, f2: T) -> (T, T) {
    let d = T::lit(3.0).sqrt() / T::lit(3.0);
    let half = T::lit(0.5);
    // 2 a1 = 1/2 + √3/3, 2 a2 = 1/2 - √3/3.
    let (w1, w2) = (half + d, half - d);
    (w1 * f1 + w2 * f2, w2 * f1 + w1 * f2)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory<T: Real> {
    pub times: Vec<T>,
    pub states: Vec<DensityMatrix<T>>,
    pub populations: Vec<[T; DIM]>,
}

impl<T: Real> Trajectory<T> {
    fn with_capacity(n: usize) -> Self {
        Self {
            times: Vec::with_capacity(n),
            states: Vec::with_capacity(n),
            populations: Vec::with_capacity(n),
        }
    }

    fn push(&mut self, t: T, rho: DensityMatrix<T>) {
        self.times.push(t);
        self.populations.push(rho.populations());
        self.states.push(rho);
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn final_state(&self) -> &DensityMatrix<T> {
        self.states.last().expect("trajectory has at least the initial point")
    }

    pub fn final_populations(&self) -> [T; DIM] {
        *self.populations.last().expect("non-empty trajectory")
    }

    pub fn purities(&self) -> Vec<T> {
        self.states.iter().map(|s| s.purity()).collect()
    }
}

/// Pure-state components `(weight, vector)` whose mixture is `rho`.
fn spectral_components<T: Real>(rho: &DensityMatrix<T>) -> Vec<(T, CVector<T, DIM>)> {
    let eig = rho.0.hermitian_eigen();
    (0..DIM)
        .filter(|&k| eig.values[k] != T::zero())
        .map(|k| (eig.values[k], eig.vector(k)))
        .collect()
}

fn mixture<T: Real>(components: &[(T, CVector<T, DIM>)]) -> DensityMatrix<T> {
    let mut m = Matrix5::zeros();
    for (w, v) in components {
        for i in 0..DIM {
            let vi = v[i] * *w;
            for j in 0..DIM {
                m.data[i][j] = m.data[i][j] + vi * v[j].conj();
            }
        }
    }
    DensityMatrix(m)
}

fn check_initial<T: Real>(rho0: &DensityMatrix<T>) -> Result<()> {
    rho0.validate()
        .map_err(|e| e.context("initial state"))
}

fn should_record(step: usize, total: usize, stride: usize) -> bool {
    step + 1 == total || (stride > 0 && (step + 1).is_multiple_of(stride))
}

/// Unitary evolution `ρ ← U ρ U†` with the step propagator above, recording
/// every `record_stride` steps plus the initial and final states.
pub fn propagate_unitary<T: Real>(
    rho0: &DensityMatrix<T>,
    pulse: &Pulse<T>,
    model: &SystemModel<T>,
    dt: T,
    record_stride: usize,
) -> Result<Trajectory<T>> {
    let grid = TimeGrid::new(pulse.duration(), dt)?;
    let controls = sample_controls(pulse, &grid);
    propagate_unitary_sampled(rho0, &controls, &grid, model, record_stride)
}

/// [`propagate_unitary`] driven by precomputed node controls.
///
/// The mixture is evolved through its spectral components, which applies the
/// same step propagator as `U ρ U†` at a fraction of the cost.
pub fn propagate_unitary_sampled<T: Real>(
    rho0: &DensityMatrix<T>,
    controls: &[T],
    grid: &TimeGrid<T>,
    model: &SystemModel<T>,
    record_stride: usize,
) -> Result<Trajectory<T>> {
    check_initial(rho0)?;
    assert_eq!(controls.len(), 2 * grid.len(), "two control values per step");
    let mut components = spectral_components(rho0);
    let capacity = grid.len().checked_div(record_stride).unwrap_or(0) + 2;
    let mut traj = Trajectory::with_capacity(capacity);
    traj.push(T::zero(), *rho0);
    let banded = model.banded();
    for (i, pair) in controls.chunks_exact(2).enumerate() {
        let (_, h) = grid.step(i);
        let half = h / T::lit(2.0);
        let (ga, gb) = magnus_controls(pair[0], pair[1]);
        match &banded {
            Some(band) => {
                let (ha, hb) = (band.at(ga), band.at(gb));
                for (_, v) in components.iter_mut() {
                    *v = hb.apply_exp(half, &ha.apply_exp(half, v));
                }
            }
            None => {
                let ha = model.hamiltonian_at(ga).0;
                let hb = model.hamiltonian_at(gb).0;
                for (_, v) in components.iter_mut() {
                    *v = apply_unitary_exp(&hb, half, &apply_unitary_exp(&ha, half, v));
                }
            }
        }
        if !components
            .iter()
            .all(|(_, v)| v.iter().all(|z| z.re.is_finite() && z.im.is_finite()))
        {
            return Err(Error::NumericFailure { step: i });
        }
        if should_record(i, grid.len(), record_stride) {
            traj.push(grid.end_time(i), mixture(&components));
        }
    }
    Ok(traj)
}

/// Final state only; the optimizer's inner loop.
pub fn evolve_unitary_final<T: Real>(
    rho0: &DensityMatrix<T>,
    controls: &[T],
    grid: &TimeGrid<T>,
    model: &SystemModel<T>,
) -> Result<DensityMatrix<T>> {
    let traj = propagate_unitary_sampled(rho0, controls, grid, model, 0)?;
    Ok(*traj.final_state())
}

#[derive(Clone, Debug, PartialEq)]
pub struct NoiseModel<T: Real> {
    /// γ_n in rad/s, m_F = +2 first.
    pub dephasing_rates: [T; DIM],
    /// Standard deviation of the quasi-static bias field, gauss.
    pub field_sigma: T,
    pub field_samples: usize,
    pub rng_seed: u64,
}

impl<T: Real> NoiseModel<T> {
    /// Equal dephasing rate `γ` on every sub-level.
    pub fn uniform(gamma: T, field_sigma: T, field_samples: usize, rng_seed: u64) -> Self {
        Self {
            dephasing_rates: [gamma; DIM],
            field_sigma,
            field_samples,
            rng_seed,
        }
    }

    /// `γ = 2π·gamma_hz`, `ΔB` given in mG.
    pub fn from_lab_units(gamma_hz: T, sigma_mg: T, field_samples: usize, rng_seed: u64) -> Self {
        Self::uniform(
            T::two_pi() * gamma_hz,
            sigma_mg * T::lit(1e-3),
            field_samples,
            rng_seed,
        )
    }

    pub fn noiseless() -> Self {
        Self::uniform(T::zero(), T::zero(), 1, 0)
    }

    pub fn validate(&self) -> Result<()> {
        for g in self.dephasing_rates {
            if !(g >= T::zero()) || !g.is_finite() {
                return Err(Error::domain("dephasing rate (rad/s)", g.as_f64(), "[0, inf)"));
            }
        }
        if !(self.field_sigma >= T::zero()) || !self.field_sigma.is_finite() {
            return Err(Error::domain(
                "field sigma (G)",
                self.field_sigma.as_f64(),
                "[0, inf)",
            ));
        }
        if self.field_samples < 1 {
            return Err(Error::Precondition("field_samples must be at least 1".into()));
        }
        Ok(())
    }

    /// Bias field for draw `sample`, from its own seeded stream.
    pub fn field_draw(&self, nominal: T, sample: usize) -> T {
        if self.field_sigma == T::zero() {
            return nominal;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(sample_seed(self.rng_seed, sample as u64));
        let normal = Normal::new(0.0, 1.0).expect("unit normal");
        let z: f64 = normal.sample(&mut rng);
        nominal + self.field_sigma * T::lit(z)
    }
}

/// SplitMix64 mix of `(seed, index)` into an independent stream seed.
pub fn sample_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Pure-dephasing dissipator
/// `L(ρ) = Σ_n γ_n [−{|n⟩⟨n|, ρ} + 2 |n⟩⟨n| ρ |n⟩⟨n|]`, which damps each
/// coherence `ρ_ij` at rate `γ_i + γ_j` and leaves populations alone.
pub fn dephasing_dissipator<T: Real>(rates: &[T; DIM], rho: &Matrix5<T>) -> Matrix5<T> {
    let mut out = Matrix5::zeros();
    for i in 0..DIM {
        for j in 0..DIM {
            if i != j {
                out.data[i][j] = rho.data[i][j] * (-(rates[i] + rates[j]));
            }
        }
    }
    out
}

/// Averaged GKSL trajectory over quasi-static field draws, recording every
/// step.
pub fn propagate_gksl<T: Real>(
    rho0: &DensityMatrix<T>,
    pulse: &Pulse<T>,
    model: &SystemModel<T>,
    noise: &NoiseModel<T>,
    dt: T,
) -> Result<Trajectory<T>> {
    propagate_gksl_strided(rho0, pulse, model, noise, dt, 1)
}

pub fn propagate_gksl_strided<T: Real>(
    rho0: &DensityMatrix<T>,
    pulse: &Pulse<T>,
    model: &SystemModel<T>,
    noise: &NoiseModel<T>,
    dt: T,
    record_stride: usize,
) -> Result<Trajectory<T>> {
    let grid = TimeGrid::new(pulse.duration(), dt)?;
    let controls = sample_controls(pulse, &grid);
    propagate_gksl_sampled(rho0, &controls, &grid, model, noise, record_stride)
}

/// GKSL propagation from precomputed node controls. Field draws run in
/// parallel; the average is accumulated in draw order.
pub fn propagate_gksl_sampled<T: Real>(
    rho0: &DensityMatrix<T>,
    controls: &[T],
    grid: &TimeGrid<T>,
    model: &SystemModel<T>,
    noise: &NoiseModel<T>,
    record_stride: usize,
) -> Result<Trajectory<T>> {
    propagate_gksl_segments(rho0, &[Segment { controls, grid }], model, noise, record_stride)
}

/// One pulse of a sequence played back to back.
#[derive(Clone, Copy, Debug)]
pub struct Segment<'a, T: Real> {
    pub controls: &'a [T],
    pub grid: &'a TimeGrid<T>,
}

/// GKSL propagation through consecutive pulses. Each field draw is held for
/// the whole sequence, so forward and backward halves of a round trip see
/// the same quasi-static offset.
pub fn propagate_gksl_segments<T: Real>(
    rho0: &DensityMatrix<T>,
    segments: &[Segment<'_, T>],
    model: &SystemModel<T>,
    noise: &NoiseModel<T>,
    record_stride: usize,
) -> Result<Trajectory<T>> {
    check_initial(rho0)?;
    noise.validate()?;
    if segments.is_empty() {
        return Err(Error::Precondition("no pulse segments to propagate".into()));
    }
    for seg in segments {
        assert_eq!(seg.controls.len(), 2 * seg.grid.len(), "two control values per step");
    }
    if noise.field_sigma > T::zero() && model.bias_field.is_none() {
        return Err(Error::Precondition(
            "field noise needs a model built from a bias field".into(),
        ));
    }

    let runs: Vec<Result<Trajectory<T>>> = (0..noise.field_samples)
        .into_par_iter()
        .map(|sample| {
            let sample_model = match model.bias_field {
                Some(b) if noise.field_sigma > T::zero() => {
                    model.with_bias_field(noise.field_draw(b, sample))?
                }
                _ => *model,
            };
            gksl_single(rho0, segments, &sample_model, &noise.dephasing_rates, record_stride)
        })
        .collect();

    let mut runs = runs.into_iter();
    let mut acc = runs.next().expect("at least one sample")?;
    let mut count = 1usize;
    for run in runs {
        let run = run?;
        for (a, b) in acc.states.iter_mut().zip(run.states.iter()) {
            a.0 = a.0 + b.0;
        }
        count += 1;
    }
    if count > 1 {
        let inv = T::one() / T::from_usize(count).unwrap();
        for s in acc.states.iter_mut() {
            s.0 = s.0.scale(inv);
        }
        for (p, s) in acc.populations.iter_mut().zip(acc.states.iter()) {
            *p = s.populations();
        }
    }
    Ok(acc)
}

/// `exp(-i H(g) s)` as a dense matrix.
fn dense_exp<T: Real>(model: &SystemModel<T>, banded: Option<&BandedModel<T>>, g: T, s: T) -> Matrix5<T> {
    match banded {
        Some(band) => {
            let ham = band.at(g);
            let mut u = Matrix5::zeros();
            for j in 0..DIM {
                let mut e = [C::new(T::zero(), T::zero()); DIM];
                e[j] = C::new(T::one(), T::zero());
                let col = ham.apply_exp(s, &e);
                for i in 0..DIM {
                    u.data[i][j] = col[i];
                }
            }
            u
        }
        None => model.hamiltonian_at(g).0.unitary_exp(s),
    }
}

/// Propagators from the step start to its middle and to its end, for node
/// controls `f1`, `f2`.
fn step_propagators<T: Real>(
    model: &SystemModel<T>,
    banded: Option<&BandedModel<T>>,
    f1: T,
    f2: T,
    h: T,
) -> (Matrix5<T>, Matrix5<T>) {
    let half = h / T::lit(2.0);
    let (ga, gb) = magnus_controls(f1, f2);
    let u_a = dense_exp(model, banded, ga, half);
    let u_b = dense_exp(model, banded, gb, half);
    (u_a, u_b * u_a)
}

fn gksl_single<T: Real>(
    rho0: &DensityMatrix<T>,
    segments: &[Segment<'_, T>],
    model: &SystemModel<T>,
    rates: &[T; DIM],
    record_stride: usize,
) -> Result<Trajectory<T>> {
    let total: usize = segments.iter().map(|s| s.grid.len()).sum();
    let capacity = total.checked_div(record_stride).unwrap_or(0) + 2;
    let dephasing = rates.iter().any(|&g| g > T::zero());
    let banded = model.banded();
    let mut traj = Trajectory::with_capacity(capacity);
    traj.push(T::zero(), *rho0);
    let mut rho = rho0.0;
    let two = T::lit(2.0);
    let sixth = T::one() / T::lit(6.0);
    let mut offset = T::zero();
    let mut global = 0usize;
    for seg in segments {
        for (i, pair) in seg.controls.chunks_exact(2).enumerate() {
            let (_, h) = seg.grid.step(i);
            let (u_half, u_full) = step_propagators(model, banded.as_ref(), pair[0], pair[1], h);
            if dephasing {
                let uh_dag = u_half.adjoint();
                let uf_dag = u_full.adjoint();
                // Interaction-picture generator at s ∈ {h/2, h}.
                let rhs = |u: &Matrix5<T>, u_dag: &Matrix5<T>, x: &Matrix5<T>| {
                    let lab = *u * *x * *u_dag;
                    *u_dag * dephasing_dissipator(rates, &lab) * *u
                };
                let k1 = dephasing_dissipator(rates, &rho);
                let k2 = rhs(&u_half, &uh_dag, &(rho + k1.scale(h / two)));
                let k3 = rhs(&u_half, &uh_dag, &(rho + k2.scale(h / two)));
                let k4 = rhs(&u_full, &uf_dag, &(rho + k3.scale(h)));
                let incr = (k1 + k2.scale(two) + k3.scale(two) + k4).scale(h * sixth);
                rho = u_full * (rho + incr) * uf_dag;
            } else {
                rho = u_full * rho * u_full.adjoint();
            }
            if !rho.is_finite() {
                return Err(Error::NumericFailure { step: global });
            }
            if should_record(global, total, record_stride) {
                traj.push(offset + seg.grid.end_time(i), DensityMatrix(rho));
            }
            global += 1;
        }
        offset += seg.grid.duration();
    }
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian::{ControlCoupling, HamiltonianMatrix};
    use crate::linalg::re;

    fn bare_rotation_model() -> SystemModel<f64> {
        SystemModel::with_drift(HamiltonianMatrix::zeros(), ControlCoupling::default_rb87())
    }

    fn zero_pulse(duration: f64) -> Pulse<f64> {
        Pulse::constant(duration, 0.0, [-1.0, 1.0]).unwrap()
    }

    #[test]
    fn node_controls_pass_smooth_steps_through() {
        let d = 3f64.sqrt() / 6.0;
        let u = [1.0 - 0.5, 1.0 - d, 1.0 + d, 1.0 + 0.5];
        assert_eq!(node_controls(u, [0.0, 10.0]), [u[1], u[2]]);
        assert_eq!(node_controls(u, [-5.0, -4.0]), [-4.0, -4.0]);
    }

    #[test]
    fn node_controls_keep_the_moments_of_a_clamp_corner() {
        // f(s) = min(s, 0.1) on [-1/2, 1/2].
        let d = 3f64.sqrt() / 6.0;
        let [f1, f2] = node_controls([-0.5, -d, d, 0.5], [-1.0, 0.1]);
        let mu0: f64 = (0.1f64.powi(2) - 0.25) / 2.0 + 0.1 * 0.4;
        let mu1: f64 = (0.1f64.powi(3) + 0.125) / 3.0 + 0.1 * (0.25 - 0.01) / 2.0;
        assert!(((f1 + f2) / 2.0 - mu0).abs() < 1e-4);
        assert!(((f2 - f1) / (4.0 * 3f64.sqrt()) - mu1).abs() < 1e-4);
    }

    #[test]
    fn grid_covers_duration() {
        let g = TimeGrid::<f64>::new(100e-6, 10e-9).unwrap();
        assert_eq!(g.len(), 10_000);
        let g = TimeGrid::<f64>::new(1e-6, 3e-7).unwrap();
        assert_eq!(g.len(), 4);
        let (s, h) = g.step(3);
        assert!((s + h - 1e-6).abs() < 1e-20);
        assert!(TimeGrid::new(1e-6, 2e-6).is_err());
        assert!(TimeGrid::new(1e-6, 0.0).is_err());
    }

    #[test]
    fn diagonal_states_are_fixed_without_drive() {
        let model = SystemModel::with_drift(
            SystemModel::<f64>::rb87_default().drift,
            ControlCoupling::off(),
        );
        let rho0 = DensityMatrix::diagonal(&[0.1, 0.2, 0.3, 0.15, 0.25]).unwrap();
        let pulse = zero_pulse(5e-6);
        let traj = propagate_unitary(&rho0, &pulse, &model, 1e-8, 10).unwrap();
        for s in &traj.states {
            assert!(s.0.max_abs_diff(&rho0.0) < 1e-14);
        }
    }

    #[test]
    fn spin2_rotation_matches_cos8() {
        let model = bare_rotation_model();
        let omega = model.coupling.rabi_frequency;
        let t_pi = std::f64::consts::PI / omega;
        let pulse = zero_pulse(t_pi);
        let traj = propagate_unitary(&DensityMatrix::basis(0), &pulse, &model, t_pi / 500.0, 5).unwrap();
        for (t, p) in traj.times.iter().zip(&traj.populations) {
            let want = (omega * t / 2.0).cos().powi(8);
            assert!((p[0] - want).abs() < 1e-9, "t={t}");
        }
        assert!(traj.final_populations()[4] > 1.0 - 1e-9);
    }

    #[test]
    fn gksl_without_noise_matches_unitary() {
        let model = SystemModel::<f64>::rb87_default();
        let pulse = Pulse::carrier_only(20e-6).unwrap();
        let rho0 = DensityMatrix::basis(0);
        let u = propagate_unitary(&rho0, &pulse, &model, 1e-8, 1).unwrap();
        let g = propagate_gksl(&rho0, &pulse, &model, &NoiseModel::noiseless(), 1e-8).unwrap();
        assert_eq!(u.len(), g.len());
        for (a, b) in u.states.iter().zip(&g.states) {
            assert!(a.0.max_abs_diff(&b.0) < 1e-7);
        }
    }

    #[test]
    fn coherence_decays_at_summed_rate() {
        // Two-level analytic oracle: each projector dissipator removes γ from
        // the shared coherence, dρ₁₂/dt = −(γ₁ + γ₂) ρ₁₂, so |ρ₁₂| ∝ e^{-2γt}.
        let gamma = std::f64::consts::TAU * 2e4;
        let model = SystemModel::with_drift(HamiltonianMatrix::zeros(), ControlCoupling::off());
        let pulse = zero_pulse(20e-6);
        let mut psi = [re(0.0); DIM];
        psi[0] = re(0.6);
        psi[1] = re(0.8);
        let rho0 = DensityMatrix::pure(&psi).unwrap();
        let mut noise = NoiseModel::uniform(0.0, 0.0, 1, 0);
        noise.dephasing_rates[0] = gamma;
        noise.dephasing_rates[1] = gamma;
        let traj = propagate_gksl(&rho0, &pulse, &model, &noise, 1e-8).unwrap();
        for (t, s) in traj.times.iter().zip(&traj.states) {
            let oracle = 0.48 * (-2.0 * gamma * t).exp();
            assert!((s.0[(0, 1)].norm() - oracle).abs() < 1e-10);
            assert!((s.populations()[0] - 0.36).abs() < 1e-12);
        }
    }

    #[test]
    fn dissipator_matches_projector_form() {
        let rates = [1.0, 2.0, 0.5, 0.0, 3.0];
        let mut rho = Matrix5::<f64>::zeros();
        for i in 0..5 {
            for j in 0..5 {
                rho.data[i][j] = C::new((i * 5 + j) as f64, (i as f64) - (j as f64));
            }
        }
        let mut oracle = Matrix5::zeros();
        for n in 0..5 {
            let mut p = Matrix5::zeros();
            p.data[n][n] = re(1.0);
            let anti = p * rho + rho * p;
            let sandwich = p * rho * p;
            oracle = oracle + (sandwich.scale(2.0) - anti).scale(rates[n]);
        }
        assert!(dephasing_dissipator(&rates, &rho).max_abs_diff(&oracle) < 1e-12);
    }

    #[test]
    fn dephasing_keeps_diagonal_states_diagonal() {
        let model = SystemModel::with_drift(
            SystemModel::<f64>::rb87_default().drift,
            ControlCoupling::off(),
        );
        let rho0 = DensityMatrix::diagonal(&[0.2, 0.2, 0.1, 0.4, 0.1]).unwrap();
        let noise = NoiseModel::from_lab_units(200.0, 0.0, 1, 0);
        let traj = propagate_gksl(&rho0, &zero_pulse(10e-6), &model, &noise, 1e-8).unwrap();
        for s in &traj.states {
            assert!(s.0.max_abs_diff(&rho0.0) < 1e-12);
        }
    }

    #[test]
    fn field_noise_is_seeded_and_needs_bias() {
        let noise = NoiseModel::<f64>::from_lab_units(20.0, 1.0, 4, 7);
        let a = noise.field_draw(6.179, 2);
        assert_eq!(a, noise.field_draw(6.179, 2));
        assert_ne!(a, noise.field_draw(6.179, 3));
        assert!((a - 6.179).abs() < 0.01);
        let model = bare_rotation_model();
        let err = propagate_gksl(&DensityMatrix::basis(0), &zero_pulse(1e-6), &model, &noise, 1e-8);
        assert!(err.is_err());
    }

    #[test]
    fn segments_chain_like_consecutive_runs() {
        let model = SystemModel::<f64>::rb87_default();
        let a = Pulse::carrier_only(3e-6).unwrap();
        let b = Pulse::constant(2e-6, std::f64::consts::TAU * 4.3e6, [0.0, 1e8]).unwrap();
        let ga = TimeGrid::new(a.duration(), 1e-8).unwrap();
        let gb = TimeGrid::new(b.duration(), 1e-8).unwrap();
        let (ca, cb) = (sample_controls(&a, &ga), sample_controls(&b, &gb));
        let noise = NoiseModel::from_lab_units(100.0, 0.0, 1, 0);
        let rho0 = DensityMatrix::basis(0);
        let joined = propagate_gksl_segments(
            &rho0,
            &[Segment { controls: &ca, grid: &ga }, Segment { controls: &cb, grid: &gb }],
            &model,
            &noise,
            1,
        )
        .unwrap();
        let first = propagate_gksl_sampled(&rho0, &ca, &ga, &model, &noise, 0).unwrap();
        let second =
            propagate_gksl_sampled(first.final_state(), &cb, &gb, &model, &noise, 0).unwrap();
        assert_eq!(joined.len(), ga.len() + gb.len() + 1);
        assert!((joined.times.last().unwrap() - 5e-6).abs() < 1e-18);
        assert!(joined.final_state().0.max_abs_diff(&second.final_state().0) < 1e-13);
    }

    #[test]
    fn invalid_noise_rejected() {
        let mut n = NoiseModel::<f64>::noiseless();
        n.field_samples = 0;
        assert!(n.validate().is_err());
        let n = NoiseModel::<f64>::uniform(-1.0, 0.0, 1, 0);
        assert!(n.validate().is_err());
    }
}
