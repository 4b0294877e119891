// Copyright 2026 The qundo Authors
// SPDX-License-Identifier: Apache-2.0

//! End-to-end drivers for the reversal experiments: forward and backward
//! round trips, truncated round trips with a dephasing band, undo to a past
//! state, and the superposition transfer check.
//!
//! Every task derives its own optimizer seed from the top-level seed and a
//! task key, so results do not depend on scheduling. Arms are merged sorted
//! by `(name, duration, seed)`.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{
    propagate_gksl_segments, propagate_unitary, sample_controls, sample_seed, Segment, TimeGrid,
    DEFAULT_DT, DEFAULT_FIELD_SAMPLES,
};
use crate::error::{Error, Result};
use crate::metrics::{error_function, loschmidt_echo, uhlmann_fidelity};
use crate::optimizer::dcrab_optimize;
use crate::pulse::{PulseFile, DEFAULT_CARRIER_KHZ, DEFAULT_CLAMP_KHZ};
use crate::{DensityMatrix, NoiseModel, Objective, OptimizerConfig, Pulse, SystemModel, Trajectory, DIM};

/// Average accuracy of the laboratory reversals.
pub const REFERENCE_LAB_ACCURACY: f64 = 0.92;
/// Laboratory accuracy of the undo-to-past experiment.
pub const REFERENCE_UNDO_ACCURACY: f64 = 0.973;
/// Parent pulse length, µs.
pub const PARENT_DURATION_US: f64 = 100.0;
/// Truncation points, µs.
pub const SWEEP_DURATIONS_US: [f64; 7] = [10.0, 20.0, 40.0, 60.0, 70.0, 80.0, 100.0];
/// Default past time for the undo experiment, µs.
pub const TAU_PAST_US: f64 = 33.0;

/// Populations of the initial state `|+2⟩⟨+2|`.
const INITIAL_POPULATIONS: [f64; DIM] = [1.0, 0.0, 0.0, 0.0, 0.0];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    ForwardBackward,
    TruncationSweep,
    UndoToPast,
    Figure3,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NamedTarget {
    pub name: String,
    pub populations: [f64; DIM],
}

impl NamedTarget {
    pub fn new(name: impl Into<String>, populations: [f64; DIM]) -> Self {
        Self {
            name: name.into(),
            populations,
        }
    }
}

/// The four round-trip targets, by their diagonals.
pub fn standard_targets() -> Vec<NamedTarget> {
    vec![
        NamedTarget::new("A", [0.5, 0.0, 0.0, 0.0, 0.5]),
        NamedTarget::new("B", [0.0, 0.5, 0.0, 0.5, 0.0]),
        NamedTarget::new("C", [0.5, 0.5, 0.0, 0.0, 0.0]),
        NamedTarget::new("D", [0.2; DIM]),
    ]
}

/// Looks up `A`…`D` by name.
pub fn named_target(name: &str) -> Option<NamedTarget> {
    standard_targets().into_iter().find(|t| t.name == name)
}

/// Dephasing band for the truncation sweep.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseBand {
    pub gamma_low_hz: f64,
    pub gamma_high_hz: f64,
    pub field_sigma_mg: f64,
    pub field_samples: usize,
}

impl Default for NoiseBand {
    fn default() -> Self {
        Self {
            gamma_low_hz: 20.0,
            gamma_high_hz: 200.0,
            field_sigma_mg: 1.0,
            field_samples: DEFAULT_FIELD_SAMPLES,
        }
    }
}

impl NoiseBand {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma_low_hz >= 0.0 && self.gamma_low_hz <= self.gamma_high_hz) {
            return Err(Error::Precondition(format!(
                "noise band needs 0 <= gamma_low ({}) <= gamma_high ({})",
                self.gamma_low_hz, self.gamma_high_hz
            )));
        }
        self.endpoint(self.gamma_high_hz, 0).validate()
    }

    fn endpoint(&self, gamma_hz: f64, seed: u64) -> NoiseModel {
        NoiseModel::from_lab_units(gamma_hz, self.field_sigma_mg, self.field_samples, seed)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    pub targets: Vec<NamedTarget>,
    /// Truncation points, seconds.
    pub durations: Vec<f64>,
    /// Past time for the undo experiment, seconds.
    pub tau_past: Option<f64>,
    pub noise_band: Option<NoiseBand>,
    pub seeds: Vec<u64>,
    /// Length of forward pulses, seconds.
    pub parent_duration: f64,
    pub system: SystemModel,
    pub optimizer: OptimizerConfig,
    pub dt: f64,
    pub carrier_khz: f64,
    pub clamp_khz: [f64; 2],
    /// Use `−f(T − t)` instead of `f(T − t)` for the naive arm.
    pub naive_negated: bool,
    /// Trajectory recording stride in steps; `None` records nothing.
    pub record_stride: Option<usize>,
    /// Directory for cached forward pulses.
    pub cache_dir: Option<PathBuf>,
}

impl ExperimentSpec {
    /// Defaults for `kind` matching the reference configuration.
    pub fn new(kind: ExperimentKind) -> Self {
        let targets = match kind {
            ExperimentKind::ForwardBackward => standard_targets(),
            ExperimentKind::TruncationSweep | ExperimentKind::UndoToPast => {
                vec![named_target("A").expect("A is defined")]
            }
            ExperimentKind::Figure3 => vec![NamedTarget::new("fig3", [0.0, 0.0, 0.0, 0.0, 1.0])],
        };
        Self {
            kind,
            targets,
            durations: match kind {
                ExperimentKind::TruncationSweep => SWEEP_DURATIONS_US.iter().map(|d| d * 1e-6).collect(),
                _ => Vec::new(),
            },
            tau_past: (kind == ExperimentKind::UndoToPast).then_some(TAU_PAST_US * 1e-6),
            noise_band: (kind == ExperimentKind::TruncationSweep).then(NoiseBand::default),
            seeds: vec![0],
            parent_duration: PARENT_DURATION_US * 1e-6,
            system: SystemModel::rb87_default(),
            optimizer: OptimizerConfig::default(),
            dt: DEFAULT_DT,
            carrier_khz: DEFAULT_CARRIER_KHZ,
            clamp_khz: DEFAULT_CLAMP_KHZ,
            naive_negated: false,
            record_stride: Some(1),
            cache_dir: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::Precondition("at least one seed is required".into()));
        }
        if self.targets.is_empty() {
            return Err(Error::Precondition("at least one target is required".into()));
        }
        for t in &self.targets {
            self.objective(DensityMatrix::basis(0), t.populations, self.parent_duration)
                .validate()
                .map_err(|e| e.context(format!("target {}", t.name)))?;
        }
        self.optimizer.validate()?;
        if self.kind == ExperimentKind::TruncationSweep {
            if self.durations.is_empty() {
                return Err(Error::Precondition("truncation sweep needs durations".into()));
            }
            let limit = self.parent_duration * (1.0 + 1e-12);
            for &d in &self.durations {
                if !(d > 0.0 && d <= limit) {
                    return Err(Error::domain(
                        "sweep duration (s)",
                        d,
                        format!("(0, {:e}]", self.parent_duration),
                    ));
                }
            }
        }
        match (self.kind, self.tau_past) {
            (ExperimentKind::UndoToPast, None) => {
                return Err(Error::Precondition("undo experiment needs tau_past".into()))
            }
            (ExperimentKind::UndoToPast, Some(tau)) => {
                if !(tau >= 0.0 && tau < self.parent_duration) {
                    return Err(Error::Precondition(format!(
                        "tau_past = {tau:e} s must lie in [0, {:e}) s",
                        self.parent_duration
                    )));
                }
            }
            (_, Some(_)) => {
                return Err(Error::Precondition(
                    "tau_past is only meaningful for the undo experiment".into(),
                ))
            }
            _ => {}
        }
        if let Some(band) = &self.noise_band {
            band.validate()?;
        }
        Ok(())
    }

    fn objective(&self, initial: DensityMatrix, target: [f64; DIM], duration: f64) -> Objective {
        Objective {
            initial_state: initial,
            target_populations: target,
            system: self.system,
            duration,
            noise: None,
            carrier_khz: self.carrier_khz,
            clamp_khz: self.clamp_khz,
            dt: self.dt,
        }
    }

    fn naive(&self, pulse: &Pulse) -> Pulse {
        if self.naive_negated {
            pulse.naive_time_reverse_negated()
        } else {
            pulse.naive_time_reverse()
        }
    }
}

/// One experiment arm: a target (or truncation point) under one seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArmRecord {
    pub name: String,
    pub seed: u64,
    /// Length of the backward (or transfer) pulse, µs.
    pub duration_us: f64,
    pub target_populations: [f64; DIM],
    /// ε of the forward leg with respect to `target_populations`.
    pub forward_epsilon: Option<f64>,
    pub backward_epsilon_oc: Option<f64>,
    pub backward_epsilon_naive: Option<f64>,
    pub roundtrip_fidelity_oc: Option<f64>,
    pub roundtrip_fidelity_naive: Option<f64>,
    pub echo_oc: Option<f64>,
    pub echo_naive: Option<f64>,
    /// `[ε_min, ε_max]` of the round trip over the dephasing band.
    pub noise_band_oc: Option<[f64; 2]>,
    pub noise_band_naive: Option<[f64; 2]>,
    /// `1 − ε` of the arm's comparison (round trip or undo).
    pub accuracy: Option<f64>,
    pub final_populations: Option<[f64; DIM]>,
    pub evaluations: usize,
    pub error: Option<String>,
    pub pulses: BTreeMap<String, PulseFile>,
    #[serde(skip)]
    pub trajectories: BTreeMap<String, Trajectory>,
}

impl ArmRecord {
    fn new(name: &str, seed: u64, duration: f64, target: [f64; DIM]) -> Self {
        Self {
            name: name.to_string(),
            seed,
            duration_us: to_us(duration),
            target_populations: target,
            forward_epsilon: None,
            backward_epsilon_oc: None,
            backward_epsilon_naive: None,
            roundtrip_fidelity_oc: None,
            roundtrip_fidelity_naive: None,
            echo_oc: None,
            echo_naive: None,
            noise_band_oc: None,
            noise_band_naive: None,
            accuracy: None,
            final_populations: None,
            evaluations: 0,
            error: None,
            pulses: BTreeMap::new(),
            trajectories: BTreeMap::new(),
        }
    }

    /// Every reported ε, fidelity, echo and accuracy.
    pub fn unit_interval_values(&self) -> Vec<f64> {
        let mut v: Vec<f64> = [
            self.forward_epsilon,
            self.backward_epsilon_oc,
            self.backward_epsilon_naive,
            self.roundtrip_fidelity_oc,
            self.roundtrip_fidelity_naive,
            self.echo_oc,
            self.echo_naive,
            self.accuracy,
        ]
        .into_iter()
        .flatten()
        .collect();
        for band in [self.noise_band_oc, self.noise_band_naive].into_iter().flatten() {
            v.extend(band);
        }
        v
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub kind: ExperimentKind,
    /// Top-level seed (the first of `seeds`).
    pub seed: u64,
    pub seeds: Vec<u64>,
    pub reference_lab_accuracy: Option<f64>,
    pub parent_duration_us: f64,
    pub tau_past_us: Option<f64>,
    pub noise_band: Option<NoiseBand>,
    pub notes: Vec<String>,
    pub arms: Vec<ArmRecord>,
}

impl ExperimentReport {
    fn new(spec: &ExperimentSpec, mut arms: Vec<ArmRecord>) -> Self {
        arms.sort_by(|a, b| {
            a.name
                .cmp(&b.name)
                .then(a.duration_us.total_cmp(&b.duration_us))
                .then(a.seed.cmp(&b.seed))
        });
        let reference = match spec.kind {
            ExperimentKind::ForwardBackward | ExperimentKind::TruncationSweep => {
                Some(REFERENCE_LAB_ACCURACY)
            }
            ExperimentKind::UndoToPast => Some(REFERENCE_UNDO_ACCURACY),
            ExperimentKind::Figure3 => None,
        };
        let mut notes = vec![
            "simulated states are noiseless unless a noise band is listed".to_string(),
            format!(
                "reference laboratory accuracy is quoted for comparison; the simulation has no \
                 laboratory noise (average lab reversal accuracy {REFERENCE_LAB_ACCURACY})"
            ),
        ];
        if spec.kind != ExperimentKind::Figure3 {
            notes.push(
                "backward pulses are optimized from the achieved simulated forward end-state".into(),
            );
            notes.push(format!(
                "naive arm uses {}",
                if spec.naive_negated {
                    "the sign-flipped retroversion -f(T - t)"
                } else {
                    "waveform retroversion f(T - t)"
                }
            ));
        }
        Self {
            kind: spec.kind,
            seed: spec.seeds[0],
            seeds: spec.seeds.clone(),
            reference_lab_accuracy: reference,
            parent_duration_us: to_us(spec.parent_duration),
            tau_past_us: spec.tau_past.map(to_us),
            noise_band: spec.noise_band,
            notes,
            arms,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Seed for the task identified by `key`, independent of scheduling.
pub fn task_seed(seed: u64, key: &str) -> u64 {
    key.bytes().fold(sample_seed(seed, 0), |acc, b| sample_seed(acc, b as u64))
}

/// Seconds to µs, rounded to the picosecond so decimal inputs print cleanly.
fn to_us(seconds: f64) -> f64 {
    (seconds * 1e12).round() / 1e6
}

fn us_key(seconds: f64) -> String {
    format!("{}us", to_us(seconds))
}

/// Writes `contents` to `path` through a temporary file in the same
/// directory and an atomic rename.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct ForwardCache {
    key: String,
    epsilon: f64,
    evaluations: usize,
    pulse: PulseFile,
}

/// Optimized forward pulse and its ε.
#[derive(Clone, Debug, PartialEq)]
pub struct ForwardPulse {
    pub pulse: Pulse,
    pub epsilon: f64,
    pub evaluations: usize,
    pub from_cache: bool,
}

/// Forward pulse `|+2⟩ → target` over the parent duration, read from or
/// written to the cache directory when one is configured.
pub fn forward_pulse(spec: &ExperimentSpec, target: &NamedTarget, seed: u64) -> Result<ForwardPulse> {
    let mut config = spec.optimizer.clone();
    config.rng_seed = task_seed(seed, &format!("forward/{}", target.name));
    let objective = spec.objective(DensityMatrix::basis(0), target.populations, spec.parent_duration);
    let key = format!(
        "{:?}|{:?}|{:?}|{:?}|{:?}|{:?}|{:?}|{:?}",
        target.populations,
        spec.parent_duration,
        spec.system,
        config,
        spec.dt,
        spec.carrier_khz,
        spec.clamp_khz,
        "forward-v2"
    );
    let cache_path = spec
        .cache_dir
        .as_ref()
        .map(|d| d.join(format!("forward-{}-seed{}.json", target.name, seed)));
    if let Some(path) = &cache_path {
        if let Ok(text) = std::fs::read_to_string(path) {
            if let Ok(cached) = serde_json::from_str::<ForwardCache>(&text) {
                if cached.key == key {
                    return Ok(ForwardPulse {
                        pulse: Pulse::from_file(&cached.pulse)?,
                        epsilon: cached.epsilon,
                        evaluations: cached.evaluations,
                        from_cache: true,
                    });
                }
            }
        }
    }
    let run = dcrab_optimize(&objective, &config)
        .map_err(|e| e.context(format!("forward optimization for {}", target.name)))?;
    if let Some(path) = &cache_path {
        let cached = ForwardCache {
            key,
            epsilon: run.best_epsilon,
            evaluations: run.evaluation_count,
            pulse: run.resulting_pulse.to_file(),
        };
        write_atomic(path, serde_json::to_string_pretty(&cached)?.as_bytes())?;
    }
    Ok(ForwardPulse {
        pulse: run.resulting_pulse,
        epsilon: run.best_epsilon,
        evaluations: run.evaluation_count,
        from_cache: false,
    })
}

/// Runs `pulse` from `initial`, recording at `stride` when asked.
fn play(
    spec: &ExperimentSpec,
    initial: &DensityMatrix,
    pulse: &Pulse,
) -> Result<(DensityMatrix, Option<Trajectory>)> {
    let dt = spec.dt.min(pulse.duration());
    let stride = spec.record_stride.unwrap_or(0);
    let traj = propagate_unitary(initial, pulse, &spec.system, dt, stride)?;
    let last = *traj.final_state();
    Ok((last, spec.record_stride.map(|_| traj)))
}

/// Noisy round trip `forward` then `backward` from `|+2⟩`, ε against the
/// initial populations at both band edges.
fn noisy_round_trip(
    spec: &ExperimentSpec,
    band: &NoiseBand,
    forward: &Pulse,
    backward: &Pulse,
    seed: u64,
) -> Result<[f64; 2]> {
    let dt_f = spec.dt.min(forward.duration());
    let dt_b = spec.dt.min(backward.duration());
    let gf = TimeGrid::new(forward.duration(), dt_f)?;
    let gb = TimeGrid::new(backward.duration(), dt_b)?;
    let cf = sample_controls(forward, &gf);
    let cb = sample_controls(backward, &gb);
    let segments = [
        Segment { controls: &cf, grid: &gf },
        Segment { controls: &cb, grid: &gb },
    ];
    let mut eps = [0.0; 2];
    for (slot, gamma) in eps.iter_mut().zip([band.gamma_low_hz, band.gamma_high_hz]) {
        let noise = band.endpoint(gamma, seed);
        let traj = propagate_gksl_segments(&DensityMatrix::basis(0), &segments, &spec.system, &noise, 0)?;
        *slot = error_function(traj.final_state(), &INITIAL_POPULATIONS);
    }
    Ok([eps[0].min(eps[1]), eps[0].max(eps[1])])
}

/// Backward arms from `reached` (the state after `forward`), filling the
/// OC and naive fields of `arm`.
fn backward_arms(
    spec: &ExperimentSpec,
    arm: &mut ArmRecord,
    forward: &Pulse,
    reached: &DensityMatrix,
    seed: u64,
    task: &str,
) -> Result<()> {
    let initial = DensityMatrix::basis(0);
    let duration = forward.duration();

    let mut config = spec.optimizer.clone();
    config.rng_seed = task_seed(seed, &format!("backward/{task}/{}", us_key(duration)));
    let objective = spec.objective(*reached, INITIAL_POPULATIONS, duration);
    let run = dcrab_optimize(&objective, &config)
        .map_err(|e| e.context(format!("backward optimization for {task}")))?;
    arm.evaluations += run.evaluation_count;
    let oc_pulse = run.resulting_pulse;
    let (oc_state, oc_traj) = play(spec, reached, &oc_pulse)?;
    arm.backward_epsilon_oc = Some(error_function(&oc_state, &INITIAL_POPULATIONS));
    arm.roundtrip_fidelity_oc = Some(uhlmann_fidelity(&initial, &oc_state)?);
    arm.echo_oc = Some(loschmidt_echo(&initial, &oc_state)?);
    arm.accuracy = arm.backward_epsilon_oc.map(|e| 1.0 - e);

    let naive_pulse = spec.naive(forward);
    let (naive_state, naive_traj) = play(spec, reached, &naive_pulse)?;
    arm.backward_epsilon_naive = Some(error_function(&naive_state, &INITIAL_POPULATIONS));
    arm.roundtrip_fidelity_naive = Some(uhlmann_fidelity(&initial, &naive_state)?);
    arm.echo_naive = Some(loschmidt_echo(&initial, &naive_state)?);
    arm.final_populations = Some(oc_state.populations());

    if let Some(band) = &spec.noise_band {
        let noise_seed = task_seed(seed, &format!("noise/{task}/{}", us_key(duration)));
        arm.noise_band_oc = Some(noisy_round_trip(spec, band, forward, &oc_pulse, noise_seed)?);
        arm.noise_band_naive = Some(noisy_round_trip(spec, band, forward, &naive_pulse, noise_seed)?);
    }

    arm.pulses.insert("backward_oc".into(), oc_pulse.to_file());
    arm.pulses.insert("backward_naive".into(), naive_pulse.to_file());
    if let Some(t) = oc_traj {
        arm.trajectories.insert("backward_oc".into(), t);
    }
    if let Some(t) = naive_traj {
        arm.trajectories.insert("backward_naive".into(), t);
    }
    Ok(())
}

/// Runs `body` on a fresh arm, recording a failure instead of aborting.
fn guarded(mut arm: ArmRecord, body: impl FnOnce(&mut ArmRecord) -> Result<()>) -> ArmRecord {
    if let Err(e) = body(&mut arm) {
        arm.error = Some(e.to_string());
    }
    arm
}

fn check_kind(spec: &ExperimentSpec, kind: ExperimentKind) -> Result<()> {
    if spec.kind != kind {
        return Err(Error::Precondition(format!(
            "spec is for {:?}, not {:?}",
            spec.kind, kind
        )));
    }
    spec.validate()
}

/// Forward to each target and back, by optimal control and by naive
/// reversal of the forward pulse.
pub fn run_forward_backward(spec: &ExperimentSpec) -> Result<ExperimentReport> {
    check_kind(spec, ExperimentKind::ForwardBackward)?;
    let tasks: Vec<(u64, &NamedTarget)> = spec
        .seeds
        .iter()
        .flat_map(|&s| spec.targets.iter().map(move |t| (s, t)))
        .collect();
    let arms: Vec<ArmRecord> = tasks
        .par_iter()
        .map(|&(seed, target)| {
            let arm = ArmRecord::new(&target.name, seed, spec.parent_duration, target.populations);
            guarded(arm, |arm| {
                let fwd = forward_pulse(spec, target, seed)?;
                arm.evaluations += fwd.evaluations;
                let (reached, traj) = play(spec, &DensityMatrix::basis(0), &fwd.pulse)?;
                arm.forward_epsilon = Some(error_function(&reached, &target.populations));
                arm.pulses.insert("forward".into(), fwd.pulse.to_file());
                if let Some(t) = traj {
                    arm.trajectories.insert("forward".into(), t);
                }
                backward_arms(spec, arm, &fwd.pulse, &reached, seed, &target.name)
            })
        })
        .collect();
    Ok(ExperimentReport::new(spec, arms))
}

/// Round trips along the parent forward pulse interrupted at each duration.
pub fn run_truncation_sweep(spec: &ExperimentSpec) -> Result<ExperimentReport> {
    check_kind(spec, ExperimentKind::TruncationSweep)?;
    let target = &spec.targets[0];
    let parents: Vec<(u64, Result<ForwardPulse>)> = spec
        .seeds
        .iter()
        .map(|&s| (s, forward_pulse(spec, target, s)))
        .collect();
    let tasks: Vec<(u64, &Result<ForwardPulse>, f64)> = parents
        .iter()
        .flat_map(|(s, p)| spec.durations.iter().map(move |&d| (*s, p, d)))
        .collect();
    let arms: Vec<ArmRecord> = tasks
        .par_iter()
        .map(|&(seed, parent, duration)| {
            let arm = ArmRecord::new(&target.name, seed, duration, target.populations);
            guarded(arm, |arm| {
                let parent = parent.as_ref().map_err(|e| Error::Precondition(e.to_string()))?;
                let forward = parent.pulse.truncate(duration)?;
                let (reached, traj) = play(spec, &DensityMatrix::basis(0), &forward)?;
                arm.forward_epsilon = Some(error_function(&reached, &target.populations));
                arm.pulses.insert("forward".into(), forward.to_file());
                if let Some(t) = traj {
                    arm.trajectories.insert("forward".into(), t);
                }
                backward_arms(spec, arm, &forward, &reached, seed, &target.name)
            })
        })
        .collect();
    Ok(ExperimentReport::new(spec, arms))
}

/// Drives the end state of the parent pulse back to the state it passed
/// through at `tau_past`, with a pulse of the remaining length.
pub fn run_undo_to_past(spec: &ExperimentSpec) -> Result<ExperimentReport> {
    check_kind(spec, ExperimentKind::UndoToPast)?;
    let tau1 = spec.tau_past.expect("validated");
    let total = spec.parent_duration;
    let tau2 = total - tau1;
    if (tau1 + tau2 - total).abs() > 1e-12 * total {
        return Err(Error::InvalidState(format!(
            "tau1 + tau2 = {:e} s differs from {total:e} s",
            tau1 + tau2
        )));
    }
    let target = &spec.targets[0];
    let arms: Vec<ArmRecord> = spec
        .seeds
        .par_iter()
        .map(|&seed| {
            let arm = ArmRecord::new(&target.name, seed, tau2, target.populations);
            guarded(arm, |arm| {
                let fwd = forward_pulse(spec, target, seed)?;
                arm.evaluations += fwd.evaluations;
                let initial = DensityMatrix::basis(0);
                let past = if tau1 == 0.0 {
                    initial
                } else {
                    play(spec, &initial, &fwd.pulse.truncate(tau1)?)?.0
                };
                let (end, traj) = play(spec, &initial, &fwd.pulse)?;
                arm.forward_epsilon = Some(error_function(&end, &target.populations));
                arm.target_populations = past.populations();
                arm.pulses.insert("forward".into(), fwd.pulse.to_file());
                if let Some(t) = traj {
                    arm.trajectories.insert("forward".into(), t);
                }

                let mut config = spec.optimizer.clone();
                config.rng_seed =
                    task_seed(seed, &format!("undo/{}/{}", target.name, us_key(tau1)));
                let objective = spec.objective(end, past.populations(), tau2);
                let run = dcrab_optimize(&objective, &config)
                    .map_err(|e| e.context("undo optimization"))?;
                arm.evaluations += run.evaluation_count;
                let (returned, back_traj) = play(spec, &end, &run.resulting_pulse)?;
                let eps = error_function(&returned, &past.populations());
                arm.backward_epsilon_oc = Some(eps);
                arm.accuracy = Some(1.0 - eps);
                arm.roundtrip_fidelity_oc = Some(uhlmann_fidelity(&past, &returned)?);
                arm.echo_oc = Some(loschmidt_echo(&past, &returned)?);
                arm.final_populations = Some(returned.populations());
                arm.pulses.insert("backward_oc".into(), run.resulting_pulse.to_file());
                if let Some(t) = back_traj {
                    arm.trajectories.insert("backward_oc".into(), t);
                }
                Ok(())
            })
        })
        .collect();
    Ok(ExperimentReport::new(spec, arms))
}

/// Transfer from `(|+2⟩ + |−2⟩)/√2` to `|−2⟩` with the full trajectory.
pub fn run_figure3_check(spec: &ExperimentSpec) -> Result<ExperimentReport> {
    check_kind(spec, ExperimentKind::Figure3)?;
    let target = &spec.targets[0];
    let initial = DensityMatrix::stretched_superposition();
    let arms: Vec<ArmRecord> = spec
        .seeds
        .par_iter()
        .map(|&seed| {
            let arm = ArmRecord::new(&target.name, seed, spec.parent_duration, target.populations);
            guarded(arm, |arm| {
                let mut config = spec.optimizer.clone();
                config.rng_seed = task_seed(seed, &format!("transfer/{}", target.name));
                let objective = spec.objective(initial, target.populations, spec.parent_duration);
                let run = dcrab_optimize(&objective, &config)?;
                arm.evaluations += run.evaluation_count;
                let (reached, traj) = play(spec, &initial, &run.resulting_pulse)?;
                let eps = error_function(&reached, &target.populations);
                arm.forward_epsilon = Some(eps);
                arm.accuracy = Some(1.0 - eps);
                arm.final_populations = Some(reached.populations());
                arm.pulses.insert("forward".into(), run.resulting_pulse.to_file());
                if let Some(t) = traj {
                    arm.trajectories.insert("forward".into(), t);
                }
                Ok(())
            })
        })
        .collect();
    Ok(ExperimentReport::new(spec, arms))
}

/// Dispatches on `spec.kind`.
pub fn run(spec: &ExperimentSpec) -> Result<ExperimentReport> {
    match spec.kind {
        ExperimentKind::ForwardBackward => run_forward_backward(spec),
        ExperimentKind::TruncationSweep => run_truncation_sweep(spec),
        ExperimentKind::UndoToPast => run_undo_to_past(spec),
        ExperimentKind::Figure3 => run_figure3_check(spec),
    }
}
