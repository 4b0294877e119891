// Copyright 2026 The qundo Authors
// SPDX-License-Identifier: Apache-2.0

//! TOML run configuration. Every physical quantity carries its unit in the
//! key name; unknown keys and missing or wrong unit suffixes are rejected.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Deserialize;

use qundo_core::experiments::{named_target, ExperimentKind, ExperimentSpec, NamedTarget, NoiseBand};
use qundo_core::hamiltonian::ControlCoupling;
use qundo_core::levels::PhysicalConstants;
use qundo_core::state::{named_state, StateFile, STATE_NAMES};
use qundo_core::{DensityMatrix, OptimizerConfig, SystemModel, DIM};

/// Recognised unit suffixes, used to tell unit mistakes from typos.
const UNITS: [&str; 9] = ["gauss", "mg", "khz", "hz", "us", "ns", "ms", "s", "ghz"];

/// Allowed keys per table; `""` is the document root.
const SCHEMA: &[(&str, &[&str])] = &[
    ("", &["seed", "system", "optimizer", "simulation", "problem", "experiment", "io"]),
    ("system", &["bias_field_gauss", "rabi_khz", "carrier_khz", "clamp_khz"]),
    (
        "optimizer",
        &[
            "max_evaluations",
            "super_iterations",
            "subspace_size_range",
            "initial_step",
            "ftol",
            "xtol",
            "stop_value",
            "dressing",
            "harmonics",
        ],
    ),
    (
        "simulation",
        &["dt_ns", "record_stride", "gamma_hz", "field_sigma_mg", "field_samples"],
    ),
    ("problem", &["initial", "target_populations", "duration_us"]),
    (
        "experiment",
        &[
            "targets",
            "durations_us",
            "tau_past_us",
            "parent_duration_us",
            "seeds",
            "naive_negated",
            "noise_band",
        ],
    ),
    (
        "experiment.noise_band",
        &["gamma_low_hz", "gamma_high_hz", "field_sigma_mg", "field_samples"],
    ),
    ("io", &["out_dir", "formats", "cache_dir"]),
];

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub system: SystemSection,
    pub optimizer: OptimizerSection,
    pub simulation: SimulationSection,
    pub problem: ProblemSection,
    pub experiment: ExperimentSection,
    pub io: IoSection,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SystemSection {
    pub bias_field_gauss: f64,
    pub rabi_khz: f64,
    pub carrier_khz: f64,
    pub clamp_khz: [f64; 2],
}

impl Default for SystemSection {
    fn default() -> Self {
        Self {
            bias_field_gauss: 6.179,
            rabi_khz: 60.0,
            carrier_khz: qundo_core::pulse::DEFAULT_CARRIER_KHZ,
            clamp_khz: qundo_core::pulse::DEFAULT_CLAMP_KHZ,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizerSection {
    pub max_evaluations: usize,
    pub super_iterations: usize,
    pub subspace_size_range: [usize; 2],
    pub initial_step: f64,
    pub ftol: f64,
    pub xtol: f64,
    pub stop_value: Option<f64>,
    pub dressing: bool,
    pub harmonics: usize,
}

impl Default for OptimizerSection {
    fn default() -> Self {
        let d = OptimizerConfig::default();
        Self {
            max_evaluations: d.max_evaluations,
            super_iterations: d.super_iterations,
            subspace_size_range: d.subspace_size_range,
            initial_step: d.initial_step,
            ftol: d.ftol,
            xtol: d.xtol,
            stop_value: d.stop_value,
            dressing: d.dressing,
            harmonics: d.harmonics,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulationSection {
    pub dt_ns: f64,
    /// Steps between recorded trajectory points; 0 keeps only the ends.
    pub record_stride: usize,
    pub gamma_hz: f64,
    pub field_sigma_mg: f64,
    pub field_samples: usize,
}

impl Default for SimulationSection {
    fn default() -> Self {
        Self {
            dt_ns: qundo_core::dynamics::DEFAULT_DT * 1e9,
            record_stride: 1,
            gamma_hz: 0.0,
            field_sigma_mg: 0.0,
            field_samples: qundo_core::dynamics::DEFAULT_FIELD_SAMPLES,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProblemSection {
    /// State name or path to a state JSON file.
    pub initial: String,
    pub target_populations: [f64; DIM],
    pub duration_us: f64,
}

impl Default for ProblemSection {
    fn default() -> Self {
        Self {
            initial: "plus2".into(),
            target_populations: named_target("A").expect("A is defined").populations,
            duration_us: 100.0,
        }
    }
}

/// A target given by name (`"A"`…`"D"`) or spelled out.
#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum TargetEntry {
    Named(String),
    Explicit { name: String, populations: [f64; DIM] },
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentSection {
    pub targets: Option<Vec<TargetEntry>>,
    pub durations_us: Option<Vec<f64>>,
    pub tau_past_us: Option<f64>,
    pub parent_duration_us: Option<f64>,
    pub seeds: Option<Vec<u64>>,
    pub naive_negated: bool,
    pub noise_band: Option<NoiseBandSection>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseBandSection {
    pub gamma_low_hz: f64,
    pub gamma_high_hz: f64,
    pub field_sigma_mg: f64,
    pub field_samples: usize,
}

impl Default for NoiseBandSection {
    fn default() -> Self {
        let d = NoiseBand::default();
        Self {
            gamma_low_hz: d.gamma_low_hz,
            gamma_high_hz: d.gamma_high_hz,
            field_sigma_mg: d.field_sigma_mg,
            field_samples: d.field_samples,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IoSection {
    pub out_dir: PathBuf,
    /// Any of `json`, `csv`, `dat`.
    pub formats: Vec<String>,
    /// Forward-pulse cache; defaults to `<out_dir>/cache`.
    pub cache_dir: Option<PathBuf>,
}

impl Default for IoSection {
    fn default() -> Self {
        Self {
            out_dir: PathBuf::from("out"),
            formats: vec!["json".into(), "csv".into(), "dat".into()],
            cache_dir: None,
        }
    }
}

impl IoSection {
    pub fn wants(&self, format: &str) -> bool {
        self.formats.iter().any(|f| f == format)
    }
}

/// Splits `key` into a stem and a recognised unit suffix.
fn split_unit(key: &str) -> (&str, Option<&str>) {
    for unit in UNITS {
        if let Some(stem) = key.strip_suffix(unit).and_then(|s| s.strip_suffix('_')) {
            return (stem, Some(unit));
        }
    }
    (key, None)
}

/// Lists every key not in the schema, flagging unit-suffix mistakes.
fn check_keys(table: &toml::Table, path: &str, problems: &mut Vec<String>) {
    let Some((_, allowed)) = SCHEMA.iter().find(|(p, _)| *p == path) else {
        return;
    };
    for (key, value) in table {
        let full = if path.is_empty() { key.clone() } else { format!("{path}.{key}") };
        if !allowed.contains(&key.as_str()) {
            let (stem, unit) = split_unit(key);
            let fix = allowed.iter().find(|a| {
                let (a_stem, a_unit) = split_unit(a);
                a_unit.is_some() && a_stem == stem && a_unit != unit
            });
            match fix {
                Some(fix) if unit.is_none() => problems.push(format!(
                    "`{full}` is missing its unit suffix (expected `{fix}`)"
                )),
                Some(fix) => problems.push(format!(
                    "`{full}` uses the wrong unit suffix (expected `{fix}`)"
                )),
                None => problems.push(format!("unknown key `{full}`")),
            }
            continue;
        }
        if let toml::Value::Table(sub) = value {
            check_keys(sub, &full, problems);
        }
    }
}

impl RunConfig {
    /// Parses and validates a TOML document; the empty document gives the
    /// reference configuration.
    pub fn parse(text: &str) -> Result<Self> {
        let table: toml::Table = text.parse().context("invalid TOML")?;
        let mut problems = Vec::new();
        check_keys(&table, "", &mut problems);
        if !problems.is_empty() {
            bail!("invalid configuration: {}", problems.join("; "));
        }
        let config: RunConfig = toml::Value::Table(table)
            .try_into()
            .context("invalid configuration")?;
        config.validate()?;
        Ok(config)
    }

    /// Reads `path`, or stdin when `path` is `-`. `None` gives defaults.
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let text = match path {
            None => String::new(),
            Some(p) if p == Path::new("-") => {
                std::io::read_to_string(std::io::stdin()).context("reading config from stdin")?
            }
            Some(p) => std::fs::read_to_string(p)
                .with_context(|| format!("reading config {}", p.display()))?,
        };
        let mut config = Self::parse(&text)
            .with_context(|| format!("in {}", path.map_or("defaults".into(), |p| p.display().to_string())))?;
        config.apply_env()?;
        Ok(config)
    }

    /// `QUNDO_SEED` replaces the seed and the experiment seed list.
    fn apply_env(&mut self) -> Result<()> {
        if let Ok(raw) = std::env::var("QUNDO_SEED") {
            let seed: u64 = raw
                .trim()
                .parse()
                .with_context(|| format!("QUNDO_SEED = {raw:?} is not an unsigned integer"))?;
            self.seed = seed;
            self.experiment.seeds = Some(vec![seed]);
        }
        Ok(())
    }

    fn validate(&self) -> Result<()> {
        self.system_model()?;
        self.optimizer_config().validate()?;
        if !(self.simulation.dt_ns > 0.0) {
            bail!("simulation.dt_ns must be positive, got {}", self.simulation.dt_ns);
        }
        if self.simulation.field_samples == 0 {
            bail!("simulation.field_samples must be at least 1");
        }
        if !(self.problem.duration_us > 0.0) {
            bail!("problem.duration_us must be positive, got {}", self.problem.duration_us);
        }
        for f in &self.io.formats {
            if !["json", "csv", "dat"].contains(&f.as_str()) {
                bail!("io.formats: unknown format `{f}` (use json, csv, dat)");
            }
        }
        Ok(())
    }

    pub fn system_model(&self) -> Result<SystemModel> {
        let s = &self.system;
        let coupling = ControlCoupling::from_khz(s.rabi_khz).context("system.rabi_khz")?;
        SystemModel::new(s.bias_field_gauss, coupling, PhysicalConstants::rb87())
            .context("system.bias_field_gauss")
    }

    pub fn optimizer_config(&self) -> OptimizerConfig {
        let o = &self.optimizer;
        OptimizerConfig {
            max_evaluations: o.max_evaluations,
            super_iterations: o.super_iterations,
            subspace_size_range: o.subspace_size_range,
            initial_step: o.initial_step,
            ftol: o.ftol,
            xtol: o.xtol,
            stop_value: o.stop_value,
            rng_seed: self.seed,
            dressing: o.dressing,
            harmonics: o.harmonics,
        }
    }

    pub fn dt(&self) -> f64 {
        self.simulation.dt_ns / 1e9
    }

    pub fn cache_dir(&self) -> PathBuf {
        self.io.cache_dir.clone().unwrap_or_else(|| self.io.out_dir.join("cache"))
    }

    /// Experiment spec for `kind`: the library defaults overlaid with
    /// whatever the config sets.
    pub fn experiment_spec(&self, kind: ExperimentKind) -> Result<ExperimentSpec> {
        let mut spec = ExperimentSpec::new(kind);
        let e = &self.experiment;
        if let Some(targets) = &e.targets {
            spec.targets = targets
                .iter()
                .map(|t| match t {
                    TargetEntry::Named(name) => named_target(name)
                        .with_context(|| format!("unknown target `{name}` (use A, B, C, D or a table)")),
                    TargetEntry::Explicit { name, populations } => {
                        Ok(NamedTarget::new(name.clone(), *populations))
                    }
                })
                .collect::<Result<_>>()?;
        }
        if let Some(d) = &e.durations_us {
            spec.durations = d.iter().map(|x| x * 1e-6).collect();
        }
        if let Some(tau) = e.tau_past_us {
            spec.tau_past = Some(tau * 1e-6);
        }
        if let Some(t) = e.parent_duration_us {
            spec.parent_duration = t * 1e-6;
        }
        spec.seeds = e.seeds.clone().unwrap_or_else(|| vec![self.seed]);
        spec.naive_negated = e.naive_negated;
        if let Some(b) = &e.noise_band {
            spec.noise_band = Some(NoiseBand {
                gamma_low_hz: b.gamma_low_hz,
                gamma_high_hz: b.gamma_high_hz,
                field_sigma_mg: b.field_sigma_mg,
                field_samples: b.field_samples,
            });
        }
        spec.system = self.system_model()?;
        spec.optimizer = self.optimizer_config();
        spec.dt = self.dt();
        spec.carrier_khz = self.system.carrier_khz;
        spec.clamp_khz = self.system.clamp_khz;
        spec.record_stride = (self.simulation.record_stride > 0).then_some(self.simulation.record_stride);
        spec.cache_dir = Some(self.cache_dir());
        spec.validate().context("invalid experiment configuration")?;
        Ok(spec)
    }
}

/// A state by name, or read from a JSON state file.
pub fn load_state(spec: &str) -> Result<DensityMatrix> {
    if let Some(rho) = named_state(spec) {
        return Ok(rho);
    }
    let path = Path::new(spec);
    if !path.exists() {
        bail!(
            "`{spec}` is neither a state name ({}) nor an existing state file",
            STATE_NAMES.join(", ")
        );
    }
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {spec}"))?;
    let file: StateFile = serde_json::from_str(&text).with_context(|| format!("parsing {spec}"))?;
    Ok(DensityMatrix::from_file(&file)?)
}
