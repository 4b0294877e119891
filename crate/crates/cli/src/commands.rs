// Copyright 2026 The qundo Authors
// SPDX-License-Identifier: Apache-2.0

//! Subcommand implementations.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};

use qundo_core::dynamics::{propagate_gksl_strided, propagate_unitary};
use qundo_core::experiments::{self, ExperimentKind, ExperimentReport};
use qundo_core::levels::{breit_rabi_levels, m_f, PhysicalConstants};
use qundo_core::optimizer::dcrab_optimize;
use qundo_core::{NoiseModel, Objective, Pulse};

use crate::config::{load_state, RunConfig};
use crate::output::{arm_stem, gnuplot_data, trajectory_csv, write_file};

/// Status lines go to stdout, one per event.
fn status(line: impl AsRef<str>) {
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{}", line.as_ref());
    let _ = out.flush();
}

fn emit(out: Option<&Path>, contents: &str) -> Result<()> {
    match out {
        Some(path) => {
            write_file(path, contents)?;
            status(format!("wrote {}", path.display()));
        }
        None => print!("{contents}"),
    }
    Ok(())
}

fn read_pulse(path: &Path) -> Result<Pulse> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading pulse {}", path.display()))?;
    Pulse::from_json(&text).with_context(|| format!("parsing pulse {}", path.display()))
}

pub fn levels(field_gauss: f64) -> Result<()> {
    let levels = breit_rabi_levels(field_gauss, &PhysicalConstants::rb87())?;
    let mut out = String::from("m_f,energy_khz\n");
    for (i, e) in levels.energies_khz().iter().enumerate() {
        let _ = writeln!(out, "{},{}", m_f(i), e);
    }
    print!("{out}");
    Ok(())
}

pub fn pulse_eval(path: &Path, dt_ns: f64, out: Option<&Path>) -> Result<()> {
    if !(dt_ns > 0.0) {
        bail!("--dt-ns must be positive, got {dt_ns}");
    }
    let pulse = read_pulse(path)?;
    let dt = dt_ns * 1e-9;
    let steps = (pulse.duration() / dt).round() as usize;
    let [lo, hi] = pulse.clamp_khz();
    let mut csv = String::from("t_us,f_over_2pi_khz\n");
    for i in 0..=steps {
        let t = (i as f64 * dt).min(pulse.duration());
        let f = pulse.evaluate(t)?;
        // Re-clamp in kHz: converting the rad/s bound back can overshoot by an ulp.
        let khz = (f / (std::f64::consts::TAU * 1e3)).clamp(lo, hi);
        let _ = writeln!(csv, "{},{}", t * 1e6, khz);
    }
    emit(out, &csv)
}

pub struct SimulateOptions {
    pub pulse: PathBuf,
    pub initial: String,
    pub gamma_hz: Option<f64>,
    pub db_mg: Option<f64>,
    pub samples: Option<usize>,
    pub dt_ns: Option<f64>,
    pub config: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

pub fn simulate(o: SimulateOptions) -> Result<()> {
    let cfg = RunConfig::load(o.config.as_deref())?;
    let pulse = read_pulse(&o.pulse)?;
    let rho0 = load_state(&o.initial)?;
    let model = cfg.system_model()?;
    let dt_ns = o.dt_ns.unwrap_or(cfg.simulation.dt_ns);
    if !(dt_ns > 0.0) {
        bail!("--dt-ns must be positive, got {dt_ns}");
    }
    let dt = (dt_ns * 1e-9).min(pulse.duration());
    let gamma_hz = o.gamma_hz.unwrap_or(cfg.simulation.gamma_hz);
    let db_mg = o.db_mg.unwrap_or(cfg.simulation.field_sigma_mg);
    let stride = cfg.simulation.record_stride;
    let traj = if gamma_hz > 0.0 || db_mg > 0.0 {
        let samples = o.samples.unwrap_or(cfg.simulation.field_samples);
        let noise = NoiseModel::from_lab_units(gamma_hz, db_mg, samples, cfg.seed);
        noise.validate()?;
        propagate_gksl_strided(&rho0, &pulse, &model, &noise, dt, stride)?
    } else {
        propagate_unitary(&rho0, &pulse, &model, dt, stride)?
    };
    emit(o.out.as_deref(), &trajectory_csv(&traj, 0.0))?;
    if o.out.is_some() {
        let p = traj.final_populations();
        status(format!(
            "final_populations,{},{},{},{},{}",
            p[0], p[1], p[2], p[3], p[4]
        ));
    }
    Ok(())
}

pub fn optimize(config: Option<&Path>, out_pulse: Option<&Path>, out_history: Option<&Path>) -> Result<()> {
    let cfg = RunConfig::load(config)?;
    let initial = load_state(&cfg.problem.initial)?;
    let mut objective = Objective::new(
        initial,
        cfg.problem.target_populations,
        cfg.system_model()?,
        cfg.problem.duration_us * 1e-6,
    );
    objective.carrier_khz = cfg.system.carrier_khz;
    objective.clamp_khz = cfg.system.clamp_khz;
    objective.dt = cfg.dt();
    let run = dcrab_optimize(&objective, &cfg.optimizer_config())?;

    let pulse_path = out_pulse.map_or_else(|| cfg.io.out_dir.join("pulse.json"), Path::to_path_buf);
    let history_path =
        out_history.map_or_else(|| cfg.io.out_dir.join("history.csv"), Path::to_path_buf);
    write_file(&pulse_path, &run.resulting_pulse.to_json())?;
    status(format!("wrote {}", pulse_path.display()));
    let mut history = String::from("evaluation,best_epsilon\n");
    for (i, eps) in &run.history {
        let _ = writeln!(history, "{i},{eps}");
    }
    write_file(&history_path, &history)?;
    status(format!("wrote {}", history_path.display()));

    let p = objective.final_state(&run.resulting_pulse)?.populations();
    status(format!("seed,{}", cfg.seed));
    status(format!("evaluations,{}", run.evaluation_count));
    status(format!("epsilon,{}", run.best_epsilon));
    status(format!("final_populations,{},{},{},{},{}", p[0], p[1], p[2], p[3], p[4]));
    Ok(())
}

fn kind_for(command: &str) -> ExperimentKind {
    match command {
        "exp1" => ExperimentKind::ForwardBackward,
        "exp2" => ExperimentKind::TruncationSweep,
        "exp3" => ExperimentKind::UndoToPast,
        _ => ExperimentKind::Figure3,
    }
}

pub fn experiment(command: &str, config: Option<&Path>, out_dir: Option<PathBuf>) -> Result<()> {
    let mut cfg = RunConfig::load(config)?;
    if let Some(dir) = out_dir {
        cfg.io.out_dir = dir;
    }
    let spec = cfg.experiment_spec(kind_for(command))?;
    status(format!("{command}: seeds {:?}, {} target(s)", spec.seeds, spec.targets.len()));
    let report = experiments::run(&spec)?;
    let dir = &cfg.io.out_dir;

    if cfg.io.wants("json") {
        for arm in &report.arms {
            for (label, pulse) in &arm.pulses {
                let path = dir
                    .join(format!("{command}-pulses"))
                    .join(format!("{}-{label}.json", arm_stem(arm)));
                write_file(&path, &serde_json::to_string_pretty(pulse)?)?;
            }
            if let Some(back) = arm.trajectories.get("backward_oc") {
                let path = dir
                    .join(format!("{command}-states"))
                    .join(format!("{}-backward-start.json", arm_stem(arm)));
                write_file(&path, &serde_json::to_string_pretty(&back.states[0].to_file())?)?;
            }
        }
        let path = dir.join(format!("{command}-report.json"));
        write_file(&path, &report.to_json())?;
        status(format!("wrote {}", path.display()));
    }
    if cfg.io.wants("csv") {
        for arm in &report.arms {
            for (label, traj) in &arm.trajectories {
                let path = dir
                    .join(format!("{command}-trajectories"))
                    .join(format!("{}-{label}.csv", arm_stem(arm)));
                write_file(&path, &trajectory_csv(traj, 0.0))?;
            }
        }
    }
    if cfg.io.wants("dat") {
        let path = dir.join(format!("{command}.dat"));
        write_file(&path, &gnuplot_data(&report))?;
        status(format!("wrote {}", path.display()));
    }
    summarize(&report);

    let failed: Vec<String> = report
        .arms
        .iter()
        .filter_map(|a| a.error.as_ref().map(|e| format!("{}: {e}", arm_stem(a))))
        .collect();
    if !failed.is_empty() {
        bail!("{} arm(s) failed: {}", failed.len(), failed.join("; "));
    }
    Ok(())
}

const SUMMARY_HEADER: &str = "kind,name,seed,duration_us,forward_epsilon,epsilon_oc,epsilon_naive,fidelity_oc,fidelity_naive,accuracy,error";

fn summary_rows(report: &ExperimentReport) -> String {
    let kind = serde_json::to_value(report.kind).expect("kind serializes");
    let kind = kind.as_str().unwrap_or_default();
    let f = |v: Option<f64>| v.map_or_else(String::new, |x| format!("{x:.6}"));
    let mut out = String::new();
    for a in &report.arms {
        let _ = writeln!(
            out,
            "{kind},{},{},{},{},{},{},{},{},{},{}",
            a.name,
            a.seed,
            a.duration_us,
            f(a.forward_epsilon),
            f(a.backward_epsilon_oc),
            f(a.backward_epsilon_naive),
            f(a.roundtrip_fidelity_oc),
            f(a.roundtrip_fidelity_naive),
            f(a.accuracy),
            a.error.as_deref().unwrap_or("").replace(',', ";")
        );
    }
    out
}

fn summarize(report: &ExperimentReport) {
    status(SUMMARY_HEADER);
    print!("{}", summary_rows(report));
    if let Some(r) = report.reference_lab_accuracy {
        status(format!("reference_lab_accuracy,{r}"));
    }
}

pub fn report(paths: &[PathBuf]) -> Result<()> {
    let mut out = String::from(SUMMARY_HEADER);
    out.push('\n');
    for path in paths {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading report {}", path.display()))?;
        let report: ExperimentReport = serde_json::from_str(&text)
            .with_context(|| format!("parsing report {}", path.display()))?;
        out.push_str(&summary_rows(&report));
    }
    print!("{out}");
    Ok(())
}
