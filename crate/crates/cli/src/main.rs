// Copyright 2026 The qundo Authors
// SPDX-License-Identifier: Apache-2.0

//! `qundo`: optimal time reversal on the ⁸⁷Rb F = 2 manifold.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(
    name = "qundo",
    version,
    about = "Optimal time-reversal simulator for the 87Rb F=2 manifold",
    arg_required_else_help = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Breit–Rabi sub-level energies as CSV (m_f, energy_khz).
    Levels {
        #[arg(long, default_value_t = 6.179)]
        field_gauss: f64,
    },
    /// Pulse utilities.
    Pulse {
        #[command(subcommand)]
        action: PulseAction,
    },
    /// Propagate a state under a pulse and write its trajectory CSV.
    Simulate(SimulateArgs),
    /// Optimize a pulse for the problem in a config file.
    Optimize(OptimizeArgs),
    /// Forward and backward round trips for the four targets.
    Exp1(ExperimentArgs),
    /// Truncation sweep with the dephasing band.
    Exp2(ExperimentArgs),
    /// Undo to a past state of the forward trajectory.
    Exp3(ExperimentArgs),
    /// Superposition to |-2> transfer with its trajectory.
    Fig3(ExperimentArgs),
    /// Summarize report JSON files as CSV.
    Report {
        #[arg(required = true)]
        reports: Vec<PathBuf>,
    },
}

#[derive(Subcommand, Debug)]
enum PulseAction {
    /// Sample f(t)/2π as CSV (t_us, f_over_2pi_khz).
    Eval {
        #[arg(long)]
        pulse: PathBuf,
        #[arg(long, default_value_t = 10.0)]
        dt_ns: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[arg(long)]
    pulse: PathBuf,
    /// State name or state JSON file.
    #[arg(long, default_value = "plus2")]
    initial: String,
    /// Dephasing rate γ/2π in Hz; enables the GKSL solver when positive.
    #[arg(long)]
    gamma_hz: Option<f64>,
    /// Quasi-static bias-field spread in mG; enables the GKSL solver.
    #[arg(long)]
    db_mg: Option<f64>,
    /// Field draws for the noise average.
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    dt_ns: Option<f64>,
    /// TOML config for system and simulation settings.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Trajectory CSV; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct OptimizeArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out_pulse: Option<PathBuf>,
    #[arg(long)]
    out_history: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ExperimentArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides `io.out_dir`.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

fn configure_threads() -> anyhow::Result<()> {
    if let Ok(raw) = std::env::var("QUNDO_THREADS") {
        let n: usize = raw
            .trim()
            .parse()
            .map_err(|_| anyhow::anyhow!("QUNDO_THREADS = {raw:?} is not a positive integer"))?;
        if n == 0 {
            anyhow::bail!("QUNDO_THREADS must be at least 1");
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    let result = configure_threads().and_then(|()| match cli.command {
        Command::Levels { field_gauss } => commands::levels(field_gauss),
        Command::Pulse {
            action: PulseAction::Eval { pulse, dt_ns, out },
        } => commands::pulse_eval(&pulse, dt_ns, out.as_deref()),
        Command::Simulate(a) => commands::simulate(commands::SimulateOptions {
            pulse: a.pulse,
            initial: a.initial,
            gamma_hz: a.gamma_hz,
            db_mg: a.db_mg,
            samples: a.samples,
            dt_ns: a.dt_ns,
            config: a.config,
            out: a.out,
        }),
        Command::Optimize(a) => {
            commands::optimize(a.config.as_deref(), a.out_pulse.as_deref(), a.out_history.as_deref())
        }
        Command::Exp1(a) => commands::experiment("exp1", a.config.as_deref(), a.out_dir),
        Command::Exp2(a) => commands::experiment("exp2", a.config.as_deref(), a.out_dir),
        Command::Exp3(a) => commands::experiment("exp3", a.config.as_deref(), a.out_dir),
        Command::Fig3(a) => commands::experiment("fig3", a.config.as_deref(), a.out_dir),
        Command::Report { reports } => commands::report(&reports),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let line = serde_json::json!({ "status": "error", "message": format!("{e:#}") });
            eprintln!("{line}");
            ExitCode::from(1)
        }
    }
}
