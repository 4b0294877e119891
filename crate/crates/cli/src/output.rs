// Copyright 2026 The qundo Authors
// SPDX-License-Identifier: Apache-2.0

//! File emission: trajectory CSV, gnuplot data and JSON artifacts, all
//! written atomically.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::{Context, Result};

use qundo_core::experiments::{write_atomic, ArmRecord, ExperimentKind, ExperimentReport};
use qundo_core::Trajectory;

pub const TRAJECTORY_HEADER: &str = "t_us,p_plus2,p_plus1,p_0,p_minus1,p_minus2,purity";

pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    write_atomic(path, contents.as_bytes()).with_context(|| format!("writing {}", path.display()))
}

/// Populations and purity at every recorded time; `offset_us` shifts the
/// time column so consecutive legs can share an axis.
pub fn trajectory_csv(traj: &Trajectory, offset_us: f64) -> String {
    let mut out = String::with_capacity(96 * traj.len() + 64);
    out.push_str(TRAJECTORY_HEADER);
    out.push('\n');
    for ((t, p), rho) in traj.times.iter().zip(&traj.populations).zip(&traj.states) {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            offset_us + t * 1e6,
            p[0],
            p[1],
            p[2],
            p[3],
            p[4],
            rho.purity()
        );
    }
    out
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NaN".to_string(), |x| x.to_string())
}

fn band(v: Option<[f64; 2]>) -> (String, String) {
    match v {
        Some([lo, hi]) => (lo.to_string(), hi.to_string()),
        None => ("NaN".into(), "NaN".into()),
    }
}

/// Base file name for one arm.
pub fn arm_stem(arm: &ArmRecord) -> String {
    format!("{}-T{}us-seed{}", arm.name, arm.duration_us, arm.seed)
}

/// Whitespace-separated data for the figure of `report`, with a commented
/// header naming the columns.
pub fn gnuplot_data(report: &ExperimentReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# seed {}", report.seed);
    match report.kind {
        ExperimentKind::ForwardBackward => {
            let _ = writeln!(
                out,
                "# index target seed forward_eps eps_oc eps_naive fidelity_oc fidelity_naive echo_oc echo_naive"
            );
            for (i, a) in report.arms.iter().enumerate() {
                let _ = writeln!(
                    out,
                    "{i} {} {} {} {} {} {} {} {} {}",
                    a.name,
                    a.seed,
                    opt(a.forward_epsilon),
                    opt(a.backward_epsilon_oc),
                    opt(a.backward_epsilon_naive),
                    opt(a.roundtrip_fidelity_oc),
                    opt(a.roundtrip_fidelity_naive),
                    opt(a.echo_oc),
                    opt(a.echo_naive)
                );
            }
        }
        ExperimentKind::TruncationSweep => {
            let _ = writeln!(
                out,
                "# t_us seed eps_oc eps_naive band_oc_low band_oc_high band_naive_low band_naive_high"
            );
            for a in &report.arms {
                let (ol, oh) = band(a.noise_band_oc);
                let (nl, nh) = band(a.noise_band_naive);
                let _ = writeln!(
                    out,
                    "{} {} {} {} {ol} {oh} {nl} {nh}",
                    a.duration_us,
                    a.seed,
                    opt(a.backward_epsilon_oc),
                    opt(a.backward_epsilon_naive)
                );
            }
        }
        ExperimentKind::UndoToPast => {
            let _ = writeln!(out, "# tau2_us seed accuracy fidelity echo");
            for a in &report.arms {
                let _ = writeln!(
                    out,
                    "{} {} {} {} {}",
                    a.duration_us,
                    a.seed,
                    opt(a.accuracy),
                    opt(a.roundtrip_fidelity_oc),
                    opt(a.echo_oc)
                );
            }
        }
        ExperimentKind::Figure3 => {
            let _ = writeln!(out, "# t_us p_plus2 p_plus1 p_0 p_minus1 p_minus2");
            for a in &report.arms {
                if let Some(traj) = a.trajectories.get("forward") {
                    let _ = writeln!(out, "# seed {}", a.seed);
                    for (t, p) in traj.times.iter().zip(&traj.populations) {
                        let _ = writeln!(out, "{} {} {} {} {} {}", t * 1e6, p[0], p[1], p[2], p[3], p[4]);
                    }
                    out.push('\n');
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use qundo_core::dynamics::propagate_unitary;
    use qundo_core::{DensityMatrix, Pulse, SystemModel};

    #[test]
    fn trajectory_rows_have_seven_columns() {
        let pulse = Pulse::carrier_only(1e-6).unwrap();
        let traj = propagate_unitary(
            &DensityMatrix::basis(0),
            &pulse,
            &SystemModel::rb87_default(),
            1e-8,
            10,
        )
        .unwrap();
        let csv = trajectory_csv(&traj, 0.0);
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some(TRAJECTORY_HEADER));
        let rows: Vec<_> = lines.collect();
        assert_eq!(rows.len(), traj.len());
        assert!(rows.iter().all(|r| r.split(',').count() == 7));
        assert!(rows[0].starts_with("0,1,0,0,0,0,"));
    }
}
