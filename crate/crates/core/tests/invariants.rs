// Copyright 2026 The qundo Authors
// SPDX-License-Identifier: Apache-2.0

//! Property suites over randomized states, pulses and objectives.

use proptest::prelude::*;

use qundo_core::dynamics::{propagate_gksl_strided, propagate_unitary};
use qundo_core::linalg::{CMatrix, CVector};
use qundo_core::metrics::{error_function, loschmidt_echo, uhlmann_fidelity};
use qundo_core::optimizer::{subplex_minimize, SubplexCoefficients, SubplexSettings};
use qundo_core::pulse::{Harmonic, DEFAULT_CARRIER_KHZ, DEFAULT_CLAMP_KHZ};
use qundo_core::scalar::C;
use qundo_core::{DensityMatrix, NoiseModel, Pulse, SystemModel, DIM};

fn config() -> ProptestConfig {
    ProptestConfig::with_cases(100)
}

fn complex() -> impl Strategy<Value = C<f64>> {
    (-1.0..1.0f64, -1.0..1.0f64).prop_map(|(re, im)| C::new(re, im))
}

/// Normalized random state vector.
fn pure_vector() -> impl Strategy<Value = CVector<f64, DIM>> {
    prop::array::uniform5(complex())
        .prop_filter("non-zero", |v| v.iter().map(|c| c.norm_sqr()).sum::<f64>() > 1e-3)
        .prop_map(|v| {
            let n = v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
            v.map(|c| c / n)
        })
}

/// Random full-rank or low-rank state `G G† / Tr`.
fn mixed_state() -> impl Strategy<Value = DensityMatrix> {
    (prop::array::uniform5(prop::array::uniform5(complex())), 1usize..=DIM)
        .prop_filter("non-zero", |(g, _)| g.iter().flatten().any(|c| c.norm_sqr() > 1e-3))
        .prop_map(|(g, rank)| {
            let mut m = CMatrix::<f64, DIM>::zeros();
            for row in g.iter().take(rank) {
                m = m + CMatrix::outer(row, row);
            }
            let tr = m.trace().re;
            DensityMatrix::new(m.scale(1.0 / tr)).expect("valid by construction")
        })
}

/// Random pulse of 1 to 5 µs with up to three harmonics.
fn pulse() -> impl Strategy<Value = Pulse> {
    (
        1.0..5.0f64,
        prop::collection::vec((complex(), -0.4..0.4f64), 0..=3),
    )
        .prop_map(|(duration_us, hs)| {
            let harmonics = hs
                .iter()
                .enumerate()
                .map(|(i, (a, r))| Harmonic {
                    k: i as i32 + 1,
                    nu_khz: (i as f64 + 1.0 + r) * 1e3 / duration_us,
                    amplitude: *a * 0.01,
                })
                .collect();
            Pulse::from_parts(duration_us, DEFAULT_CARRIER_KHZ, DEFAULT_CLAMP_KHZ, harmonics)
                .expect("valid pulse")
        })
}

fn model() -> SystemModel {
    SystemModel::rb87_default()
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn unitary_conserves_trace_purity_and_spectrum(rho in mixed_state(), p in pulse()) {
        let traj = propagate_unitary(&rho, &p, &model(), 10e-9, 50).unwrap();
        let spectrum0 = rho.eigenvalues();
        let purity0 = rho.purity();
        for s in &traj.states {
            prop_assert!((s.trace() - 1.0).abs() < 1e-8);
            prop_assert!((s.purity() - purity0).abs() < 1e-8);
            prop_assert!(s.0.hermiticity_defect() < 1e-8);
        }
        let spectrum = traj.final_state().eigenvalues();
        for (a, b) in spectrum.iter().zip(&spectrum0) {
            prop_assert!((a - b).abs() < 1e-8, "{spectrum:?} vs {spectrum0:?}");
        }
    }

    #[test]
    fn gksl_conserves_trace_and_never_raises_purity(
        rho in mixed_state(),
        p in pulse(),
        gamma_hz in 0.0..2000.0f64,
    ) {
        let noise = NoiseModel::from_lab_units(gamma_hz, 0.0, 1, 0);
        let traj = propagate_gksl_strided(&rho, &p, &model(), &noise, 10e-9, 1).unwrap();
        let purities = traj.purities();
        for s in &traj.states {
            prop_assert!((s.trace() - 1.0).abs() < 1e-9);
            prop_assert!(s.0.hermiticity_defect() < 1e-9);
        }
        for w in purities.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-12, "purity rose {} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn echo_equals_fidelity_for_pure_initial_states(psi in pure_vector(), rho in mixed_state()) {
        let initial = DensityMatrix::pure(&psi).unwrap();
        let m = loschmidt_echo(&initial, &rho).unwrap();
        let f = uhlmann_fidelity(&initial, &rho).unwrap();
        prop_assert!((m - f).abs() <= 1e-9, "M = {m}, F = {f}");
    }

    #[test]
    fn halving_dt_leaves_populations_unchanged(psi in pure_vector(), p in pulse()) {
        let rho = DensityMatrix::pure(&psi).unwrap();
        let coarse = propagate_unitary(&rho, &p, &model(), 10e-9, 0).unwrap().final_populations();
        let fine = propagate_unitary(&rho, &p, &model(), 5e-9, 0).unwrap().final_populations();
        for (a, b) in coarse.iter().zip(&fine) {
            prop_assert!((a - b).abs() < 1e-6, "{coarse:?} vs {fine:?}");
        }
    }

    #[test]
    fn error_function_ignores_coherences(rho in mixed_state(), phases in prop::array::uniform5(0.0..6.3f64)) {
        // Diagonal unitary conjugation changes every coherence phase and
        // keeps the diagonal.
        let d: CVector<f64, DIM> = phases.map(|t| C::from_polar(1.0, t));
        let mut m = rho.0;
        for i in 0..DIM {
            for j in 0..DIM {
                m[(i, j)] = d[i] * rho.0[(i, j)] * d[j].conj();
            }
        }
        let rotated = DensityMatrix::new(m).unwrap();
        let diagonal = DensityMatrix::diagonal(&rho.populations()).unwrap();
        let target = [0.5, 0.0, 0.0, 0.0, 0.5];
        let e = error_function(&rho, &target);
        prop_assert!((0.0..=1.0).contains(&e));
        prop_assert!((error_function(&rotated, &target) - e).abs() < 1e-15);
        prop_assert!((error_function(&diagonal, &target) - e).abs() < 1e-15);
    }

    #[test]
    fn subplex_history_is_monotone(
        center in prop::collection::vec(-1.0..1.0f64, 4..9),
        weights in prop::collection::vec(0.1..10.0f64, 9),
        coupling in -0.5..0.5f64,
    ) {
        let n = center.len();
        let f = |x: &[f64]| -> qundo_core::Result<f64> {
            let mut s = 0.0;
            for i in 0..n {
                let d = x[i] - center[i];
                s += weights[i] * d * d + coupling * d * (x[(i + 1) % n] - center[(i + 1) % n]);
                s += 0.1 * (3.0 * x[i]).sin().powi(2);
            }
            Ok(s)
        };
        let settings = SubplexSettings {
            max_evaluations: 600,
            subspace_size_range: [2, 4],
            initial_step: 0.3,
            ftol: 1e-10,
            xtol: 1e-12,
            stop_value: None,
            coefficients: SubplexCoefficients::default(),
        };
        let r = subplex_minimize(f, &vec![0.0; n], &settings).unwrap();
        prop_assert!(r.evaluations <= 600);
        for w in r.history.windows(2) {
            prop_assert!(w[1].1 < w[0].1 && w[1].0 > w[0].0);
        }
        prop_assert_eq!(r.history.last().unwrap().1, r.best_f);
    }

    #[test]
    fn noisy_trajectories_match_across_thread_counts(
        rho in mixed_state(),
        p in pulse(),
        seed in any::<u64>(),
    ) {
        let noise = NoiseModel::from_lab_units(200.0, 1.0, 4, seed);
        let run = |threads: usize| {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
            pool.install(|| propagate_gksl_strided(&rho, &p, &model(), &noise, 20e-9, 25).unwrap())
        };
        let one = run(1);
        let three = run(3);
        prop_assert_eq!(one, three);
    }
}
