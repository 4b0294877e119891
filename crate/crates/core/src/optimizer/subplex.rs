// Copyright 2026 The qundo Authors
// SPDX-License-Identifier: Apache-2.0

//! Rowan's subplex method.
//!
//! The coordinates are split into low-dimensional subspaces, ordered by how
//! much each coordinate moved in the previous cycle, and Nelder–Mead is run
//! on each subspace in turn with the other coordinates frozen. Step sizes are
//! rescaled between cycles from the progress made.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Nelder–Mead and subplex coefficients, Rowan's defaults.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SubplexCoefficients<T: Real> {
    pub reflection: T,
    pub expansion: T,
    pub contraction: T,
    pub shrink: T,
    /// Simplex reduction factor ending each inner Nelder–Mead run.
    pub simplex_reduction: T,
    /// Bound on step rescaling between cycles.
    pub step_reduction: T,
}

impl<T: Real> Default for SubplexCoefficients<T> {
    fn default() -> Self {
        Self {
            reflection: T::one(),
            expansion: T::lit(2.0),
            contraction: T::lit(0.5),
            shrink: T::lit(0.5),
            simplex_reduction: T::lit(0.25),
            step_reduction: T::lit(0.1),
        }
    }
}

/// Stopping rules and subspace sizing for one subplex run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SubplexSettings<T: Real> {
    pub max_evaluations: usize,
    pub subspace_size_range: [usize; 2],
    pub initial_step: T,
    /// Relative tolerance on both the per-cycle decrease and the value
    /// spread of the final subspace simplices. Two consecutive cycles within
    /// it stop the run.
    pub ftol: T,
    /// Relative step-size tolerance.
    pub xtol: T,
    /// Stop as soon as the objective reaches this value.
    pub stop_value: Option<T>,
    pub coefficients: SubplexCoefficients<T>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SubplexResult<T: Real> {
    pub best_x: Vec<T>,
    pub best_f: T,
    pub evaluations: usize,
    /// `(evaluation index, best-so-far)`, one entry per improvement.
    pub history: Vec<(usize, T)>,
    pub termination: Termination,
    /// Step sizes at termination (absolute values).
    pub final_step: Vec<T>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Termination {
    Budget,
    FunctionTolerance,
    StepTolerance,
    StopValue,
}

/// Counting, best-tracking wrapper around the user objective.
struct Tracker<'a, T: Real> {
    objective: &'a mut dyn FnMut(&[T]) -> Result<T>,
    evaluations: usize,
    budget: usize,
    best_x: Vec<T>,
    best_f: T,
    history: Vec<(usize, T)>,
    stop_value: Option<T>,
}

impl<'a, T: Real> Tracker<'a, T> {
    fn eval(&mut self, x: &[T]) -> Result<T> {
        let f = (self.objective)(x)?;
        self.evaluations += 1;
        if !f.is_finite() {
            return Err(Error::NonFiniteObjective {
                value: f.as_f64(),
                point: x.iter().map(|v| v.as_f64()).collect(),
            });
        }
        if f < self.best_f || self.evaluations == 1 {
            self.best_f = f;
            self.best_x.clear();
            self.best_x.extend_from_slice(x);
            self.history.push((self.evaluations, f));
        }
        Ok(f)
    }

    fn exhausted(&self) -> bool {
        self.evaluations >= self.budget
    }

    fn reached_stop_value(&self) -> bool {
        matches!(self.stop_value, Some(v) if self.best_f <= v)
    }

    fn should_stop(&self) -> bool {
        self.exhausted() || self.reached_stop_value()
    }
}

pub fn validate_settings<T: Real>(settings: &SubplexSettings<T>, dimension: usize) -> Result<()> {
    let [lo, hi] = settings.subspace_size_range;
    if dimension == 0 {
        return Err(Error::Precondition("empty search space".into()));
    }
    if !(1 <= lo && lo <= hi && hi <= dimension) || (dimension >= 2 && lo < 2) {
        return Err(Error::Precondition(format!(
            "subspace sizes [{lo}, {hi}] must satisfy 2 <= min <= max <= {dimension}"
        )));
    }
    if settings.max_evaluations < dimension + 1 {
        return Err(Error::Precondition(format!(
            "max_evaluations {} must be at least dimension + 1 = {}",
            settings.max_evaluations,
            dimension + 1
        )));
    }
    if !(settings.initial_step > T::zero()) || !settings.initial_step.is_finite() {
        return Err(Error::domain("initial_step", settings.initial_step.as_f64(), "(0, inf)"));
    }
    if !(settings.ftol >= T::zero()) || !(settings.xtol >= T::zero()) {
        return Err(Error::Precondition("tolerances must be non-negative".into()));
    }
    Ok(())
}

/// Minimises `objective` from `x0`.
pub fn subplex_minimize<T: Real>(
    mut objective: impl FnMut(&[T]) -> Result<T>,
    x0: &[T],
    settings: &SubplexSettings<T>,
) -> Result<SubplexResult<T>> {
    let n = x0.len();
    validate_settings(settings, n)?;
    if x0.iter().any(|v| !v.is_finite()) {
        return Err(Error::Precondition("starting point is not finite".into()));
    }
    let coeffs = settings.coefficients;
    let mut tracker = Tracker {
        objective: &mut objective,
        evaluations: 0,
        budget: settings.max_evaluations,
        best_x: x0.to_vec(),
        best_f: T::infinity(),
        history: Vec::new(),
        stop_value: settings.stop_value,
    };

    let mut x = x0.to_vec();
    let mut fx = tracker.eval(&x)?;
    let mut step = vec![settings.initial_step; n];
    let mut delta: Vec<T> = step.iter().map(|s| s.abs()).collect();
    let mut quiet_cycles = 0;

    let termination = loop {
        if tracker.reached_stop_value() {
            break Termination::StopValue;
        }
        if tracker.exhausted() {
            break Termination::Budget;
        }
        let x_prev = x.clone();
        let f_prev = fx;

        let subspaces = partition(&delta, settings.subspace_size_range);
        let mut spread = T::zero();
        for sub in &subspaces {
            if tracker.should_stop() {
                break;
            }
            let (f, s) = nelder_mead_subspace(&mut tracker, &mut x, fx, sub, &step, &coeffs)?;
            fx = f;
            spread = spread.max(s);
        }

        delta = x.iter().zip(&x_prev).map(|(a, b)| *a - *b).collect();
        let delta_l1: T = delta.iter().map(|d| d.abs()).sum();
        let step_l1: T = step.iter().map(|s| s.abs()).sum();
        let scale = if subspaces.len() > 1 {
            (delta_l1 / step_l1)
                .max(coeffs.step_reduction)
                .min(T::one() / coeffs.step_reduction)
        } else {
            coeffs.simplex_reduction
        };
        for (s, d) in step.iter_mut().zip(&delta) {
            if *d == T::zero() {
                *s = -*s * scale;
            } else {
                *s = s.abs() * scale * d.signum();
            }
        }
        let delta_abs: Vec<T> = delta.iter().map(|d| d.abs()).collect();
        // Cycles with no movement still order the next partition by step size.
        if delta_l1 == T::zero() {
            delta = step.iter().map(|s| s.abs()).collect();
        }

        if tracker.reached_stop_value() {
            break Termination::StopValue;
        }
        if tracker.exhausted() {
            break Termination::Budget;
        }

        let x_converged = x.iter().enumerate().all(|(i, xi)| {
            let size = delta_abs[i].max(step[i].abs() * coeffs.simplex_reduction);
            size <= settings.xtol * xi.abs().max(T::one())
        });
        if x_converged {
            break Termination::StepTolerance;
        }

        // Quiet: the cycle gained nothing and every simplex ended flat. A
        // cycle that failed only because its steps were too coarse is not.
        let tol = settings.ftol * fx.abs();
        if f_prev - fx <= tol && spread <= tol {
            quiet_cycles += 1;
            if quiet_cycles >= 2 {
                break Termination::FunctionTolerance;
            }
        } else {
            quiet_cycles = 0;
        }
    };

    Ok(SubplexResult {
        best_x: tracker.best_x.clone(),
        best_f: tracker.best_f,
        evaluations: tracker.evaluations,
        history: tracker.history.clone(),
        termination,
        final_step: step.iter().map(|s| s.abs()).collect(),
    })
}

/// Splits coordinates into subspaces, largest recent movement first.
pub fn partition<T: Real>(delta: &[T], size_range: [usize; 2]) -> Vec<Vec<usize>> {
    let n = delta.len();
    let [lo, hi] = size_range;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        delta[b]
            .abs()
            .partial_cmp(&delta[a].abs())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let mags: Vec<T> = order.iter().map(|&i| delta[i].abs()).collect();

    let splittable = |r: usize| -> bool {
        if r == 0 {
            return true;
        }
        (1..=r).any(|m| m * lo <= r && r <= m * hi)
    };

    let mut subspaces = Vec::new();
    let mut start = 0;
    while start < n {
        let remaining = n - start;
        let mut best_k = None;
        let mut best_score = T::neg_infinity();
        for k in lo.min(remaining)..=hi.min(remaining) {
            if !splittable(remaining - k) {
                continue;
            }
            let head: T = mags[start..start + k].iter().copied().sum::<T>()
                / T::from_usize(k).unwrap();
            let score = if k < remaining {
                let tail: T = mags[start + k..].iter().copied().sum::<T>()
                    / T::from_usize(remaining - k).unwrap();
                head - tail
            } else {
                head
            };
            if score > best_score {
                best_score = score;
                best_k = Some(k);
            }
        }
        let k = best_k.unwrap_or(remaining);
        subspaces.push(order[start..start + k].to_vec());
        start += k;
    }
    subspaces
}

/// Nelder–Mead on coordinates `sub` of `x`, others held fixed. Ends when the
/// simplex has shrunk by the reduction factor, or the budget runs out.
/// Returns the new value at `x` and the final simplex's value spread.
fn nelder_mead_subspace<T: Real>(
    tracker: &mut Tracker<'_, T>,
    x: &mut [T],
    fx: T,
    sub: &[usize],
    step: &[T],
    c: &SubplexCoefficients<T>,
) -> Result<(T, T)> {
    let m = sub.len();
    let mut full = x.to_vec();
    let mut eval_sub = |tracker: &mut Tracker<'_, T>, y: &[T]| -> Result<T> {
        for (j, &i) in sub.iter().enumerate() {
            full[i] = y[j];
        }
        tracker.eval(&full)
    };

    let base: Vec<T> = sub.iter().map(|&i| x[i]).collect();
    let mut simplex: Vec<(Vec<T>, T)> = Vec::with_capacity(m + 1);
    simplex.push((base.clone(), fx));
    for j in 0..m {
        if tracker.should_stop() {
            return Ok((fx, T::infinity()));
        }
        let mut v = base.clone();
        v[j] += step[sub[j]];
        let fv = eval_sub(tracker, &v)?;
        simplex.push((v, fv));
    }

    let size = |s: &[(Vec<T>, T)]| -> T {
        let best = &s[0].0;
        s[1..]
            .iter()
            .map(|(v, _)| v.iter().zip(best).map(|(a, b)| (*a - *b).abs()).sum::<T>())
            .fold(T::zero(), T::max)
    };
    let sort = |s: &mut Vec<(Vec<T>, T)>| {
        s.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal));
    };
    sort(&mut simplex);
    let initial_size = size(&simplex);
    let target_size = initial_size * c.simplex_reduction;

    while !tracker.should_stop() && size(&simplex) > target_size {
        let worst = m;
        let mut centroid = vec![T::zero(); m];
        for (v, _) in &simplex[..m] {
            for (cj, vj) in centroid.iter_mut().zip(v) {
                *cj += *vj;
            }
        }
        let inv = T::one() / T::from_usize(m).unwrap();
        centroid.iter_mut().for_each(|cj| *cj *= inv);

        let along = |from: &[T], to: &[T], t: T| -> Vec<T> {
            from.iter().zip(to).map(|(a, b)| *a + t * (*b - *a)).collect()
        };
        let xr = along(&centroid, &simplex[worst].0, -c.reflection);
        let fr = eval_sub(tracker, &xr)?;

        if fr < simplex[0].1 {
            let xe = along(&centroid, &xr, c.expansion);
            let fe = if tracker.should_stop() {
                T::infinity()
            } else {
                eval_sub(tracker, &xe)?
            };
            simplex[worst] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[m - 1].1 {
            simplex[worst] = (xr, fr);
        } else {
            let outside = fr < simplex[worst].1;
            let xc = if outside {
                along(&centroid, &xr, c.contraction)
            } else {
                along(&centroid, &simplex[worst].0, c.contraction)
            };
            if tracker.should_stop() {
                break;
            }
            let fc = eval_sub(tracker, &xc)?;
            let accept = if outside { fc <= fr } else { fc < simplex[worst].1 };
            if accept {
                simplex[worst] = (xc, fc);
            } else {
                let best = simplex[0].0.clone();
                for idx in 1..=m {
                    if tracker.should_stop() {
                        break;
                    }
                    let v = along(&best, &simplex[idx].0, c.shrink);
                    let fv = eval_sub(tracker, &v)?;
                    simplex[idx] = (v, fv);
                }
            }
        }
        sort(&mut simplex);
    }

    let spread = simplex[m].1 - simplex[0].1;
    let (best_v, best_f) = &simplex[0];
    if *best_f < fx {
        for (j, &i) in sub.iter().enumerate() {
            x[i] = best_v[j];
        }
        Ok((*best_f, spread))
    } else {
        Ok((fx, spread))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn settings(dim: usize) -> SubplexSettings<f64> {
        SubplexSettings {
            max_evaluations: 5000,
            subspace_size_range: [2, 5.min(dim)],
            initial_step: 0.5,
            ftol: 1e-14,
            xtol: 1e-10,
            stop_value: None,
            coefficients: SubplexCoefficients::default(),
        }
    }

    #[test]
    fn partition_respects_sizes() {
        for n in 2..30 {
            let delta: Vec<f64> = (0..n).map(|i| ((i * 7) % 11) as f64).collect();
            let parts = partition(&delta, [2, 5]);
            let mut seen: Vec<usize> = parts.iter().flatten().copied().collect();
            seen.sort();
            assert_eq!(seen, (0..n).collect::<Vec<_>>());
            for p in &parts {
                assert!((2..=5).contains(&p.len()), "n={n} part={p:?}");
            }
        }
    }

    #[test]
    fn partition_groups_large_movers_first() {
        let delta = [0.0, 5.0, 0.0, 4.0, 0.0, 0.0];
        let parts = partition(&delta, [2, 4]);
        let mut first = parts[0].clone();
        first.sort();
        assert_eq!(first, vec![1, 3]);
    }

    #[test]
    fn bowl_in_fourteen_dimensions() {
        let target: Vec<f64> = (0..14).map(|i| 0.2 * (i as f64 * 0.7).sin()).collect();
        let f = |x: &[f64]| -> Result<f64> {
            Ok(x.iter().zip(&target).map(|(a, b)| (a - b) * (a - b)).sum())
        };
        let r = subplex_minimize(f, &[0.0; 14], &settings(14)).unwrap();
        let err = r.best_x.iter().zip(&target).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-4, "err {err}, evals {}", r.evaluations);
        assert!(r.evaluations < 5000);
    }

    #[test]
    fn constant_objective_keeps_start() {
        let x0 = [0.3, -0.2, 1.0];
        let r = subplex_minimize(|_| Ok(2.5), &x0, &SubplexSettings { ftol: 1e-6, ..settings(3) })
            .unwrap();
        assert_eq!(r.best_x, x0);
        assert_eq!(r.best_f, 2.5);
        assert_eq!(r.termination, Termination::FunctionTolerance);
    }

    #[test]
    fn non_finite_objective_aborts_with_point() {
        let f = |x: &[f64]| -> Result<f64> { Ok(if x[0] > 0.1 { f64::NAN } else { x[0] * x[0] }) };
        let err = subplex_minimize(f, &[0.0, 0.0], &settings(2)).unwrap_err();
        match err {
            Error::NonFiniteObjective { point, .. } => assert!(point[0] > 0.1),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn history_is_monotone_and_budget_respected() {
        let rosen = |x: &[f64]| -> Result<f64> {
            Ok(x.windows(2)
                .map(|w| 100.0 * (w[1] - w[0] * w[0]).powi(2) + (1.0 - w[0]).powi(2))
                .sum())
        };
        let s = SubplexSettings {
            max_evaluations: 300,
            ..settings(6)
        };
        let r = subplex_minimize(rosen, &[-1.0; 6], &s).unwrap();
        assert!(r.evaluations <= 300);
        assert_eq!(r.termination, Termination::Budget);
        assert!(r.history.windows(2).all(|w| w[1].1 <= w[0].1 && w[1].0 > w[0].0));
    }

    #[test]
    fn rejects_bad_settings() {
        let f = |_: &[f64]| -> Result<f64> { Ok(0.0) };
        let mut s = settings(4);
        s.subspace_size_range = [1, 3];
        assert!(subplex_minimize(f, &[0.0; 4], &s).is_err());
        let mut s = settings(4);
        s.subspace_size_range = [2, 5];
        assert!(subplex_minimize(f, &[0.0; 4], &s).is_err());
        let mut s = settings(4);
        s.max_evaluations = 4;
        assert!(subplex_minimize(f, &[0.0; 4], &s).is_err());
    }
}
