// Copyright 2026 The qundo Authors
// SPDX-License-Identifier: Apache-2.0

//! Frequency-modulated RF control pulse.
//!
//! The instantaneous frequency is
//!
//! ```text
//! f(t) = ω₀ [1 + Σ_{k=±1..±K} A_k (1 + i ν_k t) e^{i ν_k t}]
//! ```
//!
//! i.e. `f = ∂_t[t ω(t)]` with `ω(t) = ω₀ (1 + Σ A_k e^{i ν_k t})`. Only the
//! positive-k half is stored; the negative partners are `A_{-k} = conj(A_k)`
//! and `ν_{-k} = -ν_k`, so the sum is `2 Re Σ_{k>0}` and `f` is real.
//! The result is hard-clamped to the generator window.
//!
//! Parameters are held in the hardware-facing units of the pulse file
//! (µs, kHz of ordinary frequency) so that a pulse read from disk and written
//! back is byte-identical. Evaluation uses SI angular units derived from them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{Real, C};

/// Relative slack allowed on `t ≤ T` checks.
const SUPPORT_SLACK: f64 = 1e-12;

/// Default carrier, midpoint of the generator window (kHz).
pub const DEFAULT_CARRIER_KHZ: f64 = 4375.0;
/// Generator window (kHz).
pub const DEFAULT_CLAMP_KHZ: [f64; 2] = [4150.0, 4600.0];
/// Number of harmonics in the default basis.
pub const DEFAULT_HARMONICS: usize = 7;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Harmonic<T: Real> {
    /// Basis index (positive; the conjugate partner is implicit).
    pub k: i32,
    /// ν_k / 2π in kHz.
    pub nu_khz: T,
    /// Dimensionless complex amplitude `A_k`.
    pub amplitude: C<T>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Pulse<T: Real> {
    duration_us: T,
    carrier_khz: T,
    clamp_khz: [T; 2],
    harmonics: Vec<Harmonic<T>>,
    /// Waveform time at which this pulse starts, µs.
    start_us: T,
    /// Plays the waveform backwards from `start_us`.
    reversed: bool,
    /// Multiplies the waveform by −1 before clamping.
    negated: bool,
    si: SiCache<T>,
}

#[derive(Clone, Debug, PartialEq)]
struct SiCache<T: Real> {
    duration: T,
    carrier: T,
    clamp: [T; 2],
    start: T,
    nus: Vec<T>,
}

#[inline]
fn khz_to_rad_s<T: Real>(khz: T) -> T {
    khz * T::lit(1e3) * T::two_pi()
}

#[inline]
fn rad_s_to_khz<T: Real>(w: T) -> T {
    w / (T::two_pi() * T::lit(1e3))
}

impl<T: Real> Pulse<T> {
    /// Builds a pulse from file-unit parameters.
    pub fn from_parts(
        duration_us: T,
        carrier_khz: T,
        clamp_khz: [T; 2],
        harmonics: Vec<Harmonic<T>>,
    ) -> Result<Self> {
        Self::assemble(
            duration_us,
            carrier_khz,
            clamp_khz,
            harmonics,
            T::zero(),
            false,
            false,
        )
    }

    fn assemble(
        duration_us: T,
        carrier_khz: T,
        clamp_khz: [T; 2],
        harmonics: Vec<Harmonic<T>>,
        start_us: T,
        reversed: bool,
        negated: bool,
    ) -> Result<Self> {
        if !(duration_us > T::zero()) || !duration_us.is_finite() {
            return Err(Error::domain("pulse duration (us)", duration_us.as_f64(), "(0, inf)"));
        }
        if !carrier_khz.is_finite() {
            return Err(Error::domain("carrier (kHz)", carrier_khz.as_f64(), "finite"));
        }
        if !(clamp_khz[0] < clamp_khz[1]) || !clamp_khz[0].is_finite() || !clamp_khz[1].is_finite()
        {
            return Err(Error::Precondition(format!(
                "clamp window [{}, {}] kHz must satisfy f_min < f_max",
                clamp_khz[0], clamp_khz[1]
            )));
        }
        for h in &harmonics {
            if h.k < 1 {
                return Err(Error::Precondition(format!(
                    "harmonic index {} must be positive; negative partners are implicit",
                    h.k
                )));
            }
            if !h.nu_khz.is_finite() || !h.amplitude.re.is_finite() || !h.amplitude.im.is_finite()
            {
                return Err(Error::Precondition(format!("harmonic {} is not finite", h.k)));
            }
        }
        let si = SiCache {
            duration: duration_us * T::lit(1e-6),
            carrier: khz_to_rad_s(carrier_khz),
            clamp: clamp_khz.map(khz_to_rad_s),
            start: start_us * T::lit(1e-6),
            nus: harmonics.iter().map(|h| khz_to_rad_s(h.nu_khz)).collect(),
        };
        Ok(Self {
            duration_us,
            carrier_khz,
            clamp_khz,
            harmonics,
            start_us,
            reversed,
            negated,
            si,
        })
    }

    /// Unmodulated pulse; arguments in SI (seconds, rad/s).
    pub fn constant(duration_s: T, carrier: T, clamp: [T; 2]) -> Result<Self> {
        Self::from_parts(
            duration_s * T::lit(1e6),
            rad_s_to_khz(carrier),
            clamp.map(rad_s_to_khz),
            Vec::new(),
        )
    }

    /// Carrier-only pulse with the default carrier and window.
    pub fn carrier_only(duration_s: T) -> Result<Self> {
        Self::from_parts(
            duration_s * T::lit(1e6),
            T::lit(DEFAULT_CARRIER_KHZ),
            DEFAULT_CLAMP_KHZ.map(T::lit),
            Vec::new(),
        )
    }

    /// Copy with extra harmonics appended (dCRAB stage composition).
    pub fn with_added_harmonics(&self, extra: &[Harmonic<T>]) -> Result<Self> {
        let mut harmonics = self.harmonics.clone();
        harmonics.extend_from_slice(extra);
        Self::assemble(
            self.duration_us,
            self.carrier_khz,
            self.clamp_khz,
            harmonics,
            self.start_us,
            self.reversed,
            self.negated,
        )
    }

    pub fn duration(&self) -> T {
        self.si.duration
    }

    pub fn duration_us(&self) -> T {
        self.duration_us
    }

    /// ω₀ in rad/s.
    pub fn carrier(&self) -> T {
        self.si.carrier
    }

    pub fn carrier_khz(&self) -> T {
        self.carrier_khz
    }

    /// `[f_min, f_max]` in rad/s.
    pub fn clamp_range(&self) -> [T; 2] {
        self.si.clamp
    }

    pub fn clamp_khz(&self) -> [T; 2] {
        self.clamp_khz
    }

    pub fn harmonics(&self) -> &[Harmonic<T>] {
        &self.harmonics
    }

    pub fn start_us(&self) -> T {
        self.start_us
    }

    pub fn is_reversed(&self) -> bool {
        self.reversed
    }

    pub fn is_negated(&self) -> bool {
        self.negated
    }

    fn check_support(&self, t: T) -> Result<()> {
        let limit = self.si.duration * (T::one() + T::lit(SUPPORT_SLACK));
        if !(t >= T::zero()) || !(t <= limit) {
            return Err(Error::domain(
                "pulse time (s)",
                t.as_f64(),
                format!("[0, {:e}]", self.si.duration.as_f64()),
            ));
        }
        Ok(())
    }

    /// Maps pulse-local time to waveform time.
    #[inline]
    fn waveform_time(&self, t: T) -> T {
        if self.reversed {
            self.si.start - t
        } else {
            self.si.start + t
        }
    }

    /// Physical frequency `f(t)` in rad/s after clamping.
    pub fn evaluate(&self, t: T) -> Result<T> {
        self.check_support(t)?;
        Ok(self.evaluate_unchecked(t))
    }

    /// Same as [`Pulse::evaluate`] without the support check.
    #[inline]
    pub fn evaluate_unchecked(&self, t: T) -> T {
        self.clamp(self.unclamped(t))
    }

    #[inline]
    pub fn clamp(&self, f: T) -> T {
        f.max(self.si.clamp[0]).min(self.si.clamp[1])
    }

    /// `f(t)` before clamping.
    pub fn unclamped(&self, t: T) -> T {
        let tau = self.waveform_time(t);
        let two = T::lit(2.0);
        let mut modulation = T::zero();
        for (h, &nu) in self.harmonics.iter().zip(&self.si.nus) {
            modulation += two * basis_value(nu, tau).re_mul(h.amplitude);
        }
        let f = self.si.carrier * (T::one() + modulation);
        if self.negated {
            -f
        } else {
            f
        }
    }

    /// Literal two-sided sum `Σ_{±k} A_k (1 + i ν_k τ) e^{i ν_k τ}` at waveform
    /// time for pulse time `t`. Its imaginary part vanishes for a valid pulse.
    pub fn two_sided_sum(&self, t: T) -> C<T> {
        let tau = self.waveform_time(t);
        let mut acc = C::new(T::zero(), T::zero());
        for (h, &nu) in self.harmonics.iter().zip(&self.si.nus) {
            acc = acc + h.amplitude * basis_value(nu, tau);
            acc = acc + h.amplitude.conj() * basis_value(-nu, tau);
        }
        acc
    }

    /// Same waveform interrupted at `new_duration_s`.
    pub fn truncate(&self, new_duration_s: T) -> Result<Self> {
        let limit = self.si.duration * (T::one() + T::lit(SUPPORT_SLACK));
        if !(new_duration_s > T::zero()) || !(new_duration_s <= limit) {
            return Err(Error::domain(
                "truncated duration (s)",
                new_duration_s.as_f64(),
                format!("(0, {:e}]", self.si.duration.as_f64()),
            ));
        }
        let new_us = if new_duration_s >= self.si.duration {
            self.duration_us
        } else {
            new_duration_s * T::lit(1e6)
        };
        Self::assemble(
            new_us,
            self.carrier_khz,
            self.clamp_khz,
            self.harmonics.clone(),
            self.start_us,
            self.reversed,
            self.negated,
        )
    }

    /// `g(t) = f(T − t)`.
    pub fn naive_time_reverse(&self) -> Self {
        let start_us = if self.reversed {
            self.start_us - self.duration_us
        } else {
            self.start_us + self.duration_us
        };
        Self::assemble(
            self.duration_us,
            self.carrier_khz,
            self.clamp_khz,
            self.harmonics.clone(),
            start_us,
            !self.reversed,
            self.negated,
        )
        .expect("reversal keeps a valid pulse valid")
    }

    /// `g(t) = −f(T − t)`, the sign-flipped reading of naive reversal.
    pub fn naive_time_reverse_negated(&self) -> Self {
        let mut p = self.naive_time_reverse();
        p.negated = !p.negated;
        p
    }
}

/// `(1 + i ν τ) e^{i ν τ}`.
#[inline]
pub fn basis_value<T: Real>(nu: T, tau: T) -> C<T> {
    let phase = nu * tau;
    let (s, c) = phase.sin_cos();
    C::new(T::one(), phase) * C::new(c, s)
}

trait ReMul<T: Real> {
    fn re_mul(self, a: C<T>) -> T;
}

impl<T: Real> ReMul<T> for C<T> {
    /// `Re(a · self)` without forming the imaginary part.
    #[inline]
    fn re_mul(self, a: C<T>) -> T {
        a.re * self.re - a.im * self.im
    }
}

/// A set of basis frequencies for one optimisation stage.
#[derive(Clone, Debug, PartialEq)]
pub struct HarmonicBasis<T: Real> {
    /// `(k, ν_k/2π in kHz)`.
    pub entries: Vec<(i32, T)>,
}

impl<T: Real> HarmonicBasis<T> {
    /// `ν_k = 2π k / T` for `k = 1..=count`.
    pub fn fourier(duration_us: T, count: usize) -> Self {
        Self::shifted(duration_us, &vec![T::zero(); count])
    }

    /// `ν_k = 2π (k + r_k) / T`.
    pub fn shifted(duration_us: T, shifts: &[T]) -> Self {
        let entries = shifts
            .iter()
            .enumerate()
            .map(|(i, &r)| {
                let k = i as i32 + 1;
                (k, (T::from_i32(k).unwrap() + r) * T::lit(1e3) / duration_us)
            })
            .collect();
        Self { entries }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Real parameter count (`Re`, `Im` per harmonic).
    pub fn dimension(&self) -> usize {
        2 * self.entries.len()
    }

    /// Pairs `(Re A_k, Im A_k)` from a flat coefficient vector.
    pub fn harmonics(&self, coeffs: &[T]) -> Vec<Harmonic<T>> {
        assert_eq!(coeffs.len(), self.dimension(), "coefficient length");
        self.entries
            .iter()
            .zip(coeffs.chunks_exact(2))
            .map(|(&(k, nu_khz), c)| Harmonic {
                k,
                nu_khz,
                amplitude: C::new(c[0], c[1]),
            })
            .collect()
    }
}

/// On-disk pulse description.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PulseFile {
    pub duration_us: f64,
    pub carrier_khz: f64,
    pub clamp_khz: [f64; 2],
    pub harmonics: Vec<HarmonicEntry>,
    #[serde(default, skip_serializing_if = "is_zero")]
    pub start_us: f64,
    #[serde(default, skip_serializing_if = "is_false")]
    pub reversed: bool,
    #[serde(default, skip_serializing_if = "is_false")]
    pub negated: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HarmonicEntry {
    pub k: i32,
    pub re: f64,
    pub im: f64,
    /// ν_k/2π in kHz; defaults to `k / duration` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nu_khz: Option<f64>,
}

fn is_zero(x: &f64) -> bool {
    *x == 0.0
}

fn is_false(b: &bool) -> bool {
    !*b
}

impl Pulse<f64> {
    pub fn to_file(&self) -> PulseFile {
        PulseFile {
            duration_us: self.duration_us,
            carrier_khz: self.carrier_khz,
            clamp_khz: self.clamp_khz,
            harmonics: self
                .harmonics
                .iter()
                .map(|h| HarmonicEntry {
                    k: h.k,
                    re: h.amplitude.re,
                    im: h.amplitude.im,
                    nu_khz: Some(h.nu_khz),
                })
                .collect(),
            start_us: self.start_us,
            reversed: self.reversed,
            negated: self.negated,
        }
    }

    pub fn from_file(file: &PulseFile) -> Result<Self> {
        let harmonics = file
            .harmonics
            .iter()
            .map(|h| Harmonic {
                k: h.k,
                nu_khz: h
                    .nu_khz
                    .unwrap_or(h.k as f64 * 1e3 / file.duration_us),
                amplitude: C::new(h.re, h.im),
            })
            .collect();
        Self::assemble(
            file.duration_us,
            file.carrier_khz,
            file.clamp_khz,
            harmonics,
            file.start_us,
            file.reversed,
            file.negated,
        )
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_file()).expect("pulse serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: PulseFile = serde_json::from_str(text)?;
        Self::from_file(&file)
    }
}
