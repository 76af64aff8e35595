//! Microwave pulse sequences (Hahn, PDD, CP, custom) and their filter functions.
//!
//! Timing follows the ideal-pulse convention: pulse centers sit on the delay
//! grid and durations are bookkeeping for finite-pulse simulation. The time
//! origin is the center of the excitation (π/2) pulse, so that pulse starts at
//! `-t_pi2 / 2`; every later pulse lies inside `[0, echo_time]`.

use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pulse<T> {
    /// s
    pub start: T,
    /// s
    pub duration: T,
    /// Rotation angle, rad.
    pub nominal_angle: T,
    /// Azimuth of the rotation axis in the transverse plane, rad.
    pub axis_phase: T,
}

impl<T: Real> Pulse<T> {
    pub fn centered(center: T, duration: T, nominal_angle: T, axis_phase: T) -> Self {
        Self {
            start: center - duration / T::lit(2.0),
            duration,
            nominal_angle,
            axis_phase,
        }
    }

    pub fn center(&self) -> T {
        self.start + self.duration / T::lit(2.0)
    }

    pub fn end(&self) -> T {
        self.start + self.duration
    }

    /// Constant Rabi rate that realises the nominal angle over the duration.
    pub fn rabi_rate(&self) -> T {
        self.nominal_angle / self.duration
    }

    pub fn is_pi(&self) -> bool {
        (self.nominal_angle - T::PI()).abs() <= T::lit(1e-6)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SequenceKind {
    Hahn,
    Pdd,
    Cp,
    Custom,
}

impl SequenceKind {
    pub fn name(self) -> &'static str {
        match self {
            SequenceKind::Hahn => "hahn",
            SequenceKind::Pdd => "pdd",
            SequenceKind::Cp => "cp",
            SequenceKind::Custom => "custom",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PulseSequence<T> {
    pub pulses: Vec<Pulse<T>>,
    /// Expected echo center, s.
    pub echo_time: T,
    /// End of the simulated record, s.
    pub total_time: T,
    pub kind: SequenceKind,
    /// Characteristic interpulse delay, s.
    pub tau: T,
}

fn check_timing<T: Real>(n_pi: usize, tau: T, t_pi2: T, t_pi: T) -> Result<()> {
    if n_pi == 0 {
        return Err(Error::InvalidTiming("at least one π pulse is required".into()));
    }
    if !(t_pi2 > T::zero()) || !(t_pi > T::zero()) {
        return Err(Error::InvalidTiming(format!(
            "pulse durations must be positive (t_pi2 = {t_pi2:e}, t_pi = {t_pi:e})"
        )));
    }
    if !(tau > t_pi) || !tau.is_finite() {
        return Err(Error::InvalidTiming(format!(
            "tau = {tau:e} s must exceed the π pulse duration {t_pi:e} s"
        )));
    }
    Ok(())
}

fn assemble<T: Real>(
    kind: SequenceKind,
    tau: T,
    t_pi2: T,
    t_pi: T,
    pi_centers: impl IntoIterator<Item = T>,
    echo_time: T,
) -> Result<PulseSequence<T>> {
    let mut pulses = vec![Pulse::centered(T::zero(), t_pi2, T::FRAC_PI_2(), T::zero())];
    pulses.extend(
        pi_centers
            .into_iter()
            .map(|c| Pulse::centered(c, t_pi, T::PI(), T::zero())),
    );
    let seq = PulseSequence {
        pulses,
        echo_time,
        total_time: echo_time + tau,
        kind,
        tau,
    };
    seq.validate()?;
    Ok(seq)
}

/// π/2 – τ – π – τ – echo.
pub fn build_hahn<T: Real>(tau: T, t_pi2: T, t_pi: T) -> Result<PulseSequence<T>> {
    check_timing(1, tau, t_pi2, t_pi)?;
    assemble(SequenceKind::Hahn, tau, t_pi2, t_pi, [tau], tau * T::lit(2.0))
}

/// π/2 followed by `n_pi` π pulses at τ, 2τ, …, Nτ; echo at (N+1)τ.
pub fn build_pdd<T: Real>(n_pi: usize, tau: T, t_pi2: T, t_pi: T) -> Result<PulseSequence<T>> {
    check_timing(n_pi, tau, t_pi2, t_pi)?;
    let centers = (1..=n_pi).map(|k| tau * T::lit(k as f64));
    assemble(SequenceKind::Pdd, tau, t_pi2, t_pi, centers, tau * T::lit((n_pi + 1) as f64))
}

/// π/2, τ, then `n_pi` π pulses spaced 2τ (at τ, 3τ, …, (2N−1)τ); echo at 2Nτ.
pub fn build_cp<T: Real>(n_pi: usize, tau: T, t_pi2: T, t_pi: T) -> Result<PulseSequence<T>> {
    check_timing(n_pi, tau, t_pi2, t_pi)?;
    let centers = (1..=n_pi).map(|k| tau * T::lit((2 * k - 1) as f64));
    assemble(SequenceKind::Cp, tau, t_pi2, t_pi, centers, tau * T::lit((2 * n_pi) as f64))
}

impl<T: Real> PulseSequence<T> {
    /// Validated user-defined sequence. The first pulse is the excitation.
    pub fn custom(pulses: Vec<Pulse<T>>, echo_time: T, total_time: T, tau: T) -> Result<Self> {
        let seq = Self {
            pulses,
            echo_time,
            total_time,
            kind: SequenceKind::Custom,
            tau,
        };
        seq.validate()?;
        Ok(seq)
    }

    pub fn validate(&self) -> Result<()> {
        let Some(first) = self.pulses.first() else {
            return Err(Error::InvalidTiming("sequence has no pulses".into()));
        };
        if !(self.tau > T::zero()) {
            return Err(Error::InvalidTiming(format!("tau must be positive, got {}", self.tau)));
        }
        for (i, p) in self.pulses.iter().enumerate() {
            if !(p.duration > T::zero()) || !p.start.is_finite() {
                return Err(Error::InvalidTiming(format!("pulse {i} has non-positive duration")));
            }
            if i > 0 && p.start < T::zero() {
                return Err(Error::InvalidTiming(format!("pulse {i} starts before t = 0")));
            }
        }
        if first.center() != T::zero() {
            return Err(Error::InvalidTiming("excitation pulse must be centered at t = 0".into()));
        }
        for (i, w) in self.pulses.windows(2).enumerate() {
            if w[1].start < w[0].end() {
                return Err(Error::InvalidTiming(format!(
                    "pulses {i} and {} overlap or are out of order",
                    i + 1
                )));
            }
        }
        let last_end = self.pulses.last().map(|p| p.end()).unwrap_or(T::zero());
        if last_end > self.echo_time {
            return Err(Error::InvalidTiming(format!(
                "last pulse ends at {last_end:e} s, after the echo at {:e} s",
                self.echo_time
            )));
        }
        if !(self.echo_time <= self.total_time) {
            return Err(Error::InvalidTiming("echo_time exceeds total_time".into()));
        }
        Ok(())
    }

    /// Refocusing (π) pulses after the excitation.
    pub fn refocusing_pulses(&self) -> impl Iterator<Item = &Pulse<T>> {
        self.pulses.iter().skip(1).filter(|p| p.is_pi())
    }

    pub fn n_pi(&self) -> usize {
        self.refocusing_pulses().count()
    }

    /// `[start, end)` of every pulse, in time order.
    pub fn pulse_intervals(&self) -> Vec<(T, T)> {
        self.pulses.iter().map(|p| (p.start, p.end())).collect()
    }

    pub fn shortest_pulse(&self) -> T {
        self.pulses
            .iter()
            .map(|p| p.duration)
            .fold(T::infinity(), T::min)
    }

    pub fn filter_function(&self) -> FilterFunction<T> {
        filter_function(self)
    }
}

/// ±1 weight with which phase accumulated at time `t` enters the echo.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterFunction<T> {
    /// π-pulse centers, ascending.
    pub breakpoints: Vec<T>,
    /// Sign on the first interval; always +1.
    pub initial_sign: i8,
    /// End of the domain `[0, echo_time]`.
    pub echo_time: T,
}

impl<T: Real> FilterFunction<T> {
    pub fn sign_at(&self, t: T) -> T {
        let flips = self.breakpoints.iter().filter(|&&b| b < t).count();
        let s = if flips % 2 == 0 { T::one() } else { -T::one() };
        s * T::lit(self.initial_sign as f64)
    }

    /// Constant-sign intervals `(start, end, sign)` tiling `[0, echo_time]`.
    pub fn intervals(&self) -> Vec<(T, T, T)> {
        let mut out = Vec::with_capacity(self.breakpoints.len() + 1);
        let mut a = T::zero();
        let mut s = T::lit(self.initial_sign as f64);
        for &b in &self.breakpoints {
            out.push((a, b, s));
            a = b;
            s = -s;
        }
        out.push((a, self.echo_time, s));
        out
    }

    /// Sign of the last interval; the transverse plane is mirrored once per π pulse.
    pub fn final_sign(&self) -> T {
        if self.breakpoints.len() % 2 == 0 {
            T::one()
        } else {
            -T::one()
        }
    }
}

pub fn filter_function<T: Real>(seq: &PulseSequence<T>) -> FilterFunction<T> {
    FilterFunction {
        breakpoints: seq.refocusing_pulses().map(|p| p.center()).collect(),
        initial_sign: 1,
        echo_time: seq.echo_time,
    }
}
