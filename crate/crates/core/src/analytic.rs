//! Closed-form echo phase: `φ = γ·η·∫ F(t)·B_RF(t) dt` over the filter domain.
//!
//! Every gated sinusoid segment is integrated with its antiderivative, written
//! in product form (`cos a − cos b = 2 sin((a+b)/2) sin((b−a)/2)`) so that
//! small and cancelling segments keep full relative precision.

use crate::error::{Error, Result};
use crate::physics::{CoilCalibration, SpinSystem};
use crate::rf::{build_split_interval, RFWaveform};
use crate::scalar::{sin_turns, Real};
use crate::sequence::FilterFunction;

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseAccumulation<T> {
    /// Signed accumulated phase, rad.
    pub phi: T,
    /// Contribution of each constant-sign filter interval, rad.
    pub per_interval: Vec<T>,
}

/// `∫_a^b B_RF(t) dt` in T·s.
pub fn field_integral<T: Real>(wave: &RFWaveform<T>, a: T, b: T) -> T {
    if !(b > a) || wave.amplitude == T::zero() {
        return T::zero();
    }
    let two = T::lit(2.0);
    let mut total = T::zero();
    for w in &wave.windows {
        let c = a.max(w.on);
        let d = b.min(w.off);
        if !(d > c) {
            continue;
        }
        let mid = wave.turns_at(w, (c + d) / two);
        let half = wave.frequency * (d - c) / two;
        total = total + sin_turns(mid) * sin_turns(half);
    }
    total * wave.amplitude / (T::PI() * wave.frequency)
}

fn check_domain<T: Real>(filt: &FilterFunction<T>, wave: &RFWaveform<T>) -> Result<()> {
    for (i, w) in wave.windows.iter().enumerate() {
        if w.on < T::zero() || w.off > filt.echo_time {
            return Err(Error::Domain(format!(
                "RF window {i} [{:e}, {:e}) s exceeds the filter domain [0, {:e}] s",
                w.on, w.off, filt.echo_time
            )));
        }
    }
    Ok(())
}

pub fn accumulate_phase<T: Real>(
    sys: &SpinSystem<T>,
    cal: &CoilCalibration<T>,
    filt: &FilterFunction<T>,
    wave: &RFWaveform<T>,
) -> Result<PhaseAccumulation<T>> {
    check_domain(filt, wave)?;
    let scale = sys.gamma() * cal.coupling_eta;
    let per_interval: Vec<T> = filt
        .intervals()
        .into_iter()
        .map(|(a, b, s)| s * scale * field_integral(wave, a, b))
        .collect();
    let phi = per_interval.iter().copied().sum();
    Ok(PhaseAccumulation { phi, per_interval })
}

/// Accumulated phase as a function of the RF phase φ_RF.
pub fn phase_vs_rf_phase<T: Real>(
    sys: &SpinSystem<T>,
    cal: &CoilCalibration<T>,
    filt: &FilterFunction<T>,
    wave_template: &RFWaveform<T>,
    phi_grid: &[T],
) -> Result<Vec<(T, T)>> {
    if phi_grid.is_empty() {
        return Err(Error::Domain("RF phase grid is empty".into()));
    }
    phi_grid
        .iter()
        .map(|&p| accumulate_phase(sys, cal, filt, &wave_template.with_phase(p)).map(|acc| (p, acc.phi)))
        .collect()
}

/// Phases for RF on the first τ only, on the second τ only, and on both as one
/// continuous n = 1 sinusoid, all for a Hahn echo with delay τ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitPhases<T> {
    pub first: T,
    pub second: T,
    pub full: T,
}

/// Filter function of an ideal Hahn echo with delay `tau`.
pub fn hahn_filter<T: Real>(tau: T) -> FilterFunction<T> {
    FilterFunction {
        breakpoints: vec![tau],
        initial_sign: 1,
        echo_time: tau * T::lit(2.0),
    }
}

/// The second-interval lobe is given phase `phase + π` so that the first and
/// second gated waveforms tile the continuous one exactly.
pub fn split_interval_decomposition<T: Real>(
    sys: &SpinSystem<T>,
    cal: &CoilCalibration<T>,
    tau: T,
    amplitude: T,
    phase: T,
) -> Result<SplitPhases<T>> {
    let filt = hahn_filter(tau);
    let first = build_split_interval(tau, amplitude, phase, T::zero(), true, false)?;
    let second = build_split_interval(tau, amplitude, T::zero(), phase + T::PI(), false, true)?;
    let full = RFWaveform::continuous(amplitude, first.frequency, phase, T::zero(), filt.echo_time)?;
    Ok(SplitPhases {
        first: accumulate_phase(sys, cal, &filt, &first)?.phi,
        second: accumulate_phase(sys, cal, &filt, &second)?.phi,
        full: accumulate_phase(sys, cal, &filt, &full)?.phi,
    })
}
