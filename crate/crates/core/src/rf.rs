//! The gated sinusoidal RF signal field `B_RF(t)`.

use crate::error::{Error, Result};
use crate::scalar::{sin_turns, Real};
use crate::sequence::FilterFunction;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ResetMode {
    /// One sinusoid referenced to t = 0, gated by the windows.
    Continuous,
    /// The sinusoid restarts at each window's reset origin.
    PerWindowReset,
}

/// Half-open gate `[on, off)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GateWindow<T> {
    pub on: T,
    pub off: T,
    /// Time the sinusoid restarts from in `PerWindowReset` mode; normally `on`.
    pub reset_origin: T,
    /// Added to the waveform phase inside this window, rad.
    pub phase_offset: T,
}

impl<T: Real> GateWindow<T> {
    pub fn new(on: T, off: T) -> Self {
        Self {
            on,
            off,
            reset_origin: on,
            phase_offset: T::zero(),
        }
    }

    pub fn with_phase_offset(mut self, phase_offset: T) -> Self {
        self.phase_offset = phase_offset;
        self
    }

    pub fn contains(&self, t: T) -> bool {
        self.on <= t && t < self.off
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RFWaveform<T> {
    /// Peak field B₁,RF, T.
    pub amplitude: T,
    /// ν_RF, Hz.
    pub frequency: T,
    /// φ_RF, rad.
    pub phase: T,
    pub windows: Vec<GateWindow<T>>,
    pub reset_mode: ResetMode,
}

/// `n / (2τ)`: the RF frequency that fits `n` half periods into one delay τ.
pub fn synchronized_frequency<T: Real>(tau: T, n: u32) -> Result<T> {
    if n == 0 {
        return Err(Error::Domain("harmonic n must be at least 1".into()));
    }
    if !(tau > T::zero()) || !tau.is_finite() {
        return Err(Error::Domain(format!("tau must be positive, got {tau}")));
    }
    Ok(T::lit(n as f64) / (T::lit(2.0) * tau))
}

impl<T: Real> RFWaveform<T> {
    pub fn new(
        amplitude: T,
        frequency: T,
        phase: T,
        windows: Vec<GateWindow<T>>,
        reset_mode: ResetMode,
    ) -> Result<Self> {
        let w = Self {
            amplitude,
            frequency,
            phase,
            windows,
            reset_mode,
        };
        w.validate()?;
        Ok(w)
    }

    /// Single continuous window `[on, off)`.
    pub fn continuous(amplitude: T, frequency: T, phase: T, on: T, off: T) -> Result<Self> {
        Self::new(
            amplitude,
            frequency,
            phase,
            vec![GateWindow::new(on, off)],
            ResetMode::Continuous,
        )
    }

    /// A waveform that is identically zero.
    pub fn silent(frequency: T) -> Self {
        Self {
            amplitude: T::zero(),
            frequency,
            phase: T::zero(),
            windows: Vec::new(),
            reset_mode: ResetMode::Continuous,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.amplitude >= T::zero()) || !self.amplitude.is_finite() {
            return Err(Error::Config(format!("RF amplitude must be ≥ 0, got {}", self.amplitude)));
        }
        if !(self.frequency > T::zero()) || !self.frequency.is_finite() {
            return Err(Error::Config(format!("RF frequency must be > 0, got {}", self.frequency)));
        }
        if !self.phase.is_finite() {
            return Err(Error::Config("RF phase must be finite".into()));
        }
        for (i, w) in self.windows.iter().enumerate() {
            if !(w.on < w.off) || !w.on.is_finite() || !w.off.is_finite() {
                return Err(Error::Config(format!("RF window {i} is empty or inverted")));
            }
        }
        for (i, pair) in self.windows.windows(2).enumerate() {
            if pair[1].on < pair[0].off {
                return Err(Error::Config(format!(
                    "RF windows {i} and {} overlap or are out of order",
                    i + 1
                )));
            }
        }
        Ok(())
    }

    pub fn is_silent(&self) -> bool {
        self.windows.is_empty() || self.amplitude == T::zero()
    }

    pub fn with_amplitude(&self, amplitude: T) -> Self {
        Self {
            amplitude,
            ..self.clone()
        }
    }

    pub fn with_phase(&self, phase: T) -> Self {
        Self {
            phase,
            ..self.clone()
        }
    }

    /// Argument of the sinusoid at `t` inside window `w`, in turns.
    pub(crate) fn turns_at(&self, w: &GateWindow<T>, t: T) -> T {
        let t_ref = match self.reset_mode {
            ResetMode::Continuous => t,
            ResetMode::PerWindowReset => t - w.reset_origin,
        };
        self.frequency * t_ref + (self.phase + w.phase_offset) / T::TAU()
    }

    /// Field at time `t`, T. Exactly zero outside every window.
    pub fn sample(&self, t: T) -> T {
        match self.windows.iter().find(|w| w.contains(t)) {
            Some(w) => self.amplitude * sin_turns(self.turns_at(w, t)),
            None => T::zero(),
        }
    }

    /// Removes the given intervals (e.g. pulse durations) from every window.
    /// Reset origins and phase offsets of the surviving pieces are preserved.
    pub fn excluding(&self, holes: &[(T, T)]) -> Self {
        let mut windows = Vec::with_capacity(self.windows.len());
        for w in &self.windows {
            let mut pieces = vec![*w];
            for &(a, b) in holes {
                pieces = pieces
                    .into_iter()
                    .flat_map(|p| {
                        let mut out = Vec::with_capacity(2);
                        if b <= p.on || a >= p.off {
                            out.push(p);
                        } else {
                            if a > p.on {
                                out.push(GateWindow { off: a, ..p });
                            }
                            if b < p.off {
                                out.push(GateWindow { on: b, ..p });
                            }
                        }
                        out
                    })
                    .collect();
            }
            windows.extend(pieces);
        }
        windows.sort_by(|x, y| x.on.partial_cmp(&y.on).expect("finite window edges"));
        Self {
            windows,
            ..self.clone()
        }
    }

    /// All window edges, ascending.
    pub fn edges(&self) -> Vec<T> {
        let mut e: Vec<T> = self.windows.iter().flat_map(|w| [w.on, w.off]).collect();
        e.sort_by(|a, b| a.partial_cmp(b).expect("finite window edges"));
        e.dedup();
        e
    }
}

/// RF gated on the first and/or second τ interval of a Hahn echo, each half
/// restarting its own half-period lobe at `frequency = 1/(2τ)`.
pub fn build_split_interval<T: Real>(
    tau: T,
    amplitude: T,
    phase_first: T,
    phase_second: T,
    enable_first: bool,
    enable_second: bool,
) -> Result<RFWaveform<T>> {
    if !(tau > T::zero()) {
        return Err(Error::Domain(format!("tau must be positive, got {tau}")));
    }
    let frequency = synchronized_frequency(tau, 1)?;
    let mut windows = Vec::new();
    if enable_first {
        windows.push(GateWindow::new(T::zero(), tau).with_phase_offset(phase_first));
    }
    if enable_second {
        windows.push(GateWindow::new(tau, tau * T::lit(2.0)).with_phase_offset(phase_second));
    }
    if windows.is_empty() {
        log::warn!("split-interval waveform has both intervals disabled; the RF field is zero");
    }
    RFWaveform::new(amplitude, frequency, T::zero(), windows, ResetMode::PerWindowReset)
}

/// RF synchronized to a sequence's filter function at harmonic `n` of `1/(2τ)`.
///
/// `Continuous` gives one sinusoid on `[0, echo_time)`. `PerWindowReset` cuts
/// the filter domain into τ-long slots, restarts the sinusoid in each and
/// flips it by π wherever the filter sign is negative, so every refocusing
/// window accumulates with the same sign.
pub fn synchronized_waveform<T: Real>(
    filter: &FilterFunction<T>,
    tau: T,
    n: u32,
    amplitude: T,
    phase: T,
    mode: ResetMode,
) -> Result<RFWaveform<T>> {
    let frequency = synchronized_frequency(tau, n)?;
    let windows = match mode {
        ResetMode::Continuous => vec![GateWindow::new(T::zero(), filter.echo_time)],
        ResetMode::PerWindowReset => {
            let mut windows = Vec::new();
            for (a, b, sign) in filter.intervals() {
                let slots = ((b - a) / tau).round().max(T::one());
                let n_slots = slots.to_usize().unwrap_or(1);
                let width = (b - a) / slots;
                let offset = if sign < T::zero() { T::PI() } else { T::zero() };
                for k in 0..n_slots {
                    let on = a + width * T::lit(k as f64);
                    let off = if k + 1 == n_slots { b } else { a + width * T::lit((k + 1) as f64) };
                    windows.push(GateWindow::new(on, off).with_phase_offset(offset));
                }
            }
            windows
        }
    };
    RFWaveform::new(amplitude, frequency, phase, windows, mode)
}
