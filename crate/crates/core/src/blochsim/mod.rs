//! Rotating-frame simulation of a spin-packet ensemble through a pulse
//! sequence with RF Zeeman modulation, inhomogeneous detuning, RF amplitude
//! spread and stretched-exponential decoherence.
//!
//! Packets evolve independently and in parallel; the ensemble sum is taken in
//! packet order afterwards, so a trace is bit-identical for a given seed no
//! matter how many worker threads ran it.

mod integrate;

pub use integrate::{cross, norm, rk4, rotate, Vec3};

use num_complex::Complex;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::analytic::field_integral;
use crate::error::{Error, Result};
use crate::physics::{CoilCalibration, SpinSystem};
use crate::rf::RFWaveform;
use crate::scalar::{sin_turns, Real};
use crate::sequence::{Pulse, PulseSequence};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpinPacket<T> {
    pub magnetization: Vec3<T>,
    /// rad/s
    pub detuning: T,
    pub weight: T,
    /// Local RF field relative to nominal.
    pub rf_scale: T,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DetuningDistribution<T> {
    Delta,
    /// Standard deviation in rad/s.
    Gaussian(T),
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleConfig<T> {
    pub n_packets: usize,
    pub detuning: DetuningDistribution<T>,
    /// Relative standard deviation of the RF amplitude across packets.
    pub rf_amplitude_spread: T,
    pub seed: u64,
    /// Readout window is `echo_time ± readout_halfwidth`, s.
    pub readout_halfwidth: T,
    pub readout_samples: usize,
}

impl<T: Real> EnsembleConfig<T> {
    /// Identical on-resonance packets with a uniform field, read out exactly at the echo.
    pub fn uniform(n_packets: usize) -> Self {
        Self {
            n_packets,
            detuning: DetuningDistribution::Delta,
            rf_amplitude_spread: T::zero(),
            seed: 0,
            readout_halfwidth: T::zero(),
            readout_samples: 1,
        }
    }

    /// Detuning drawn from the spin system's inhomogeneous linewidth.
    pub fn for_system(sys: &SpinSystem<T>, n_packets: usize, rf_amplitude_spread: T, seed: u64) -> Self {
        let detuning = if sys.inhomogeneous_sigma > T::zero() {
            DetuningDistribution::Gaussian(sys.inhomogeneous_sigma)
        } else {
            DetuningDistribution::Delta
        };
        Self {
            n_packets,
            detuning,
            rf_amplitude_spread,
            seed,
            readout_halfwidth: T::zero(),
            readout_samples: 1,
        }
    }

    pub fn with_readout(mut self, halfwidth: T, samples: usize) -> Self {
        self.readout_halfwidth = halfwidth;
        self.readout_samples = samples;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_packets == 0 {
            return Err(Error::Config("ensemble needs at least one packet".into()));
        }
        if let DetuningDistribution::Gaussian(s) = self.detuning {
            if !(s >= T::zero()) || !s.is_finite() {
                return Err(Error::Config(format!("detuning sigma must be ≥ 0, got {s}")));
            }
        }
        if !(self.rf_amplitude_spread >= T::zero()) || !self.rf_amplitude_spread.is_finite() {
            return Err(Error::Config("rf_amplitude_spread must be ≥ 0".into()));
        }
        if !(self.readout_halfwidth >= T::zero()) || self.readout_samples == 0 {
            return Err(Error::Config("readout window needs halfwidth ≥ 0 and ≥ 1 sample".into()));
        }
        if self.readout_halfwidth > T::zero() && self.readout_samples < 2 {
            return Err(Error::Config("a readout window of nonzero width needs ≥ 2 samples".into()));
        }
        Ok(())
    }

    /// Deterministic packet draw from `seed`, in packet order.
    pub fn draw_packets(&self) -> Vec<SpinPacket<T>> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let weight = T::one() / T::lit(self.n_packets as f64);
        (0..self.n_packets)
            .map(|_| {
                let z1: f64 = StandardNormal.sample(&mut rng);
                let z2: f64 = StandardNormal.sample(&mut rng);
                let detuning = match self.detuning {
                    DetuningDistribution::Delta => T::zero(),
                    DetuningDistribution::Gaussian(s) => s * T::lit(z1),
                };
                SpinPacket {
                    magnetization: [T::zero(), T::zero(), T::one()],
                    detuning,
                    weight,
                    rf_scale: T::one() + self.rf_amplitude_spread * T::lit(z2),
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PulseMode<T> {
    /// Instantaneous rotations; free precession integrated exactly.
    Ideal,
    /// Finite rectangular pulses, fixed-step RK4 throughout. RF is off while
    /// a pulse is on. `max_step` overrides the automatic step.
    Finite { max_step: Option<T> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationTrace<T> {
    pub times: Vec<T>,
    /// Weighted ensemble mean `⟨Mx⟩ + i⟨My⟩` including the decoherence envelope.
    pub ensemble_mxy: Vec<Complex<T>>,
    pub echo_window: (T, T),
    /// True when an even number of π pulses left the transverse plane mirrored
    /// relative to the filter-function sign convention.
    pub mirrored: bool,
    /// Transverse direction of an unperturbed, on-resonance echo.
    pub ideal_echo: Complex<T>,
    /// Largest `||M| − 1|` over packets at the end of the record.
    pub max_norm_error: T,
}

struct Plan<T> {
    gamma_eff: T,
    pulses: Vec<Pulse<T>>,
    wave: RFWaveform<T>,
    samples: Vec<T>,
}

/// Largest step the finite-pulse integrator accepts: `min(t_pulse/50, 1/(200 ν))`.
pub fn finite_step_bound<T: Real>(seq: &PulseSequence<T>, wave: &RFWaveform<T>) -> T {
    let pulse_bound = seq.shortest_pulse() / T::lit(50.0);
    if wave.is_silent() {
        pulse_bound
    } else {
        pulse_bound.min(T::one() / (T::lit(200.0) * wave.frequency))
    }
}

/// Largest rotation per RK4 step allowed by the automatic step choice, rad.
pub const MAX_ROTATION_PER_STEP: f64 = 0.02;

pub fn evolve<T: Real>(
    sys: &SpinSystem<T>,
    cal: &CoilCalibration<T>,
    seq: &PulseSequence<T>,
    wave: &RFWaveform<T>,
    ens: &EnsembleConfig<T>,
    mode: PulseMode<T>,
) -> Result<SimulationTrace<T>> {
    sys.validate()?;
    cal.validate()?;
    seq.validate()?;
    wave.validate()?;
    ens.validate()?;
    for (i, w) in wave.windows.iter().enumerate() {
        if w.on < T::zero() || w.off > seq.echo_time {
            return Err(Error::Domain(format!(
                "RF window {i} [{:e}, {:e}) s lies outside [0, echo_time = {:e}] s",
                w.on, w.off, seq.echo_time
            )));
        }
    }

    let te = seq.echo_time;
    let hw = ens.readout_halfwidth;
    let last_pulse_end = seq.pulses.last().map(|p| p.end()).unwrap_or(T::zero());
    if te - hw < last_pulse_end || te + hw > seq.total_time {
        return Err(Error::Config(format!(
            "readout window echo_time ± {hw:e} s must lie between the last pulse and total_time"
        )));
    }
    let samples: Vec<T> = if ens.readout_samples == 1 {
        vec![te]
    } else {
        let n = ens.readout_samples - 1;
        (0..=n)
            .map(|k| te - hw + (hw + hw) * T::lit(k as f64) / T::lit(n as f64))
            .collect()
    };

    let filt = seq.filter_function();
    let packets = ens.draw_packets();
    let gamma_eff = sys.gamma() * cal.coupling_eta;
    let plan = Plan {
        gamma_eff,
        pulses: seq.pulses.clone(),
        wave: match mode {
            PulseMode::Ideal => wave.clone(),
            PulseMode::Finite { .. } => wave.excluding(&seq.pulse_intervals()),
        },
        samples,
    };

    let step = match mode {
        PulseMode::Ideal => T::zero(),
        PulseMode::Finite { max_step } => {
            let bound = finite_step_bound(seq, wave);
            match max_step {
                Some(h) if !(h > T::zero()) || h > bound => {
                    return Err(Error::Config(format!(
                        "finite-pulse step {h:e} s violates the stability bound {bound:e} s"
                    )))
                }
                Some(h) => h,
                None => {
                    let max_rabi = seq
                        .pulses
                        .iter()
                        .map(|p| p.rabi_rate().abs())
                        .fold(T::zero(), T::max);
                    let max_free = packets
                        .iter()
                        .map(|p| p.detuning.abs() + (gamma_eff * p.rf_scale * wave.amplitude).abs())
                        .fold(T::zero(), T::max);
                    let omega_max = max_rabi.max(max_free);
                    bound.min(T::lit(MAX_ROTATION_PER_STEP) / omega_max)
                }
            }
        }
    };

    let per_packet: Vec<Result<(Vec<Complex<T>>, T)>> = packets
        .par_iter()
        .enumerate()
        .map(|(i, p)| match mode {
            PulseMode::Ideal => Ok(evolve_ideal(&plan, p)),
            PulseMode::Finite { .. } => evolve_finite(&plan, p, step, i),
        })
        .collect();

    let n_samples = plan.samples.len();
    let mut sum = vec![Complex::new(T::zero(), T::zero()); n_samples];
    let mut max_norm_error = T::zero();
    for (p, res) in packets.iter().zip(per_packet) {
        let (mxy, norm_err) = res?;
        for (acc, m) in sum.iter_mut().zip(mxy) {
            *acc = *acc + m * p.weight;
        }
        max_norm_error = max_norm_error.max(norm_err);
    }
    let plan_samples = plan.samples.clone();
    let ensemble_mxy = plan
        .samples
        .iter()
        .zip(sum)
        .map(|(&t, m)| m * sys.decoherence(t))
        .collect();

    let reference = SpinPacket {
        magnetization: [T::zero(), T::zero(), T::one()],
        detuning: T::zero(),
        weight: T::one(),
        rf_scale: T::zero(),
    };
    let ideal_plan = Plan {
        samples: vec![te],
        ..plan
    };
    let ideal_echo = evolve_ideal(&ideal_plan, &reference).0[0];

    Ok(SimulationTrace {
        times: plan_samples,
        ensemble_mxy,
        echo_window: (te - hw, te + hw),
        mirrored: filt.breakpoints.len() % 2 == 0,
        ideal_echo,
        max_norm_error,
    })
}

fn pulse_axis<T: Real>(p: &Pulse<T>) -> Vec3<T> {
    let (s, c) = p.axis_phase.sin_cos();
    [c, s, T::zero()]
}

fn free_precess<T: Real>(plan: &Plan<T>, p: &SpinPacket<T>, m: Vec3<T>, a: T, b: T) -> Vec3<T> {
    let theta = p.detuning * (b - a) + plan.gamma_eff * p.rf_scale * field_integral(&plan.wave, a, b);
    rotate(m, [T::zero(), T::zero(), T::one()], theta)
}

fn transverse<T: Real>(m: Vec3<T>) -> Complex<T> {
    Complex::new(m[0], m[1])
}

fn norm_error<T: Real>(m: Vec3<T>) -> T {
    (norm(m) - T::one()).abs()
}

fn evolve_ideal<T: Real>(plan: &Plan<T>, p: &SpinPacket<T>) -> (Vec<Complex<T>>, T) {
    let mut m = p.magnetization;
    let mut t = plan.pulses[0].center();
    for pulse in &plan.pulses {
        let c = pulse.center();
        m = free_precess(plan, p, m, t, c);
        m = rotate(m, pulse_axis(pulse), pulse.nominal_angle);
        t = c;
    }
    let mut out = Vec::with_capacity(plan.samples.len());
    for &s in &plan.samples {
        m = free_precess(plan, p, m, t, s);
        t = s;
        out.push(transverse(m));
    }
    (out, norm_error(m))
}

fn evolve_finite<T: Real>(plan: &Plan<T>, p: &SpinPacket<T>, step: T, index: usize) -> Result<(Vec<Complex<T>>, T)> {
    let t_start = plan.pulses[0].start;
    let t_end = *plan.samples.last().expect("at least one sample");
    let mut cuts: Vec<T> = vec![t_start, t_end];
    for pulse in &plan.pulses {
        cuts.push(pulse.start);
        cuts.push(pulse.end());
    }
    cuts.extend(plan.wave.edges());
    cuts.extend(plan.samples.iter().copied());
    cuts.retain(|&c| c >= t_start && c <= t_end);
    cuts.sort_by(|a, b| a.partial_cmp(b).expect("finite times"));
    cuts.dedup();

    let gamma_scaled = plan.gamma_eff * p.rf_scale;
    let mut m = p.magnetization;
    let mut out = Vec::with_capacity(plan.samples.len());
    let mut next_sample = 0;
    let two = T::lit(2.0);
    for seg in cuts.windows(2) {
        let (a, b) = (seg[0], seg[1]);
        let len = b - a;
        if len > T::zero() {
            let n = (len / step).ceil().max(T::one());
            let n_steps = n.to_usize().unwrap_or(1);
            let h = len / n;
            let mid = (a + b) / two;
            match plan.pulses.iter().find(|q| q.start <= mid && mid < q.end()) {
                Some(q) => {
                    let rabi = q.rabi_rate();
                    let ax = pulse_axis(q);
                    let w = [rabi * ax[0], rabi * ax[1], p.detuning];
                    m = rk4(m, |_| w, a, h, n_steps);
                }
                None => match plan.wave.windows.iter().find(|w| w.contains(mid)) {
                    // Evaluate the window's own sinusoid on the closed segment:
                    // sampling the half-open gate at its right edge would
                    // read zero and cost an order of accuracy.
                    Some(w) => {
                        let amp = gamma_scaled * plan.wave.amplitude;
                        let omega = |t: T| {
                            [T::zero(), T::zero(), p.detuning + amp * sin_turns(plan.wave.turns_at(w, t))]
                        };
                        m = rk4(m, omega, a, h, n_steps);
                    }
                    None => m = rk4(m, |_| [T::zero(), T::zero(), p.detuning], a, h, n_steps),
                },
            }
            if !(m[0].is_finite() && m[1].is_finite() && m[2].is_finite()) {
                return Err(Error::Numerical {
                    packet: index,
                    time: b.to_f64_lossy(),
                });
            }
        }
        while next_sample < plan.samples.len() && plan.samples[next_sample] <= b {
            out.push(transverse(m));
            next_sample += 1;
        }
    }
    Ok((out, norm_error(m)))
}

fn orient<T: Real>(trace: &SimulationTrace<T>, z: Complex<T>) -> Complex<T> {
    if trace.mirrored {
        z.conj() / trace.ideal_echo.conj()
    } else {
        z / trace.ideal_echo
    }
}

/// Trapezoidal mean of the ensemble signal over the echo window.
fn window_mean<T: Real>(trace: &SimulationTrace<T>) -> Result<Complex<T>> {
    let (lo, hi) = trace.echo_window;
    let pts: Vec<(T, Complex<T>)> = trace
        .times
        .iter()
        .zip(&trace.ensemble_mxy)
        .filter(|(t, _)| **t >= lo && **t <= hi)
        .map(|(t, m)| (*t, *m))
        .collect();
    match pts.len() {
        0 => Err(Error::Domain("echo window contains no samples".into())),
        1 => Ok(pts[0].1),
        _ => {
            let two = T::lit(2.0);
            let mut acc = Complex::new(T::zero(), T::zero());
            for w in pts.windows(2) {
                acc = acc + (w[0].1 + w[1].1) * ((w[1].0 - w[0].0) / two);
            }
            let width = pts[pts.len() - 1].0 - pts[0].0;
            Ok(acc / width)
        }
    }
}

/// Complex echo in the filter-function orientation: an unperturbed echo is
/// real positive and the argument is the accumulated phase. With a
/// `reference` (same ensemble, no RF) the result is divided by the
/// reference echo, giving normalized amplitude and relative phase.
pub fn echo_observable<T: Real>(
    trace: &SimulationTrace<T>,
    reference: Option<&SimulationTrace<T>>,
) -> Result<Complex<T>> {
    let z = orient(trace, window_mean(trace)?);
    match reference {
        None => Ok(z),
        Some(r) => {
            let zr = orient(r, window_mean(r)?);
            if zr.norm() == T::zero() {
                return Err(Error::Domain("reference echo vanished".into()));
            }
            Ok(z / zr)
        }
    }
}

/// Runs the sequence with and without RF on the same ensemble and returns the
/// normalized complex echo.
pub fn normalized_echo<T: Real>(
    sys: &SpinSystem<T>,
    cal: &CoilCalibration<T>,
    seq: &PulseSequence<T>,
    wave: &RFWaveform<T>,
    ens: &EnsembleConfig<T>,
    mode: PulseMode<T>,
) -> Result<Complex<T>> {
    let signal = evolve(sys, cal, seq, wave, ens, mode)?;
    let reference = evolve(sys, cal, seq, &wave.with_amplitude(T::zero()), ens, mode)?;
    echo_observable(&signal, Some(&reference))
}
