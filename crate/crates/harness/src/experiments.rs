//! The experiment catalog: amplitude and phase sweeps, harmonic symmetry,
//! split-interval gating, pulse-count sweeps and sensitivity reports.
//!
//! Grid points run on the rayon pool and are gathered in grid order. Every
//! point simulates the same ensemble (drawn from the master seed); the
//! measurement noise of point `i` uses a seed derived from (seed, i).

use rayon::prelude::*;
use serde::Serialize;

use spinsense_core::analytic::{accumulate_phase, split_interval_decomposition};
use spinsense_core::blochsim::{evolve, normalized_echo, SimulationTrace};
use spinsense_core::echo::{add_measurement_noise, unwrap_degrees, wrap_phase, EchoResult};
use spinsense_core::rf::{build_split_interval, synchronized_frequency, synchronized_waveform, RFWaveform};
use spinsense_core::sensitivity::{dd_sensitivity_sweep, fit_transduction_auto, SensitivityReport, TransductionFit};
use spinsense_core::sequence::{build_hahn, PulseSequence};
use spinsense_core::units::NS;

use crate::config::{ExperimentConfig, Kind};
use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepMetadata {
    pub config_hash: String,
    pub seed: u64,
}

/// One curve: echo results and analytic phases over a shared axis.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub label: String,
    /// Column name including the unit, e.g. `b1_t` or `phi_rf_deg`.
    pub axis_name: String,
    pub axis_values: Vec<f64>,
    pub echo_results: Vec<EchoResult<f64>>,
    /// rad
    pub analytic_phases: Vec<f64>,
    pub metadata: SweepMetadata,
}

impl SweepResult {
    /// `(axis, unwrapped phase °)` pairs for a transduction fit.
    pub fn phase_points(&self) -> Vec<(f64, f64)> {
        self.axis_values
            .iter()
            .zip(&self.echo_results)
            .map(|(&x, e)| (x, e.phase_unwrapped))
            .collect()
    }
}

/// Deterministic per-point seed (splitmix64 of seed and index).
pub fn point_seed(seed: u64, index: usize) -> u64 {
    let mut z = seed ^ (index as u64).wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn metadata(cfg: &ExperimentConfig) -> SweepMetadata {
    SweepMetadata {
        config_hash: cfg.hash(),
        seed: cfg.seed,
    }
}

/// Simulates one waveform per grid point against `seq` and assembles the curve.
fn sweep<F>(cfg: &ExperimentConfig, seq: &PulseSequence<f64>, label: String, axis_name: &str, axis: &[f64], wave_at: F) -> Result<SweepResult>
where
    F: Fn(usize) -> std::result::Result<RFWaveform<f64>, spinsense_core::Error> + Sync,
{
    let sys = cfg.spin_system()?;
    let cal = cfg.calibration()?;
    let ens = cfg.ensemble()?;
    let mode = cfg.pulse_mode();
    let filt = seq.filter_function();
    let points: Vec<(EchoResult<f64>, f64)> = (0..axis.len())
        .into_par_iter()
        .map(|i| {
            let point = || -> std::result::Result<_, spinsense_core::Error> {
                let wave = wave_at(i)?;
                let z = normalized_echo(&sys, &cal, seq, &wave, &ens, mode)?;
                let echo = add_measurement_noise(z, cfg.noise.sigma, cfg.noise.n_averages, point_seed(cfg.seed, i))?;
                let phi = accumulate_phase(&sys, &cal, &filt, &wave)?.phi;
                Ok((echo, phi))
            };
            point().map_err(|e| HarnessError::at_point(i, e))
        })
        .collect::<Result<_>>()?;
    let raw: Vec<f64> = points.iter().map(|p| p.0.phase_unwrapped).collect();
    let unwrapped = unwrap_degrees(&raw);
    let echo_results = points
        .iter()
        .zip(unwrapped)
        .map(|(p, u)| EchoResult {
            phase_unwrapped: u,
            phase_wrapped: wrap_phase(u),
            ..p.0
        })
        .collect();
    Ok(SweepResult {
        label,
        axis_name: axis_name.to_string(),
        axis_values: axis.to_vec(),
        echo_results,
        analytic_phases: points.iter().map(|p| p.1).collect(),
        metadata: metadata(cfg),
    })
}

fn amplitude_sweep_for(cfg: &ExperimentConfig, seq: &PulseSequence<f64>, tau: f64, label: String) -> Result<SweepResult> {
    let grid = cfg.amplitude_grid()?;
    let template = synchronized_waveform(
        &seq.filter_function(),
        tau,
        cfg.rf.harmonic,
        0.0,
        cfg.rf.phase_deg.to_radians(),
        cfg.rf.reset_mode.into(),
    )?;
    sweep(cfg, seq, label, "b1_t", &grid, |i| Ok(template.with_amplitude(grid[i])))
}

fn phase_sweep_for(cfg: &ExperimentConfig, seq: &PulseSequence<f64>, harmonic: u32, b1: f64, label: String) -> Result<SweepResult> {
    let grid = cfg.phase_grid_deg()?;
    let template = synchronized_waveform(&seq.filter_function(), cfg.tau(), harmonic, b1, 0.0, cfg.rf.reset_mode.into())?;
    sweep(cfg, seq, label, "phi_rf_deg", &grid, |i| Ok(template.with_phase(grid[i].to_radians())))
}

pub fn run_sweep_amplitude(cfg: &ExperimentConfig) -> Result<SweepResult> {
    cfg.validate()?;
    let seq = cfg.sequence()?;
    let label = format!("{} n={}", cfg.sequence.kind.name(), cfg.rf.harmonic);
    amplitude_sweep_for(cfg, &seq, cfg.tau(), label)
}

/// One curve per amplitude in `rf.phase_sweep_amplitudes_mt`.
pub fn run_sweep_phase(cfg: &ExperimentConfig) -> Result<Vec<SweepResult>> {
    cfg.validate()?;
    let seq = cfg.sequence()?;
    cfg.phase_sweep_amplitudes()
        .into_iter()
        .map(|b1| phase_sweep_for(cfg, &seq, cfg.rf.harmonic, b1, format!("b1={:.4}mT", b1 * 1e3)))
        .collect()
}

/// Phase sweeps at fixed amplitude, one per harmonic in `symmetry.harmonics`.
pub fn run_symmetry(cfg: &ExperimentConfig) -> Result<Vec<SweepResult>> {
    cfg.validate()?;
    let seq = cfg.sequence()?;
    let b1 = cfg.rf.amplitude_mt * 1e-3;
    cfg.symmetry
        .harmonics
        .iter()
        .map(|&n| phase_sweep_for(cfg, &seq, n, b1, format!("n={n}")))
        .collect()
}

/// Analytic phases of the split-interval decomposition at one φ₀, rad.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SplitRow {
    pub phi0_deg: f64,
    pub first: f64,
    pub second: f64,
    pub full: f64,
    /// First interval swept, second-interval lobe held at phase 0.
    pub both: f64,
    pub first_plus_second: f64,
    pub full_minus_first: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitResult {
    /// Curves labelled first, second, full, both and off.
    pub sweeps: Vec<SweepResult>,
    pub identity: Vec<SplitRow>,
}

/// RF on the first τ only, the second τ only, both as one sinusoid, both as
/// independent lobes, or neither, for a Hahn echo at the configured delay.
pub fn run_split_interval(cfg: &ExperimentConfig) -> Result<SplitResult> {
    cfg.validate()?;
    if cfg.sequence.kind != Kind::Hahn {
        return Err(HarnessError::Config("split-interval experiments need sequence.kind = hahn".into()));
    }
    let tau = cfg.tau();
    let seq = build_hahn(tau, cfg.sequence.t_pi2_ns * NS, cfg.sequence.t_pi_ns * NS)?;
    let grid = cfg.phase_grid_deg()?;
    let b1 = cfg.rf.amplitude_mt * 1e-3;
    let filt = seq.filter_function();
    type Gate = fn(f64, f64, f64) -> std::result::Result<RFWaveform<f64>, spinsense_core::Error>;
    let gatings: [(&str, Gate); 5] = [
        ("first", |tau, b1, p| build_split_interval(tau, b1, p, 0.0, true, false)),
        ("second", |tau, b1, p| build_split_interval(tau, b1, 0.0, p + std::f64::consts::PI, false, true)),
        ("full", |tau, b1, p| RFWaveform::continuous(b1, synchronized_frequency(tau, 1)?, p, 0.0, 2.0 * tau)),
        ("both", |tau, b1, p| build_split_interval(tau, b1, p, 0.0, true, true)),
        ("off", |tau, _, _| Ok(RFWaveform::silent(synchronized_frequency(tau, 1)?))),
    ];
    let sweeps = gatings
        .iter()
        .map(|(name, make)| sweep(cfg, &seq, name.to_string(), "phi_rf_deg", &grid, |i| make(tau, b1, grid[i].to_radians())))
        .collect::<Result<Vec<_>>>()?;
    let sys = cfg.spin_system()?;
    let cal = cfg.calibration()?;
    let identity = grid
        .iter()
        .map(|&deg| {
            let p = deg.to_radians();
            let s = split_interval_decomposition(&sys, &cal, tau, b1, p)?;
            let both = accumulate_phase(&sys, &cal, &filt, &build_split_interval(tau, b1, p, 0.0, true, true)?)?.phi;
            Ok(SplitRow {
                phi0_deg: deg,
                first: s.first,
                second: s.second,
                full: s.full,
                both,
                first_plus_second: s.first + s.second,
                full_minus_first: s.full - s.first,
            })
        })
        .collect::<std::result::Result<Vec<_>, spinsense_core::Error>>()?;
    Ok(SplitResult { sweeps, identity })
}

/// Amplitude sweeps for every (protocol, n_pi, τ), normalized per sequence at B₁ = 0.
pub fn run_dd_sweep(cfg: &ExperimentConfig) -> Result<Vec<SweepResult>> {
    cfg.validate()?;
    let mut out = Vec::new();
    for &kind in &cfg.dd.protocols {
        for &tau_ns in &cfg.dd.tau_ns {
            for &n in &cfg.dd.n_pi {
                let tau = tau_ns * NS;
                let seq = cfg.build_sequence(kind, n, tau)?;
                let label = format!("{}/n{}/tau{}ns", kind.name(), n, tau_ns);
                out.push(amplitude_sweep_for(cfg, &seq, tau, label)?);
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityRow {
    pub protocol: Kind,
    pub n_pi: usize,
    /// s
    pub tau: f64,
    pub report: SensitivityReport<f64>,
}

/// Simulate → fit → report for every (protocol, τ, n_pi) of the `dd` section.
pub fn run_sensitivity(cfg: &ExperimentConfig) -> Result<Vec<SensitivityRow>> {
    cfg.validate()?;
    let sim = cfg.dd_sim_config()?;
    let mut rows = Vec::new();
    for &kind in &cfg.dd.protocols {
        for &tau_ns in &cfg.dd.tau_ns {
            let reports = dd_sensitivity_sweep(kind.sequence_kind(), &cfg.dd.n_pi, tau_ns * NS, &sim).map_err(|source| {
                HarnessError::Core {
                    context: format!("{} sensitivity sweep at tau = {tau_ns} ns", kind.name()),
                    source,
                }
            })?;
            rows.extend(cfg.dd.n_pi.iter().zip(reports).map(|(&n, report)| SensitivityRow {
                protocol: kind,
                n_pi: n,
                tau: tau_ns * NS,
                report,
            }));
        }
    }
    Ok(rows)
}

/// Ensemble signal sampled across `echo ± halfwidth` at amplitude `b1` (T).
pub fn run_trace(cfg: &ExperimentConfig, b1: f64, halfwidth: f64, samples: usize) -> Result<SimulationTrace<f64>> {
    cfg.validate()?;
    let seq = cfg.sequence()?;
    let wave = synchronized_waveform(
        &seq.filter_function(),
        cfg.tau(),
        cfg.rf.harmonic,
        b1,
        cfg.rf.phase_deg.to_radians(),
        cfg.rf.reset_mode.into(),
    )?;
    let ens = cfg.ensemble()?.with_readout(halfwidth, samples);
    evolve(&cfg.spin_system()?, &cfg.calibration()?, &seq, &wave, &ens, cfg.pulse_mode()).map_err(|source| {
        HarnessError::Core {
            context: "echo trace".into(),
            source,
        }
    })
}

/// Transduction fit of an amplitude sweep (axis in T, unwrapped phase).
pub fn fit_amplitude_sweep(sweep: &SweepResult) -> Result<TransductionFit<f64>> {
    fit_transduction_auto(&sweep.phase_points()).map_err(|source| HarnessError::Core {
        context: format!("transduction fit of '{}'", sweep.label),
        source,
    })
}
