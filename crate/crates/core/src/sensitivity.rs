//! Metrology chain: transduction slope, minimum detectable field, spectral and
//! concentration sensitivity, dipole-field scale, and pulse-count sweeps.

use rayon::prelude::*;

use crate::analytic::{accumulate_phase, hahn_filter};
use crate::blochsim::{normalized_echo, EnsembleConfig, PulseMode};
use crate::echo::unwrap_degrees;
use crate::error::{Error, Result};
use crate::physics::{CoilCalibration, PhysicalConstants, SampleSpec, SpinSystem};
use crate::rf::{synchronized_waveform, ResetMode, RFWaveform};
use crate::scalar::Real;
use crate::sequence::{build_cp, build_pdd, SequenceKind};

/// Linear fits with a larger residual rms (degrees) fall back to the maximum derivative.
pub const FIT_RESIDUAL_THRESHOLD_DEG: f64 = 2.0;

/// Consecutive phases further apart than this (degrees) are taken as a wrap.
pub const MAX_PHASE_STEP_DEG: f64 = 90.0;

/// Averaging time that maps the minimum detectable field onto the spectral sensitivity, s.
pub const DEFAULT_T_MEAS: f64 = 0.375;

/// Reference figures for the BDPA radical ensemble.
pub mod bdpa {
    /// Measured inverse transduction dB/dφ, T/°.
    pub const INVERSE_SLOPE_T_PER_DEG: f64 = 9.8e-6;
    /// Spectral sensitivity, T/√Hz.
    pub const S: f64 = 6.0e-6;
    /// Concentration sensitivity, T·µm^{3/2}/√Hz.
    pub const S_VOL: f64 = 1.2e-9;
    /// Theoretical best spectral sensitivity, T/√Hz.
    pub const S_MIN: f64 = 1.5e-6;
    /// Theoretical best concentration sensitivity, T·µm^{3/2}/√Hz.
    pub const S_MIN_VOL: f64 = 3.1e-10;
    /// Spin density, cm⁻³.
    pub const DENSITY_CM3: f64 = 2.3e19;
    /// Delay used for the transduction measurement, s.
    pub const TAU: f64 = 1.19e-6;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FitMethod {
    LinearRegression,
    MaxDerivative,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransductionFit<T> {
    /// dφ/dB, °/T.
    pub slope: T,
    /// °
    pub intercept: T,
    /// Rms residual of the least-squares line over the fitted range, °.
    pub residual_rms: T,
    pub method: FitMethod,
    /// Field range of the fitted points, T.
    pub b_range: (T, T),
}

fn check_points<T: Real>(points: &[(T, T)]) -> Result<()> {
    if points.len() < 3 {
        return Err(Error::InsufficientData {
            needed: 3,
            got: points.len(),
        });
    }
    for w in points.windows(2) {
        if !(w[1].0 > w[0].0) {
            return Err(Error::Domain("field values must be strictly increasing".into()));
        }
    }
    for (i, w) in points.windows(2).enumerate() {
        let jump = (w[1].1 - w[0].1).abs();
        if jump > T::lit(MAX_PHASE_STEP_DEG) {
            return Err(Error::RequiresUnwrap {
                index: i + 1,
                jump_deg: jump.to_f64_lossy(),
            });
        }
    }
    Ok(())
}

fn least_squares<T: Real>(points: &[(T, T)]) -> (T, T, T) {
    let n = T::lit(points.len() as f64);
    let mx = points.iter().map(|p| p.0).fold(T::zero(), |a, b| a + b) / n;
    let my = points.iter().map(|p| p.1).fold(T::zero(), |a, b| a + b) / n;
    let mut sxy = T::zero();
    let mut sxx = T::zero();
    for &(x, y) in points {
        sxy = sxy + (x - mx) * (y - my);
        sxx = sxx + (x - mx) * (x - mx);
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss = points
        .iter()
        .map(|&(x, y)| {
            let r = y - (intercept + slope * x);
            r * r
        })
        .fold(T::zero(), |a, b| a + b);
    (slope, intercept, (ss / n).sqrt())
}

/// Fits `(field T, unwrapped phase °)` points. `LinearRegression` refuses data
/// whose residual exceeds [`FIT_RESIDUAL_THRESHOLD_DEG`].
pub fn fit_transduction<T: Real>(points: &[(T, T)], method: FitMethod) -> Result<TransductionFit<T>> {
    check_points(points)?;
    let (ls_slope, ls_intercept, residual_rms) = least_squares(points);
    let b_range = (points[0].0, points[points.len() - 1].0);
    match method {
        FitMethod::LinearRegression => {
            if residual_rms > T::lit(FIT_RESIDUAL_THRESHOLD_DEG) {
                return Err(Error::PoorLinearFit {
                    residual_rms_deg: residual_rms.to_f64_lossy(),
                    threshold_deg: FIT_RESIDUAL_THRESHOLD_DEG,
                });
            }
            Ok(TransductionFit {
                slope: ls_slope,
                intercept: ls_intercept,
                residual_rms,
                method,
                b_range,
            })
        }
        FitMethod::MaxDerivative => {
            let mut best = (T::zero(), 0usize);
            for i in 1..points.len() - 1 {
                let d = (points[i + 1].1 - points[i - 1].1) / (points[i + 1].0 - points[i - 1].0);
                if d.abs() > best.0.abs() {
                    best = (d, i);
                }
            }
            let (slope, i) = best;
            Ok(TransductionFit {
                slope,
                intercept: points[i].1 - slope * points[i].0,
                residual_rms,
                method,
                b_range,
            })
        }
    }
}

/// Linear regression when the data are linear enough, maximum derivative otherwise.
pub fn fit_transduction_auto<T: Real>(points: &[(T, T)]) -> Result<TransductionFit<T>> {
    match fit_transduction(points, FitMethod::LinearRegression) {
        Err(Error::PoorLinearFit { .. }) => fit_transduction(points, FitMethod::MaxDerivative),
        other => other,
    }
}

/// `phase_resolution / |slope|`, T.
pub fn min_detectable_field<T: Real>(fit: &TransductionFit<T>, phase_resolution_deg: T) -> Result<T> {
    if fit.slope == T::zero() || !fit.slope.is_finite() {
        return Err(Error::Domain("transduction slope is zero".into()));
    }
    if !(phase_resolution_deg > T::zero()) {
        return Err(Error::Domain("phase resolution must be positive".into()));
    }
    Ok(phase_resolution_deg / fit.slope.abs())
}

/// `b_min·√t_meas`, T/√Hz.
pub fn spectral_sensitivity<T: Real>(b_min: T, t_meas: T) -> Result<T> {
    if !(b_min > T::zero()) || !(t_meas > T::zero()) {
        return Err(Error::Domain(format!("b_min and t_meas must be positive, got {b_min}, {t_meas}")));
    }
    Ok(b_min * t_meas.sqrt())
}

/// `s/√ρ` with the density (given in m⁻³) expressed in µm⁻³.
pub fn concentration_sensitivity<T: Real>(s: T, density_per_m3: T) -> Result<T> {
    if !(density_per_m3 > T::zero()) {
        return Err(Error::Domain(format!("density must be positive, got {density_per_m3}")));
    }
    Ok(s / (density_per_m3 * T::lit(1e-18)).sqrt())
}

/// Equatorial point-dipole field `(µ0/4π)·m/r³`, T.
pub fn dipole_field<T: Real>(moment: T, distance: T) -> Result<T> {
    if !(distance > T::zero()) {
        return Err(Error::Domain(format!("distance must be positive, got {distance}")));
    }
    Ok(T::lit(PhysicalConstants::MU0_OVER_4PI) * moment / (distance * distance * distance))
}

/// Coupling η that brings the ideal Hahn transduction (n = 1, φ_RF = 0,
/// continuous RF) at delay `tau` to `inverse_slope` T/°.
pub fn calibrate_coupling<T: Real>(sys: &SpinSystem<T>, tau: T, inverse_slope_t_per_deg: T) -> Result<T> {
    if !(inverse_slope_t_per_deg > T::zero()) {
        return Err(Error::Domain("inverse slope must be positive".into()));
    }
    let filt = hahn_filter(tau);
    let unit = T::lit(1e-3);
    let wave = synchronized_waveform(&filt, tau, 1, unit, T::zero(), ResetMode::Continuous)?;
    let cal = CoilCalibration::new(T::one(), T::one(), T::one())?;
    let ideal_deg_per_t = accumulate_phase(sys, &cal, &filt, &wave)?.phi.to_degrees() / unit;
    let eta = T::one() / (inverse_slope_t_per_deg * ideal_deg_per_t.abs());
    if !(eta > T::zero() && eta <= T::one()) {
        return Err(Error::Range {
            value: eta.to_f64_lossy(),
            min: 0.0,
            max: 1.0,
        });
    }
    Ok(eta)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityReport<T> {
    /// T
    pub b_min: T,
    /// T/√Hz
    pub s_spectral: T,
    /// T·µm^{3/2}/√Hz
    pub s_concentration: T,
    /// °
    pub phase_resolution: T,
    /// s
    pub t_meas: T,
    pub spin_count: T,
    pub sample: SampleSpec<T>,
    pub fit: TransductionFit<T>,
}

pub fn sensitivity_report<T: Real>(
    fit: TransductionFit<T>,
    phase_resolution_deg: T,
    t_meas: T,
    sample: &SampleSpec<T>,
) -> Result<SensitivityReport<T>> {
    let b_min = min_detectable_field(&fit, phase_resolution_deg)?;
    let s_spectral = spectral_sensitivity(b_min, t_meas)?;
    let s_concentration = s_spectral / sample.density_per_um3().sqrt();
    Ok(SensitivityReport {
        b_min,
        s_spectral,
        s_concentration,
        phase_resolution: phase_resolution_deg,
        t_meas,
        spin_count: sample.active_spin_count,
        sample: sample.clone(),
        fit,
    })
}

/// Simulation settings shared by every point of a pulse-count sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct DdSimConfig<T> {
    pub sys: SpinSystem<T>,
    pub cal: CoilCalibration<T>,
    pub sample: SampleSpec<T>,
    pub t_pi2: T,
    pub t_pi: T,
    pub harmonic: u32,
    pub rf_phase: T,
    pub reset_mode: ResetMode,
    /// Strictly increasing, T.
    pub amplitudes: Vec<T>,
    pub ensemble: EnsembleConfig<T>,
    pub pulse_mode: PulseMode<T>,
    pub phase_resolution_deg: T,
    pub t_meas: T,
    /// Only the leading sweep points whose normalized echo stays at or above
    /// this amplitude are fitted; beyond it the phase is dominated by dephasing.
    pub fit_min_amplitude: T,
}

/// One simulated point of an amplitude sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint<T> {
    pub b1: T,
    pub amplitude: T,
    /// Unwrapped, °.
    pub phase_deg: T,
}

/// Simulated normalized echo over the amplitude grid for one sequence.
pub fn simulate_amplitude_sweep<T: Real>(
    protocol: SequenceKind,
    n_pi: usize,
    tau: T,
    cfg: &DdSimConfig<T>,
) -> Result<Vec<SweepPoint<T>>> {
    let seq = match protocol {
        SequenceKind::Pdd | SequenceKind::Hahn => build_pdd(n_pi, tau, cfg.t_pi2, cfg.t_pi)?,
        SequenceKind::Cp => build_cp(n_pi, tau, cfg.t_pi2, cfg.t_pi)?,
        SequenceKind::Custom => {
            return Err(Error::Config("pulse-count sweeps need a PDD or CP protocol".into()));
        }
    };
    let filt = seq.filter_function();
    let template = synchronized_waveform(&filt, tau, cfg.harmonic, T::zero(), cfg.rf_phase, cfg.reset_mode)?;
    let zs = cfg
        .amplitudes
        .iter()
        .map(|&b| {
            let wave: RFWaveform<T> = template.with_amplitude(b);
            normalized_echo(&cfg.sys, &cfg.cal, &seq, &wave, &cfg.ensemble, cfg.pulse_mode)
        })
        .collect::<Result<Vec<_>>>()?;
    let phases: Vec<T> = zs.iter().map(|z| z.arg().to_degrees()).collect();
    let phases = unwrap_degrees(&phases);
    Ok(cfg
        .amplitudes
        .iter()
        .zip(zs)
        .zip(phases)
        .map(|((&b1, z), phase_deg)| SweepPoint {
            b1,
            amplitude: z.norm(),
            phase_deg,
        })
        .collect())
}

/// Fit and report for a simulated sweep, using its leading coherent points.
pub fn report_from_sweep<T: Real>(points: &[SweepPoint<T>], cfg: &DdSimConfig<T>) -> Result<SensitivityReport<T>> {
    let fit_pts: Vec<(T, T)> = points
        .iter()
        .take_while(|p| p.amplitude >= cfg.fit_min_amplitude)
        .map(|p| (p.b1, p.phase_deg))
        .collect();
    let fit = fit_transduction_auto(&fit_pts)?;
    sensitivity_report(fit, cfg.phase_resolution_deg, cfg.t_meas, &cfg.sample)
}

/// Simulate → fit → report for every pulse count, in the order given.
pub fn dd_sensitivity_sweep<T: Real>(
    protocol: SequenceKind,
    n_pi_list: &[usize],
    tau: T,
    cfg: &DdSimConfig<T>,
) -> Result<Vec<SensitivityReport<T>>> {
    n_pi_list
        .par_iter()
        .map(|&n| simulate_amplitude_sweep(protocol, n, tau, cfg).and_then(|pts| report_from_sweep(&pts, cfg)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn line(slope: f64, icpt: f64, n: usize) -> Vec<(f64, f64)> {
        (0..n).map(|i| {
            let b = 1e-4 * i as f64;
            (b, icpt + slope * b)
        }).collect()
    }

    #[test]
    fn exact_line_recovered() {
        let f = fit_transduction(&line(1.02e5, 0.5, 12), FitMethod::LinearRegression).unwrap();
        assert!((f.slope - 1.02e5).abs() / 1.02e5 < 1e-9);
        assert!((f.intercept - 0.5).abs() < 1e-9);
        let m = fit_transduction(&line(1.02e5, 0.5, 12), FitMethod::MaxDerivative).unwrap();
        assert!((m.slope - f.slope).abs() / f.slope < 0.02);
    }

    #[test]
    fn fit_errors() {
        assert!(matches!(
            fit_transduction(&line(1.0, 0.0, 2), FitMethod::LinearRegression),
            Err(Error::InsufficientData { needed: 3, got: 2 })
        ));
        let mut pts = line(1e5, 0.0, 6);
        pts[3].1 += 170.0;
        assert!(matches!(fit_transduction(&pts, FitMethod::LinearRegression), Err(Error::RequiresUnwrap { index: 3, .. })));
        let pts = vec![(0.0, 0.0), (0.0, 1.0), (1.0, 2.0)];
        assert!(matches!(fit_transduction(&pts, FitMethod::MaxDerivative), Err(Error::Domain(_))));
    }

    #[test]
    fn nonlinear_data_fall_back_to_max_derivative() {
        let pts: Vec<(f64, f64)> = (0..20).map(|i| {
            let b = 1e-4 * i as f64;
            (b, 80.0 * (b / 1e-3).tanh())
        }).collect();
        assert!(matches!(fit_transduction(&pts, FitMethod::LinearRegression), Err(Error::PoorLinearFit { .. })));
        let f = fit_transduction_auto(&pts).unwrap();
        assert_eq!(f.method, FitMethod::MaxDerivative);
        assert!(f.slope > 7.5e4);
    }

    #[test]
    fn ideal_hahn_transduction() {
        let sys = SpinSystem::new(2.0, 1.0, 1.0, 0.0, "bdpa").unwrap();
        let cal = CoilCalibration::ideal(1e-3, 2.5).unwrap();
        let tau = bdpa::TAU;
        let filt = hahn_filter(tau);
        let pts: Vec<(f64, f64)> = (0..10).map(|i| {
            let b = 2e-7 * i as f64;
            let w = synchronized_waveform(&filt, tau, 1, b, 0.0, ResetMode::Continuous).unwrap();
            (b, accumulate_phase(&sys, &cal, &filt, &w).unwrap().phi.to_degrees())
        }).collect();
        let f = fit_transduction(&pts, FitMethod::LinearRegression).unwrap();
        let expect = (4.0 * sys.gamma() * tau / std::f64::consts::PI).to_degrees();
        assert!((f.slope - expect).abs() / expect < 1e-9);
        assert!((f.slope - 1.527e7).abs() / 1.527e7 < 2e-3);
        let b_min = min_detectable_field(&f, 1.0).unwrap();
        assert!((b_min - 6.55e-8).abs() / 6.55e-8 < 3e-3);
        assert!((b_min * f.slope.abs() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn reference_chain() {
        let fit = TransductionFit {
            slope: 1.0 / bdpa::INVERSE_SLOPE_T_PER_DEG,
            intercept: 0.0,
            residual_rms: 0.0,
            method: FitMethod::LinearRegression,
            b_range: (0.0, 1.8e-3),
        };
        let b_min = min_detectable_field(&fit, 1.0).unwrap();
        assert!((b_min - 9.8e-6).abs() < 1e-15);
        let s = spectral_sensitivity(b_min, DEFAULT_T_MEAS).unwrap();
        assert!((s - bdpa::S).abs() / bdpa::S < 0.03);
        let rho = bdpa::DENSITY_CM3 * 1e6;
        let sv = concentration_sensitivity(s, rho).unwrap();
        assert!((sv - bdpa::S_VOL).abs() / bdpa::S_VOL < 0.05);
        assert!((concentration_sensitivity(6e-6, rho).unwrap() - 1.25e-9).abs() < 0.01e-9);
        assert!((concentration_sensitivity(1.5e-6, rho).unwrap() - 3.13e-10).abs() < 0.01e-10);
        let r1 = bdpa::S_MIN_VOL / bdpa::S_MIN;
        let r2 = bdpa::S_VOL / bdpa::S;
        assert!((r1 - r2).abs() / r2 < 0.05);
        assert_eq!(spectral_sensitivity(b_min, 1.0).unwrap(), b_min);
    }

    #[test]
    fn dipole_scale() {
        let b = dipole_field(PhysicalConstants::MU_B, 5e-9).unwrap();
        assert!((b - 7.42e-6).abs() < 0.01e-6);
        assert!((dipole_field(PhysicalConstants::MU_B, 10e-9).unwrap() - b / 8.0).abs() < 1e-18);
        assert_eq!(dipole_field(0.0, 5e-9).unwrap(), 0.0);
        assert!(matches!(dipole_field(1.0, 0.0), Err(Error::Domain(_))));
    }

    #[test]
    fn coupling_calibration() {
        let sys = SpinSystem::new(2.0, 1.0, 1.0, 0.0, "bdpa").unwrap();
        let eta = calibrate_coupling(&sys, bdpa::TAU, bdpa::INVERSE_SLOPE_T_PER_DEG).unwrap();
        assert!((eta - 6.68e-3).abs() < 0.02e-3, "{eta}");
    }

    proptest! {
        #[test]
        fn sensitivities_are_homogeneous(x in 1e-9f64..1e-3, k in 0.1f64..10.0, rho in 1e20f64..1e27) {
            let a = spectral_sensitivity(k * x, 0.375).unwrap();
            let b = k * spectral_sensitivity(x, 0.375).unwrap();
            prop_assert!((a - b).abs() <= 1e-12 * b);
            let a = concentration_sensitivity(k * x, rho).unwrap();
            let b = k * concentration_sensitivity(x, rho).unwrap();
            prop_assert!((a - b).abs() <= 1e-12 * b);
            let q = concentration_sensitivity(x, 4.0 * rho).unwrap() / concentration_sensitivity(x, rho).unwrap();
            prop_assert!((q - 0.5).abs() < 1e-12);
        }

        #[test]
        fn max_derivative_agrees_on_lines(slope in -1e7f64..1e7, icpt in -10.0f64..10.0) {
            prop_assume!(slope.abs() > 1.0);
            let pts: Vec<(f64, f64)> = (0..8).map(|i| (1e-6 * i as f64, icpt + slope * 1e-6 * i as f64)).collect();
            let l = fit_transduction(&pts, FitMethod::LinearRegression).unwrap();
            let m = fit_transduction(&pts, FitMethod::MaxDerivative).unwrap();
            prop_assert!((l.slope - m.slope).abs() <= 0.02 * l.slope.abs());
        }
    }
}
