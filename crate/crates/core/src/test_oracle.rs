//! Quadrature reference for the closed-form phase, for unit tests only.

use crate::physics::{CoilCalibration, SpinSystem};
use crate::rf::RFWaveform;
use crate::sequence::FilterFunction;
use spinsense_testkit::quadrature::{integrate, integrate_abs};

fn split_points(filt: &FilterFunction<f64>, wave: &RFWaveform<f64>) -> Vec<f64> {
    let mut pts = filt.breakpoints.clone();
    pts.extend(wave.edges());
    pts
}

/// `γ·η·∫ sign(t)·B(t) dt` evaluated pointwise with adaptive Gauss–Kronrod.
pub fn phase_by_quadrature(
    sys: &SpinSystem<f64>,
    cal: &CoilCalibration<f64>,
    filt: &FilterFunction<f64>,
    wave: &RFWaveform<f64>,
) -> f64 {
    let pts = split_points(filt, wave);
    let integrand = |t: f64| filt.sign_at(t) * wave.sample(t);
    let l1 = integrate_abs(integrand, 0.0, filt.echo_time, &pts, 1e-6 * wave.amplitude * filt.echo_time + 1e-300);
    let tol = 1e-14 * l1 + 1e-300;
    sys.gamma() * cal.coupling_eta * integrate(integrand, 0.0, filt.echo_time, &pts, tol)
}
