//! Measured echo quantities: wrapped phase, normalized amplitude, and the
//! effect of additive quadrature noise with averaging.

use num_complex::Complex;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Phase resolution of the reference instrument, degrees.
pub const DEFAULT_PHASE_RESOLUTION_DEG: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EchoResult<T> {
    /// Normalized to the zero-RF reference.
    pub amplitude: T,
    /// Degrees in (−90, 90].
    pub phase_wrapped: T,
    /// Degrees.
    pub phase_unwrapped: T,
    /// Infinite for a noiseless result.
    pub snr: T,
    pub n_averages: u32,
}

impl<T: Real> EchoResult<T> {
    /// Noiseless result from a normalized complex echo.
    pub fn from_clean(z: Complex<T>) -> Self {
        let phase = z.arg().to_degrees();
        Self {
            amplitude: z.norm(),
            phase_wrapped: wrap_phase(phase),
            phase_unwrapped: phase,
            snr: T::infinity(),
            n_averages: 1,
        }
    }
}

/// Maps degrees into (−90, 90], congruent modulo 180.
pub fn wrap_phase<T: Real>(deg: T) -> T {
    let half = T::lit(180.0);
    let quarter = T::lit(90.0);
    let mut r = deg - half * ((deg - quarter) / half).ceil();
    if r <= -quarter {
        r = r + half;
    } else if r > quarter {
        r = r - half;
    }
    r
}

/// Removes 360° jumps so that consecutive phases differ by at most 180°.
pub fn unwrap_degrees<T: Real>(phases: &[T]) -> Vec<T> {
    let full = T::lit(360.0);
    let mut out = Vec::with_capacity(phases.len());
    let mut offset = T::zero();
    for (i, &p) in phases.iter().enumerate() {
        if i > 0 {
            let d = p + offset - out[i - 1];
            offset = offset - full * (d / full).round();
        }
        out.push(p + offset);
    }
    out
}

/// Adds complex Gaussian noise of standard deviation `sigma/√n_averages` per
/// quadrature to `clean` and extracts the measured amplitude and phase.
pub fn add_measurement_noise<T: Real>(clean: Complex<T>, sigma: T, n_averages: u32, seed: u64) -> Result<EchoResult<T>> {
    if !(sigma >= T::zero()) || !sigma.is_finite() {
        return Err(Error::Domain(format!("noise sigma must be ≥ 0, got {sigma}")));
    }
    if n_averages == 0 {
        return Err(Error::Domain("n_averages must be at least 1".into()));
    }
    let sqrt_n = T::lit(n_averages as f64).sqrt();
    let noisy = if sigma == T::zero() {
        clean
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let re: f64 = StandardNormal.sample(&mut rng);
        let im: f64 = StandardNormal.sample(&mut rng);
        let s = sigma / sqrt_n;
        clean + Complex::new(T::lit(re) * s, T::lit(im) * s)
    };
    let snr = if sigma == T::zero() {
        T::infinity()
    } else {
        clean.norm() * sqrt_n / sigma
    };
    Ok(EchoResult {
        snr,
        n_averages,
        ..EchoResult::from_clean(noisy)
    })
}
