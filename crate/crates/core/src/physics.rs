//! Physical constants and the static descriptions of the sensor: the spin
//! system, the sample it lives in, and the RF coil driving it.
//!
//! Everything is SI. Unit conversion for human-facing values (mT, MHz, ns,
//! degrees) happens at the configuration boundary, see [`units`].

use crate::error::{Error, Result};
use crate::scalar::Real;

/// CODATA values used throughout.
#[derive(Debug, Clone, Copy)]
pub struct PhysicalConstants;

impl PhysicalConstants {
    /// Bohr magneton, J/T.
    pub const MU_B: f64 = 9.274_010_078_3e-24;
    /// Reduced Planck constant, J·s.
    pub const HBAR: f64 = 1.054_571_817e-34;
    /// Vacuum permeability over 4π, T·m/A.
    pub const MU0_OVER_4PI: f64 = 1e-7;
}

/// Angular frequency per tesla for a spin with Landé factor `g`, rad·s⁻¹·T⁻¹.
pub fn gyromagnetic_ratio<T: Real>(g: T) -> Result<T> {
    if !(g > T::zero()) || !g.is_finite() {
        return Err(Error::Domain(format!("g-factor must be positive, got {g}")));
    }
    Ok(g * T::lit(PhysicalConstants::MU_B / PhysicalConstants::HBAR))
}

/// Unit conversions applied at the configuration boundary.
pub mod units {
    pub const MT: f64 = 1e-3;
    pub const UT: f64 = 1e-6;
    pub const NS: f64 = 1e-9;
    pub const US: f64 = 1e-6;
    pub const MS: f64 = 1e-3;
    pub const MHZ: f64 = 1e6;
    /// One cubic micrometre in m³.
    pub const UM3: f64 = 1e-18;
    /// One cubic centimetre in m³.
    pub const CM3: f64 = 1e-6;
    /// One cubic millimetre in m³.
    pub const MM3: f64 = 1e-9;
}

/// Static sensor parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinSystem<T> {
    pub g: T,
    /// Phase-memory time, s.
    pub t_m: T,
    /// Stretch exponent of the echo decay `exp(-(t/t_m)^beta)`.
    pub stretch_beta: T,
    /// Standard deviation of the Gaussian detuning distribution, rad/s.
    pub inhomogeneous_sigma: T,
    pub label: String,
}

impl<T: Real> SpinSystem<T> {
    pub fn new(g: T, t_m: T, stretch_beta: T, inhomogeneous_sigma: T, label: impl Into<String>) -> Result<Self> {
        let sys = Self {
            g,
            t_m,
            stretch_beta,
            inhomogeneous_sigma,
            label: label.into(),
        };
        sys.validate()?;
        Ok(sys)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.g > T::zero()) {
            return Err(Error::Config(format!("g must be positive, got {}", self.g)));
        }
        if !(self.t_m > T::zero()) || !self.t_m.is_finite() {
            return Err(Error::Config(format!("t_m must be positive, got {}", self.t_m)));
        }
        if !(self.inhomogeneous_sigma >= T::zero()) {
            return Err(Error::Config(format!(
                "inhomogeneous_sigma must be non-negative, got {}",
                self.inhomogeneous_sigma
            )));
        }
        if !(self.stretch_beta >= T::one() && self.stretch_beta <= T::lit(3.0)) {
            return Err(Error::Config(format!(
                "stretch_beta must lie in [1, 3], got {}",
                self.stretch_beta
            )));
        }
        Ok(())
    }

    pub fn gamma(&self) -> T {
        self.g * T::lit(PhysicalConstants::MU_B / PhysicalConstants::HBAR)
    }

    /// Stretched-exponential echo envelope at time `t` after excitation.
    pub fn decoherence(&self, t: T) -> T {
        if t <= T::zero() {
            return T::one();
        }
        (-(t / self.t_m).powf(self.stretch_beta)).exp()
    }
}

/// Relative tolerance on `density × volume ≈ count` when all three are given.
pub const SAMPLE_CONSISTENCY_TOL: f64 = 0.05;

/// Spin sample size. Any one field can be derived from the other two.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSpec<T> {
    /// spins/m³
    pub spin_density: T,
    pub active_spin_count: T,
    /// m³
    pub sensing_volume: T,
}

impl<T: Real> SampleSpec<T> {
    pub fn new(spin_density: Option<T>, active_spin_count: Option<T>, sensing_volume: Option<T>) -> Result<Self> {
        let positive = |name: &str, v: T| {
            if v > T::zero() && v.is_finite() {
                Ok(v)
            } else {
                Err(Error::Config(format!("{name} must be positive, got {v}")))
            }
        };
        let (rho, n, v) = match (spin_density, active_spin_count, sensing_volume) {
            (Some(rho), Some(n), Some(v)) => {
                let (rho, n, v) = (
                    positive("spin_density", rho)?,
                    positive("active_spin_count", n)?,
                    positive("sensing_volume", v)?,
                );
                let rel = ((rho * v - n) / n).abs();
                if rel > T::lit(SAMPLE_CONSISTENCY_TOL) {
                    return Err(Error::Config(format!(
                        "density × volume = {:e} disagrees with active_spin_count = {n:e}",
                        rho * v
                    )));
                }
                (rho, n, v)
            }
            (Some(rho), None, Some(v)) => {
                let (rho, v) = (positive("spin_density", rho)?, positive("sensing_volume", v)?);
                (rho, rho * v, v)
            }
            (Some(rho), Some(n), None) => {
                let (rho, n) = (positive("spin_density", rho)?, positive("active_spin_count", n)?);
                (rho, n, n / rho)
            }
            (None, Some(n), Some(v)) => {
                let (n, v) = (positive("active_spin_count", n)?, positive("sensing_volume", v)?);
                (n / v, n, v)
            }
            _ => {
                return Err(Error::Config(
                    "sample needs at least two of spin_density, active_spin_count, sensing_volume".into(),
                ))
            }
        };
        Ok(Self {
            spin_density: rho,
            active_spin_count: n,
            sensing_volume: v,
        })
    }

    /// Spin density in µm⁻³, the unit concentration sensitivity is quoted in.
    pub fn density_per_um3(&self) -> T {
        self.spin_density * T::lit(units::UM3)
    }
}

/// Voltage-to-field calibration of the RF coil.
#[derive(Debug, Clone, PartialEq)]
pub struct CoilCalibration<T> {
    /// T/V
    pub field_per_volt: T,
    /// V
    pub max_voltage: T,
    /// Fraction of the nominal coil field the spins effectively see.
    pub coupling_eta: T,
}

impl<T: Real> CoilCalibration<T> {
    pub fn new(field_per_volt: T, max_voltage: T, coupling_eta: T) -> Result<Self> {
        let cal = Self {
            field_per_volt,
            max_voltage,
            coupling_eta,
        };
        cal.validate()?;
        Ok(cal)
    }

    /// Calibration with unit coupling, as used by oracle comparisons.
    pub fn ideal(field_per_volt: T, max_voltage: T) -> Result<Self> {
        Self::new(field_per_volt, max_voltage, T::one())
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.field_per_volt > T::zero()) {
            return Err(Error::Config(format!(
                "field_per_volt must be positive, got {}",
                self.field_per_volt
            )));
        }
        if !(self.max_voltage > T::zero()) {
            return Err(Error::Config(format!("max_voltage must be positive, got {}", self.max_voltage)));
        }
        if !(self.coupling_eta > T::zero() && self.coupling_eta <= T::one()) {
            return Err(Error::Config(format!(
                "coupling_eta must lie in (0, 1], got {}",
                self.coupling_eta
            )));
        }
        Ok(())
    }

    pub fn with_coupling(mut self, coupling_eta: T) -> Result<Self> {
        self.coupling_eta = coupling_eta;
        self.validate()?;
        Ok(self)
    }
}

/// Nominal coil field for drive voltage `v` (before `coupling_eta`).
pub fn volts_to_field<T: Real>(cal: &CoilCalibration<T>, v: T) -> Result<T> {
    if !(v >= T::zero() && v <= cal.max_voltage) {
        return Err(Error::Range {
            value: v.to_f64_lossy(),
            min: 0.0,
            max: cal.max_voltage.to_f64_lossy(),
        });
    }
    Ok(v * cal.field_per_volt)
}
