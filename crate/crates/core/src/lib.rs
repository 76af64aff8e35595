//! Simulation and analysis of AC magnetometry with spin ensembles under
//! Hahn-echo and dynamical-decoupling sequences.
//!
//! The numeric core is generic over the scalar type ([`Real`], implemented for
//! `f32` and `f64`); the crate root re-exports the `f64` instantiations under
//! short aliases, which is what most callers want.

pub mod analytic;
pub mod blochsim;
pub mod echo;
pub mod error;
pub mod physics;
pub mod rf;
pub mod scalar;
pub mod sensitivity;
pub mod sequence;

#[cfg(test)]
mod test_oracle;

pub use error::{Error, Result};
pub use physics::{gyromagnetic_ratio, units, volts_to_field, PhysicalConstants};
pub use rf::{ResetMode, synchronized_frequency};
pub use scalar::Real;
pub use sensitivity::FitMethod;
pub use sequence::SequenceKind;

pub type SpinSystem = physics::SpinSystem<f64>;
pub type SampleSpec = physics::SampleSpec<f64>;
pub type CoilCalibration = physics::CoilCalibration<f64>;
pub type Pulse = sequence::Pulse<f64>;
pub type PulseSequence = sequence::PulseSequence<f64>;
pub type FilterFunction = sequence::FilterFunction<f64>;
pub type GateWindow = rf::GateWindow<f64>;
pub type RFWaveform = rf::RFWaveform<f64>;
pub type PhaseAccumulation = analytic::PhaseAccumulation<f64>;
pub type SpinPacket = blochsim::SpinPacket<f64>;
pub type EnsembleConfig = blochsim::EnsembleConfig<f64>;
pub type SimulationTrace = blochsim::SimulationTrace<f64>;
pub type PulseMode = blochsim::PulseMode<f64>;
pub type EchoResult = echo::EchoResult<f64>;
pub type TransductionFit = sensitivity::TransductionFit<f64>;
pub type SensitivityReport = sensitivity::SensitivityReport<f64>;
pub type DdSimConfig = sensitivity::DdSimConfig<f64>;

pub type SpinSystemF32 = physics::SpinSystem<f32>;
pub type CoilCalibrationF32 = physics::CoilCalibration<f32>;
pub type PulseSequenceF32 = sequence::PulseSequence<f32>;
pub type RFWaveformF32 = rf::RFWaveform<f32>;
