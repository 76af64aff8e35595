use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("value {value} outside allowed range [{min}, {max}]")]
    Range { value: f64, min: f64, max: f64 },

    #[error("invalid pulse timing: {0}")]
    InvalidTiming(String),

    #[error("insufficient data: need at least {needed} points, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("phase jumps by {jump_deg:.1}° between points {index} and {next}; unwrap the phases first", next = index + 1)]
    RequiresUnwrap { index: usize, jump_deg: f64 },

    #[error("linear fit residual {residual_rms_deg:.3}° exceeds the {threshold_deg}° quality threshold")]
    PoorLinearFit {
        residual_rms_deg: f64,
        threshold_deg: f64,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("non-finite state in packet {packet} at t = {time:e} s")]
    Numerical { packet: usize, time: f64 },
}

impl Error {
    /// True for failures of the numerical kernels rather than of their inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::Numerical { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
