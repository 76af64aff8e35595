//! Experiment configuration: JSON with unit-suffixed fields (mT, ns, µs, MHz,
//! degrees), converted to SI when the core types are built.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use spinsense_core::blochsim::{EnsembleConfig, PulseMode};
use spinsense_core::physics::{CoilCalibration, SampleSpec, SpinSystem};
use spinsense_core::sensitivity::{calibrate_coupling, DdSimConfig};
use spinsense_core::sequence::{build_cp, build_hahn, build_pdd, PulseSequence};
use spinsense_core::units::{MHZ, MT, NS, US};
use spinsense_core::{ResetMode, SequenceKind};

use crate::error::{HarnessError, Result};

/// Either explicit values or `points` evenly spaced values from `start` to `stop`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Grid {
    Values(Vec<f64>),
    Linspace { start: f64, stop: f64, points: usize },
}

impl Grid {
    pub fn values(&self) -> Vec<f64> {
        match *self {
            Grid::Values(ref v) => v.clone(),
            Grid::Linspace { start, stop, points } => match points {
                0 => Vec::new(),
                1 => vec![start],
                n => (0..n)
                    .map(|i| start + (stop - start) * i as f64 / (n - 1) as f64)
                    .collect(),
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    Hahn,
    Pdd,
    Cp,
}

impl Kind {
    pub fn sequence_kind(self) -> SequenceKind {
        match self {
            Kind::Hahn => SequenceKind::Hahn,
            Kind::Pdd => SequenceKind::Pdd,
            Kind::Cp => SequenceKind::Cp,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Kind::Hahn => "hahn",
            Kind::Pdd => "pdd",
            Kind::Cp => "cp",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reset {
    Continuous,
    PerWindowReset,
}

impl From<Reset> for ResetMode {
    fn from(r: Reset) -> Self {
        match r {
            Reset::Continuous => ResetMode::Continuous,
            Reset::PerWindowReset => ResetMode::PerWindowReset,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Ideal,
    Finite,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpinSystemCfg {
    #[serde(default = "default_g")]
    pub g: f64,
    pub t_m_us: f64,
    #[serde(default = "one")]
    pub stretch_beta: f64,
    /// Standard deviation of the detuning distribution, MHz (×2π for rad/s).
    #[serde(default)]
    pub inhomogeneous_sigma_mhz: f64,
    #[serde(default)]
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SampleCfg {
    pub spin_density_cm3: Option<f64>,
    pub active_spin_count: Option<f64>,
    pub sensing_volume_mm3: Option<f64>,
}

impl Default for SampleCfg {
    fn default() -> Self {
        Self {
            spin_density_cm3: Some(2.3e19),
            active_spin_count: None,
            sensing_volume_mm3: Some(1.75e-3),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationCfg {
    pub field_per_volt_mt: f64,
    pub max_voltage_v: f64,
    /// Explicit coupling; when absent, derived from `target_inverse_slope_t_per_deg`, else 1.
    pub coupling_eta: Option<f64>,
    pub target_inverse_slope_t_per_deg: Option<f64>,
    /// Hahn delay at which the target slope holds, ns. Defaults to `sequence.tau_ns`.
    #[serde(default)]
    pub target_tau_ns: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SequenceCfg {
    pub kind: Kind,
    pub tau_ns: f64,
    pub t_pi2_ns: f64,
    pub t_pi_ns: f64,
    #[serde(default = "one_usize")]
    pub n_pi: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RfCfg {
    /// Fixed amplitude for phase sweeps, mT.
    #[serde(default)]
    pub amplitude_mt: f64,
    /// Amplitude sweep grid, mT.
    pub amplitude_grid_mt: Option<Grid>,
    /// Amplitudes at which the phase sweep is repeated, mT. Defaults to `amplitude_mt`.
    #[serde(default)]
    pub phase_sweep_amplitudes_mt: Vec<f64>,
    #[serde(default = "one_u32")]
    pub harmonic: u32,
    #[serde(default)]
    pub phase_deg: f64,
    pub phase_grid_deg: Option<Grid>,
    #[serde(default = "default_reset")]
    pub reset_mode: Reset,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnsembleCfg {
    pub n_packets: usize,
    pub rf_amplitude_spread: f64,
    pub pulse_mode: Mode,
    pub max_step_ns: Option<f64>,
    pub readout_halfwidth_ns: f64,
    pub readout_samples: usize,
}

impl Default for EnsembleCfg {
    fn default() -> Self {
        Self {
            n_packets: 1000,
            rf_amplitude_spread: 0.3,
            pulse_mode: Mode::Ideal,
            max_step_ns: None,
            readout_halfwidth_ns: 0.0,
            readout_samples: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseCfg {
    /// Per-quadrature noise of a single shot, relative to the zero-RF echo.
    pub sigma: f64,
    pub n_averages: u32,
    /// Shot repetition time, ms.
    pub t_relax_ms: f64,
}

impl Default for NoiseCfg {
    fn default() -> Self {
        Self {
            sigma: 0.0,
            n_averages: 1,
            t_relax_ms: 15.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisCfg {
    pub phase_resolution_deg: f64,
    pub t_meas_s: f64,
    pub fit_min_amplitude: f64,
}

impl Default for AnalysisCfg {
    fn default() -> Self {
        Self {
            phase_resolution_deg: spinsense_core::echo::DEFAULT_PHASE_RESOLUTION_DEG,
            t_meas_s: spinsense_core::sensitivity::DEFAULT_T_MEAS,
            fit_min_amplitude: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DdCfg {
    pub protocols: Vec<Kind>,
    pub n_pi: Vec<usize>,
    pub tau_ns: Vec<f64>,
}

impl Default for DdCfg {
    fn default() -> Self {
        Self {
            protocols: vec![Kind::Pdd, Kind::Cp],
            n_pi: vec![1, 2, 3, 4, 5],
            tau_ns: vec![1700.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SymmetryCfg {
    pub harmonics: Vec<u32>,
}

impl Default for SymmetryCfg {
    fn default() -> Self {
        Self {
            harmonics: vec![1, 2, 3, 4],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    pub spin_system: SpinSystemCfg,
    #[serde(default)]
    pub sample: SampleCfg,
    pub calibration: CalibrationCfg,
    pub sequence: SequenceCfg,
    pub rf: RfCfg,
    #[serde(default)]
    pub ensemble: EnsembleCfg,
    #[serde(default)]
    pub noise: NoiseCfg,
    #[serde(default)]
    pub analysis: AnalysisCfg,
    #[serde(default)]
    pub dd: DdCfg,
    #[serde(default)]
    pub symmetry: SymmetryCfg,
}

fn default_g() -> f64 {
    2.0
}
fn one() -> f64 {
    1.0
}
fn one_usize() -> usize {
    1
}
fn one_u32() -> u32 {
    1
}
fn default_reset() -> Reset {
    Reset::Continuous
}

fn cfg_err(msg: impl Into<String>) -> HarnessError {
    HarnessError::Config(msg.into())
}

fn core_err(context: &str) -> impl Fn(spinsense_core::Error) -> HarnessError + '_ {
    move |source| HarnessError::Core {
        context: context.to_string(),
        source,
    }
}

/// Sets `value` at a dotted path (`rf.harmonic`), creating objects as needed.
fn set_path(root: &mut Value, path: &str, value: Value) -> Result<()> {
    let mut node = root;
    let parts: Vec<&str> = path.split('.').collect();
    for (i, key) in parts.iter().enumerate() {
        let obj = node
            .as_object_mut()
            .ok_or_else(|| cfg_err(format!("override '{path}': '{}' is not an object", parts[..i].join("."))))?;
        if i + 1 == parts.len() {
            obj.insert((*key).to_string(), value);
            return Ok(());
        }
        node = obj.entry(*key).or_insert_with(|| Value::Object(Default::default()));
    }
    Ok(())
}

/// Parses `key=value` overrides; the value is JSON if it parses as such, else a string.
pub fn parse_override(s: &str) -> Result<(String, Value)> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| cfg_err(format!("override '{s}' is not of the form key=value")))?;
    let value = serde_json::from_str(v).unwrap_or_else(|_| Value::String(v.to_string()));
    Ok((k.trim().to_string(), value))
}

impl ExperimentConfig {
    pub fn from_json_str(text: &str, overrides: &[(String, Value)]) -> Result<Self> {
        let mut v: Value = serde_json::from_str(text)?;
        for (k, val) in overrides {
            set_path(&mut v, k, val.clone())?;
        }
        let cfg: ExperimentConfig = serde_json::from_value(v)?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path, overrides: &[(String, Value)]) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        Self::from_json_str(&text, overrides)
    }

    /// Hex SHA-256 prefix of the canonical serialization of this configuration.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        hex::encode(&Sha256::digest(&bytes)[..8])
    }

    pub fn spin_system(&self) -> Result<SpinSystem<f64>> {
        let s = &self.spin_system;
        SpinSystem::new(
            s.g,
            s.t_m_us * US,
            s.stretch_beta,
            s.inhomogeneous_sigma_mhz * MHZ * std::f64::consts::TAU,
            s.label.clone(),
        )
        .map_err(core_err("spin_system"))
    }

    pub fn sample(&self) -> Result<SampleSpec<f64>> {
        let s = &self.sample;
        SampleSpec::new(
            s.spin_density_cm3.map(|d| d * 1e6),
            s.active_spin_count,
            s.sensing_volume_mm3.map(|v| v * 1e-9),
        )
        .map_err(core_err("sample"))
    }

    pub fn tau(&self) -> f64 {
        self.sequence.tau_ns * NS
    }

    pub fn calibration(&self) -> Result<CoilCalibration<f64>> {
        let c = &self.calibration;
        let eta = match (c.coupling_eta, c.target_inverse_slope_t_per_deg) {
            (Some(eta), None) => eta,
            (None, Some(target)) => {
                let tau = c.target_tau_ns.map_or(self.tau(), |t| t * NS);
                calibrate_coupling(&self.spin_system()?, tau, target).map_err(core_err("calibration"))?
            }
            (None, None) => 1.0,
            (Some(_), Some(_)) => {
                return Err(cfg_err(
                    "calibration: give either coupling_eta or target_inverse_slope_t_per_deg, not both",
                ))
            }
        };
        CoilCalibration::new(c.field_per_volt_mt * MT, c.max_voltage_v, eta).map_err(core_err("calibration"))
    }

    /// Highest field the coil reaches at its voltage limit, T.
    pub fn max_field(&self) -> f64 {
        self.calibration.field_per_volt_mt * MT * self.calibration.max_voltage_v
    }

    pub fn build_sequence(&self, kind: Kind, n_pi: usize, tau: f64) -> Result<PulseSequence<f64>> {
        let (t2, t1) = (self.sequence.t_pi2_ns * NS, self.sequence.t_pi_ns * NS);
        match kind {
            Kind::Hahn => build_hahn(tau, t2, t1),
            Kind::Pdd => build_pdd(n_pi, tau, t2, t1),
            Kind::Cp => build_cp(n_pi, tau, t2, t1),
        }
        .map_err(core_err("sequence"))
    }

    pub fn sequence(&self) -> Result<PulseSequence<f64>> {
        self.build_sequence(self.sequence.kind, self.sequence.n_pi, self.tau())
    }

    pub fn ensemble(&self) -> Result<EnsembleConfig<f64>> {
        let e = &self.ensemble;
        let ens = EnsembleConfig::for_system(&self.spin_system()?, e.n_packets, e.rf_amplitude_spread, self.seed)
            .with_readout(e.readout_halfwidth_ns * NS, e.readout_samples);
        ens.validate().map_err(core_err("ensemble"))?;
        Ok(ens)
    }

    pub fn pulse_mode(&self) -> PulseMode<f64> {
        match self.ensemble.pulse_mode {
            Mode::Ideal => PulseMode::Ideal,
            Mode::Finite => PulseMode::Finite {
                max_step: self.ensemble.max_step_ns.map(|h| h * NS),
            },
        }
    }

    /// Amplitude grid in T.
    pub fn amplitude_grid(&self) -> Result<Vec<f64>> {
        let g = self
            .rf
            .amplitude_grid_mt
            .as_ref()
            .ok_or_else(|| cfg_err("rf.amplitude_grid_mt is required for amplitude sweeps"))?;
        Ok(g.values().into_iter().map(|b| b * MT).collect())
    }

    /// Phase grid in degrees.
    pub fn phase_grid_deg(&self) -> Result<Vec<f64>> {
        let g = self
            .rf
            .phase_grid_deg
            .as_ref()
            .ok_or_else(|| cfg_err("rf.phase_grid_deg is required for phase sweeps"))?;
        Ok(g.values())
    }

    pub fn phase_sweep_amplitudes(&self) -> Vec<f64> {
        if self.rf.phase_sweep_amplitudes_mt.is_empty() {
            vec![self.rf.amplitude_mt * MT]
        } else {
            self.rf.phase_sweep_amplitudes_mt.iter().map(|b| b * MT).collect()
        }
    }

    pub fn dd_sim_config(&self) -> Result<DdSimConfig<f64>> {
        Ok(DdSimConfig {
            sys: self.spin_system()?,
            cal: self.calibration()?,
            sample: self.sample()?,
            t_pi2: self.sequence.t_pi2_ns * NS,
            t_pi: self.sequence.t_pi_ns * NS,
            harmonic: self.rf.harmonic,
            rf_phase: self.rf.phase_deg.to_radians(),
            reset_mode: self.rf.reset_mode.into(),
            amplitudes: self.amplitude_grid()?,
            ensemble: self.ensemble()?,
            pulse_mode: self.pulse_mode(),
            phase_resolution_deg: self.analysis.phase_resolution_deg,
            t_meas: self.analysis.t_meas_s,
            fit_min_amplitude: self.analysis.fit_min_amplitude,
        })
    }

    fn check_amplitudes(&self, what: &str, values: &[f64]) -> Result<()> {
        let max = self.max_field();
        for &b in values {
            if !(b >= 0.0) || b > max * (1.0 + 1e-12) {
                return Err(cfg_err(format!(
                    "{what}: {:.4} mT is outside the coil range [0, {:.4}] mT",
                    b / MT,
                    max / MT
                )));
            }
        }
        Ok(())
    }

    /// Builds every sub-configuration once so that errors surface before any run.
    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty() || self.name.contains(['/', '\\']) {
            return Err(cfg_err("name must be non-empty and contain no path separators"));
        }
        self.spin_system()?;
        self.sample()?;
        self.calibration()?;
        self.sequence()?;
        self.ensemble()?;
        if let Some(h) = self.ensemble.max_step_ns {
            if !(h > 0.0) {
                return Err(cfg_err("ensemble.max_step_ns must be positive"));
            }
        }
        if self.rf.harmonic == 0 {
            return Err(cfg_err("rf.harmonic must be at least 1"));
        }
        if !self.rf.phase_deg.is_finite() {
            return Err(cfg_err("rf.phase_deg must be finite"));
        }
        if let Some(g) = &self.rf.amplitude_grid_mt {
            let v: Vec<f64> = g.values().into_iter().map(|b| b * MT).collect();
            if v.is_empty() {
                return Err(cfg_err("rf.amplitude_grid_mt is empty"));
            }
            if v.windows(2).any(|w| !(w[1] > w[0])) {
                return Err(cfg_err("rf.amplitude_grid_mt must be strictly increasing"));
            }
            self.check_amplitudes("rf.amplitude_grid_mt", &v)?;
        }
        self.check_amplitudes("rf.amplitude_mt", &self.phase_sweep_amplitudes())?;
        if let Some(g) = &self.rf.phase_grid_deg {
            let v = g.values();
            if v.is_empty() || v.iter().any(|p| !p.is_finite()) {
                return Err(cfg_err("rf.phase_grid_deg must be a non-empty list of finite values"));
            }
        }
        let n = &self.noise;
        if !(n.sigma >= 0.0) || n.n_averages == 0 || !(n.t_relax_ms > 0.0) {
            return Err(cfg_err("noise: need sigma ≥ 0, n_averages ≥ 1, t_relax_ms > 0"));
        }
        let a = &self.analysis;
        if !(a.phase_resolution_deg > 0.0) || !(a.t_meas_s > 0.0) || !(a.fit_min_amplitude >= 0.0) {
            return Err(cfg_err(
                "analysis: need phase_resolution_deg > 0, t_meas_s > 0, fit_min_amplitude ≥ 0",
            ));
        }
        if self.dd.protocols.contains(&Kind::Hahn) {
            return Err(cfg_err("dd.protocols accepts pdd and cp only"));
        }
        if self.dd.n_pi.contains(&0) || self.dd.tau_ns.iter().any(|&t| !(t > 0.0)) {
            return Err(cfg_err("dd: n_pi entries must be ≥ 1 and tau_ns entries positive"));
        }
        for &tau in &self.dd.tau_ns {
            for &n in &self.dd.n_pi {
                for &k in &self.dd.protocols {
                    self.build_sequence(k, n, tau * NS)?;
                }
            }
        }
        if self.symmetry.harmonics.contains(&0) {
            return Err(cfg_err("symmetry.harmonics must be ≥ 1"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"{
        "name": "t",
        "spin_system": {"t_m_us": 20},
        "calibration": {"field_per_volt_mt": 0.72, "max_voltage_v": 2.5},
        "sequence": {"kind": "hahn", "tau_ns": 1190, "t_pi2_ns": 80, "t_pi_ns": 160},
        "rf": {"amplitude_grid_mt": {"start": 0, "stop": 1.8, "points": 10}}
    }"#;

    #[test]
    fn parses_with_defaults() {
        let c = ExperimentConfig::from_json_str(BASE, &[]).unwrap();
        c.validate().unwrap();
        assert_eq!(c.ensemble.n_packets, 1000);
        assert_eq!(c.amplitude_grid().unwrap().len(), 10);
        assert!((c.max_field() - 1.8e-3).abs() < 1e-15);
        assert_eq!(c.calibration().unwrap().coupling_eta, 1.0);
    }

    #[test]
    fn overrides_apply_and_change_hash() {
        let a = ExperimentConfig::from_json_str(BASE, &[]).unwrap();
        let o = parse_override("rf.harmonic=3").unwrap();
        let b = ExperimentConfig::from_json_str(BASE, &[o]).unwrap();
        assert_eq!(b.rf.harmonic, 3);
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash(), ExperimentConfig::from_json_str(BASE, &[]).unwrap().hash());
    }

    #[test]
    fn fail_fast_validation() {
        let bad = [
            ("rf.amplitude_grid_mt", "[0, 2.0]"),
            ("sequence.tau_ns", "50"),
            ("spin_system.t_m_us", "-1"),
            ("calibration.coupling_eta", "1.5"),
            ("dd.protocols", "[\"hahn\"]"),
            ("ensemble.n_packets", "0"),
        ];
        for (k, v) in bad {
            let o = (k.to_string(), serde_json::from_str(v).unwrap());
            let c = ExperimentConfig::from_json_str(BASE, &[o]).unwrap();
            assert!(c.validate().is_err(), "{k}={v} accepted");
        }
        let unknown = BASE.replace("\"t_m_us\": 20", "\"t_m_us\": 20, \"tm\": 3");
        assert!(ExperimentConfig::from_json_str(&unknown, &[]).is_err());
    }

    #[test]
    fn calibrated_coupling() {
        let o = parse_override("calibration.target_inverse_slope_t_per_deg=9.8e-6").unwrap();
        let c = ExperimentConfig::from_json_str(BASE, &[o]).unwrap();
        let eta = c.calibration().unwrap().coupling_eta;
        assert!((eta - 6.68e-3).abs() < 0.02e-3);
    }
}
