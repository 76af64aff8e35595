//! CSV emission (RFC 4180 via the `csv` crate) and run directories.
//!
//! Every row carries the config hash and seed. Run directories are named
//! `<name>-<hash>` so results of different inputs never share a directory.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::error::{HarnessError, Result};
use crate::experiments::{SensitivityRow, SweepResult};

/// Environment variable naming the default output root.
pub const OUT_ENV: &str = "SPINSENSE_OUT";

pub fn default_root() -> PathBuf {
    std::env::var_os(OUT_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("runs"))
}

#[derive(Debug, Serialize)]
struct SweepRow<'a> {
    series: &'a str,
    axis: &'a str,
    value: f64,
    amplitude: f64,
    phase_wrapped_deg: f64,
    phase_unwrapped_deg: f64,
    snr: f64,
    n_averages: u32,
    analytic_phase_rad: f64,
    analytic_phase_deg: f64,
    config_hash: &'a str,
    seed: u64,
}

fn writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    let f = fs::File::create(path).map_err(|e| HarnessError::io(path, e))?;
    Ok(csv::Writer::from_writer(f))
}

/// Long format: one row per (series, grid point).
pub fn write_sweeps_csv(path: &Path, sweeps: &[SweepResult]) -> Result<()> {
    let mut w = writer(path)?;
    for s in sweeps {
        for ((x, e), phi) in s.axis_values.iter().zip(&s.echo_results).zip(&s.analytic_phases) {
            w.serialize(SweepRow {
                series: &s.label,
                axis: &s.axis_name,
                value: *x,
                amplitude: e.amplitude,
                phase_wrapped_deg: e.phase_wrapped,
                phase_unwrapped_deg: e.phase_unwrapped,
                snr: e.snr,
                n_averages: e.n_averages,
                analytic_phase_rad: *phi,
                analytic_phase_deg: phi.to_degrees(),
                config_hash: &s.metadata.config_hash,
                seed: s.metadata.seed,
            })?;
        }
    }
    w.flush().map_err(|e| HarnessError::io(path, e))
}

/// Shortest round-trip decimal, switching to exponent form for very small or large magnitudes.
pub fn num(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 || (1e-4..1e7).contains(&a) || !x.is_finite() {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

/// Generic table with a header row.
pub fn write_table(path: &Path, header: &[String], rows: &[Vec<String>]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush().map_err(|e| HarnessError::io(path, e))
}

#[derive(Debug, Serialize)]
struct ReportRow<'a> {
    protocol: &'a str,
    n_pi: usize,
    tau_s: f64,
    b_min_t: f64,
    s_spectral_t_per_sqrt_hz: f64,
    s_concentration_t_um32_per_sqrt_hz: f64,
    phase_resolution_deg: f64,
    t_meas_s: f64,
    spin_count: f64,
    spin_density_m3: f64,
    sensing_volume_m3: f64,
    slope_deg_per_t: f64,
    intercept_deg: f64,
    residual_rms_deg: f64,
    fit_method: &'a str,
    b_lo_t: f64,
    b_hi_t: f64,
    config_hash: &'a str,
    seed: u64,
}

/// One row per (protocol, n_pi, τ) with every report field.
pub fn write_sensitivity_csv(path: &Path, rows: &[SensitivityRow], cfg: &ExperimentConfig) -> Result<()> {
    let mut w = writer(path)?;
    let hash = cfg.hash();
    for r in rows {
        let rep = &r.report;
        w.serialize(ReportRow {
            protocol: r.protocol.name(),
            n_pi: r.n_pi,
            tau_s: r.tau,
            b_min_t: rep.b_min,
            s_spectral_t_per_sqrt_hz: rep.s_spectral,
            s_concentration_t_um32_per_sqrt_hz: rep.s_concentration,
            phase_resolution_deg: rep.phase_resolution,
            t_meas_s: rep.t_meas,
            spin_count: rep.spin_count,
            spin_density_m3: rep.sample.spin_density,
            sensing_volume_m3: rep.sample.sensing_volume,
            slope_deg_per_t: rep.fit.slope,
            intercept_deg: rep.fit.intercept,
            residual_rms_deg: rep.fit.residual_rms,
            fit_method: match rep.fit.method {
                spinsense_core::FitMethod::LinearRegression => "linear_regression",
                spinsense_core::FitMethod::MaxDerivative => "max_derivative",
            },
            b_lo_t: rep.fit.b_range.0,
            b_hi_t: rep.fit.b_range.1,
            config_hash: &hash,
            seed: cfg.seed,
        })?;
    }
    w.flush().map_err(|e| HarnessError::io(path, e))
}

/// Simulated time-domain trace around the echo, ensemble means.
pub fn write_trace_csv(path: &Path, trace: &spinsense_core::SimulationTrace) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["time_s", "mx", "my"])?;
    for (t, m) in trace.times.iter().zip(&trace.ensemble_mxy) {
        w.serialize((t, m.re, m.im))?;
    }
    w.flush().map_err(|e| HarnessError::io(path, e))
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    name: &'a str,
    config_hash: String,
    seed: u64,
    version: &'a str,
    files: &'a [String],
    config: &'a ExperimentConfig,
}

/// Output directory of one run.
#[derive(Debug, Clone)]
pub struct RunDir {
    pub path: PathBuf,
    pub files: Vec<String>,
}

impl RunDir {
    pub fn create(root: &Path, cfg: &ExperimentConfig) -> Result<Self> {
        let path = root.join(format!("{}-{}", cfg.name, cfg.hash()));
        fs::create_dir_all(&path).map_err(|e| HarnessError::io(&path, e))?;
        Ok(Self { path, files: Vec::new() })
    }

    /// Path for `name` inside the run directory, recorded in the manifest.
    pub fn file(&mut self, name: &str) -> PathBuf {
        self.files.push(name.to_string());
        self.path.join(name)
    }

    pub fn write_text(&mut self, name: &str, text: &str) -> Result<PathBuf> {
        let p = self.file(name);
        fs::write(&p, text).map_err(|e| HarnessError::io(&p, e))?;
        Ok(p)
    }

    pub fn write_manifest(&self, cfg: &ExperimentConfig) -> Result<PathBuf> {
        let m = Manifest {
            name: &cfg.name,
            config_hash: cfg.hash(),
            seed: cfg.seed,
            version: env!("CARGO_PKG_VERSION"),
            files: &self.files,
            config: cfg,
        };
        let p = self.path.join("manifest.json");
        let text = serde_json::to_string_pretty(&m)?;
        fs::write(&p, text + "\n").map_err(|e| HarnessError::io(&p, e))?;
        Ok(p)
    }
}
