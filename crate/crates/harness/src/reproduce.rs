//! Runs an experiment end to end and writes its CSVs, plots and manifest.
//! Figure bundles use the configurations shipped under `configs/`.

use std::path::Path;

use serde_json::Value;
use spinsense_core::units::{MT, NS};

use crate::config::ExperimentConfig;
use crate::error::{HarnessError, Result};
use crate::experiments::{
    fit_amplitude_sweep, run_dd_sweep, run_sensitivity, run_split_interval, run_sweep_amplitude, run_sweep_phase,
    run_symmetry, run_trace, SensitivityRow, SplitResult, SplitRow, SweepResult,
};
use crate::output::{num, write_sensitivity_csv, write_sweeps_csv, write_table, write_trace_csv, RunDir};
use crate::plot::{line_plot, Series};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    SweepAmplitude,
    SweepPhase,
    Symmetry,
    SplitInterval,
    DdSweep,
    Sensitivity,
}

pub const FIGURES: [&str; 4] = ["fig2", "fig3", "fig4", "fig5"];

pub fn bundled_config_text(figure: &str) -> Result<&'static str> {
    Ok(match figure {
        "fig2" => include_str!("../configs/fig2.json"),
        "fig3" => include_str!("../configs/fig3.json"),
        "fig4" => include_str!("../configs/fig4.json"),
        "fig5" => include_str!("../configs/fig5.json"),
        other => return Err(HarnessError::UnknownFigure(other.to_string())),
    })
}

pub fn bundled_config(figure: &str, overrides: &[(String, Value)]) -> Result<ExperimentConfig> {
    ExperimentConfig::from_json_str(bundled_config_text(figure)?, overrides)
}

fn axis_scale(sweep: &SweepResult) -> (f64, &'static str) {
    if sweep.axis_name == "b1_t" {
        (1.0 / MT, "B1 (mT)")
    } else {
        (1.0, "RF phase (deg)")
    }
}

/// `<stem>.csv` plus amplitude and phase plots.
fn emit_sweeps(dir: &mut RunDir, stem: &str, title: &str, sweeps: &[SweepResult]) -> Result<()> {
    write_sweeps_csv(&dir.file(&format!("{stem}.csv")), sweeps)?;
    let Some(first) = sweeps.first() else {
        return Ok(());
    };
    let (sx, xl) = axis_scale(first);
    let curves = |f: &dyn Fn(&spinsense_core::EchoResult) -> f64| -> Vec<Series> {
        sweeps
            .iter()
            .map(|s| Series {
                label: &s.label,
                points: s.axis_values.iter().zip(&s.echo_results).map(|(x, e)| (x * sx, f(e))).collect(),
            })
            .collect()
    };
    let amp = line_plot(&format!("{title}: echo amplitude"), xl, "normalized amplitude", &curves(&|e| e.amplitude));
    dir.write_text(&format!("{stem}_amplitude.svg"), &amp)?;
    let ph = line_plot(&format!("{title}: echo phase"), xl, "phase (deg)", &curves(&|e| e.phase_unwrapped));
    dir.write_text(&format!("{stem}_phase.svg"), &ph)?;
    Ok(())
}

fn emit_fit(dir: &mut RunDir, name: &str, sweep: &SweepResult) -> Result<()> {
    let fit = fit_amplitude_sweep(sweep)?;
    let method = match fit.method {
        spinsense_core::FitMethod::LinearRegression => "linear_regression",
        spinsense_core::FitMethod::MaxDerivative => "max_derivative",
    };
    let header = [
        "series",
        "slope_deg_per_t",
        "inverse_slope_t_per_deg",
        "intercept_deg",
        "residual_rms_deg",
        "fit_method",
        "b_lo_t",
        "b_hi_t",
        "config_hash",
        "seed",
    ];
    let row = vec![
        sweep.label.clone(),
        num(fit.slope),
        num(1.0 / fit.slope),
        num(fit.intercept),
        num(fit.residual_rms),
        method.to_string(),
        num(fit.b_range.0),
        num(fit.b_range.1),
        sweep.metadata.config_hash.clone(),
        sweep.metadata.seed.to_string(),
    ];
    write_table(&dir.file(name), &strings(&header), &[row])
}

fn strings(v: &[&str]) -> Vec<String> {
    v.iter().map(|s| s.to_string()).collect()
}

/// Narrow table: one row per (series, grid point) with the chosen columns.
fn emit_columns(
    dir: &mut RunDir,
    name: &str,
    sweeps: &[SweepResult],
    columns: &[&str],
    row: impl Fn(&SweepResult, usize) -> Vec<String>,
) -> Result<()> {
    let mut header = vec!["series".to_string()];
    header.push(sweeps.first().map_or("axis".into(), |s| s.axis_name.clone()));
    header.extend(strings(columns));
    header.extend(strings(&["config_hash", "seed"]));
    let rows: Vec<Vec<String>> = sweeps
        .iter()
        .flat_map(|s| {
            let row = &row;
            (0..s.axis_values.len()).map(move |i| {
                let mut r = vec![s.label.clone(), num(s.axis_values[i])];
                r.extend(row(s, i));
                r.push(s.metadata.config_hash.clone());
                r.push(s.metadata.seed.to_string());
                r
            })
        })
        .collect();
    write_table(&dir.file(name), &header, &rows)
}

/// Analytic decomposition next to the simulated phase of every gating.
fn emit_split(dir: &mut RunDir, name: &str, split: &SplitResult) -> Result<()> {
    let mut header = strings(&[
        "phi0_deg",
        "first_rad",
        "second_rad",
        "full_rad",
        "both_rad",
        "first_plus_second_rad",
        "full_minus_first_rad",
    ]);
    for s in &split.sweeps {
        header.push(format!("sim_{}_phase_deg", s.label));
        header.push(format!("sim_{}_amplitude", s.label));
    }
    header.extend(strings(&["config_hash", "seed"]));
    let meta = split.sweeps.first().map(|s| s.metadata.clone());
    let rows: Vec<Vec<String>> = split
        .identity
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let mut row: Vec<String> =
                [r.phi0_deg, r.first, r.second, r.full, r.both, r.first_plus_second, r.full_minus_first]
                    .into_iter()
                    .map(num)
                    .collect();
            for s in &split.sweeps {
                row.push(num(s.echo_results[i].phase_unwrapped));
                row.push(num(s.echo_results[i].amplitude));
            }
            if let Some(m) = &meta {
                row.push(m.config_hash.clone());
                row.push(m.seed.to_string());
            }
            row
        })
        .collect();
    write_table(&dir.file(name), &header, &rows)?;
    type Field = fn(&SplitRow) -> f64;
    let fields: [(&str, Field); 4] = [
        ("first", |r| r.first),
        ("second", |r| r.second),
        ("full", |r| r.full),
        ("full - first", |r| r.full_minus_first),
    ];
    let series: Vec<Series> = fields
        .into_iter()
        .map(|(label, f)| Series {
            label,
            points: split.identity.iter().map(|r| (r.phi0_deg, f(r).to_degrees())).collect(),
        })
        .collect();
    let svg = line_plot("split-interval gating (analytic)", "RF phase (deg)", "phase (deg)", &series);
    dir.write_text(&name.replace(".csv", ".svg"), &svg)?;
    Ok(())
}

fn emit_sensitivity(dir: &mut RunDir, name: &str, rows: &[SensitivityRow], cfg: &ExperimentConfig) -> Result<()> {
    write_sensitivity_csv(&dir.file(name), rows, cfg)?;
    let mut series: Vec<Series> = Vec::new();
    let labels: Vec<String> = rows.iter().map(|r| format!("{} tau={}ns", r.protocol.name(), num(r.tau / NS))).collect();
    for (r, label) in rows.iter().zip(&labels) {
        let p = (r.n_pi as f64, r.report.s_spectral);
        match series.iter_mut().find(|s| s.label == label) {
            Some(s) => s.points.push(p),
            None => series.push(Series {
                label,
                points: vec![p],
            }),
        }
    }
    let svg = line_plot("spectral sensitivity", "number of pi pulses", "S (T/sqrt(Hz))", &series);
    dir.write_text(&name.replace(".csv", ".svg"), &svg)?;
    Ok(())
}

/// Runs one catalog experiment and writes its outputs under `root`.
pub fn run_experiment(exp: Experiment, cfg: &ExperimentConfig, root: &Path) -> Result<RunDir> {
    cfg.validate()?;
    let mut dir = RunDir::create(root, cfg)?;
    match exp {
        Experiment::SweepAmplitude => {
            let s = run_sweep_amplitude(cfg)?;
            emit_sweeps(&mut dir, "sweep_amplitude", "amplitude sweep", std::slice::from_ref(&s))?;
            emit_fit(&mut dir, "sweep_amplitude_fit.csv", &s)?;
        }
        Experiment::SweepPhase => {
            let s = run_sweep_phase(cfg)?;
            emit_sweeps(&mut dir, "sweep_phase", "phase sweep", &s)?;
        }
        Experiment::Symmetry => {
            let s = run_symmetry(cfg)?;
            emit_sweeps(&mut dir, "symmetry", "harmonic symmetry", &s)?;
        }
        Experiment::SplitInterval => {
            let s = run_split_interval(cfg)?;
            emit_sweeps(&mut dir, "split_interval_sweeps", "split-interval gating", &s.sweeps)?;
            emit_split(&mut dir, "split_interval.csv", &s)?;
        }
        Experiment::DdSweep => {
            let s = run_dd_sweep(cfg)?;
            emit_sweeps(&mut dir, "dd_sweep", "decoupling sweeps", &s)?;
        }
        Experiment::Sensitivity => {
            let rows = run_sensitivity(cfg)?;
            emit_sensitivity(&mut dir, "sensitivity.csv", &rows, cfg)?;
        }
    }
    dir.write_manifest(cfg)?;
    Ok(dir)
}

fn fig2(cfg: &ExperimentConfig, dir: &mut RunDir) -> Result<()> {
    let amp = run_sweep_amplitude(cfg)?;
    emit_sweeps(dir, "fig2_amplitude", "amplitude sweep", std::slice::from_ref(&amp))?;
    emit_fit(dir, "fig2_fit.csv", &amp)?;
    let phase = run_sweep_phase(cfg)?;
    emit_sweeps(dir, "fig2_phase", "phase sweep", &phase)?;
    let b_max = cfg.amplitude_grid()?.last().copied().unwrap_or(0.0);
    let trace = run_trace(cfg, b_max, 200.0 * NS, 81)?;
    write_trace_csv(&dir.file("fig2_trace.csv"), &trace)?;
    let series = [
        Series {
            label: "Mx",
            points: trace.times.iter().zip(&trace.ensemble_mxy).map(|(t, m)| (t / NS, m.re)).collect(),
        },
        Series {
            label: "My",
            points: trace.times.iter().zip(&trace.ensemble_mxy).map(|(t, m)| (t / NS, m.im)).collect(),
        },
    ];
    dir.write_text("fig2_trace.svg", &line_plot("echo at maximum amplitude", "time (ns)", "magnetization", &series))?;
    Ok(())
}

fn fig3(cfg: &ExperimentConfig, dir: &mut RunDir) -> Result<()> {
    let sym = run_symmetry(cfg)?;
    emit_columns(dir, "fig3_amplitude.csv", &sym, &["amplitude"], |s, i| vec![num(s.echo_results[i].amplitude)])?;
    emit_columns(
        dir,
        "fig3_phase.csv",
        &sym,
        &["phase_wrapped_deg", "phase_unwrapped_deg", "snr"],
        |s, i| {
            let e = &s.echo_results[i];
            vec![num(e.phase_wrapped), num(e.phase_unwrapped), num(e.snr)]
        },
    )?;
    emit_columns(
        dir,
        "fig3_simulation.csv",
        &sym,
        &["analytic_phase_rad", "analytic_phase_deg"],
        |s, i| vec![num(s.analytic_phases[i]), num(s.analytic_phases[i].to_degrees())],
    )?;
    let split = run_split_interval(cfg)?;
    emit_split(dir, "fig3_split.csv", &split)?;
    let series: Vec<Series> = sym
        .iter()
        .map(|s| Series {
            label: &s.label,
            points: s.axis_values.iter().zip(&s.analytic_phases).map(|(x, p)| (*x, p.to_degrees())).collect(),
        })
        .collect();
    dir.write_text("fig3_simulation.svg", &line_plot("analytic phase by harmonic", "RF phase (deg)", "phase (deg)", &series))?;
    Ok(())
}

fn fig4(cfg: &ExperimentConfig, dir: &mut RunDir) -> Result<()> {
    let sweeps = run_dd_sweep(cfg)?;
    for kind in &cfg.dd.protocols {
        let prefix = format!("{}/", kind.name());
        let mine: Vec<SweepResult> = sweeps.iter().filter(|s| s.label.starts_with(&prefix)).cloned().collect();
        emit_sweeps(dir, &format!("fig4_{}", kind.name()), &kind.name().to_uppercase(), &mine)?;
    }
    Ok(())
}

fn fig5(cfg: &ExperimentConfig, dir: &mut RunDir) -> Result<()> {
    let rows = run_sensitivity(cfg)?;
    emit_sensitivity(dir, "fig5_sensitivity.csv", &rows, cfg)
}

/// Regenerates one figure bundle from its shipped configuration.
pub fn reproduce(figure: &str, root: &Path, overrides: &[(String, Value)]) -> Result<RunDir> {
    let cfg = bundled_config(figure, overrides)?;
    cfg.validate()?;
    let mut dir = RunDir::create(root, &cfg)?;
    match figure {
        "fig2" => fig2(&cfg, &mut dir)?,
        "fig3" => fig3(&cfg, &mut dir)?,
        "fig4" => fig4(&cfg, &mut dir)?,
        "fig5" => fig5(&cfg, &mut dir)?,
        other => return Err(HarnessError::UnknownFigure(other.to_string())),
    }
    dir.write_manifest(&cfg)?;
    Ok(dir)
}
