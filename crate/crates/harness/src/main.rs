use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::Value;

use spinsense::config::{parse_override, ExperimentConfig};
use spinsense::output::default_root;
use spinsense::reproduce::{reproduce, run_experiment, Experiment};
use spinsense::Result;

#[derive(Parser)]
#[command(name = "spinsense", version, about = "Echo-phase magnetometry simulations and sensitivity analysis")]
struct Cli {
    /// Output root (default: $SPINSENSE_OUT or ./runs).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Override a configuration value, e.g. --set rf.harmonic=3 (repeatable).
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Override the master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Echo phase and amplitude versus RF amplitude.
    SweepAmplitude { config: PathBuf },
    /// Echo versus RF phase, one curve per configured amplitude.
    SweepPhase { config: PathBuf },
    /// Phase sweeps for each harmonic in symmetry.harmonics.
    Symmetry { config: PathBuf },
    /// Hahn echo with RF gated to the first, second or both delays.
    SplitInterval { config: PathBuf },
    /// Amplitude sweeps for every decoupling protocol, pulse count and delay.
    DdSweep { config: PathBuf },
    /// Sensitivity reports versus pulse count.
    Sensitivity { config: PathBuf },
    /// Regenerate a figure bundle (fig2, fig3, fig4, fig5) from shipped configs.
    Reproduce { figure: String },
    /// Check a configuration without running anything.
    Validate { config: PathBuf },
}

fn load(path: &Path, overrides: &[(String, Value)]) -> Result<ExperimentConfig> {
    let cfg = ExperimentConfig::from_file(path, overrides)?;
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<()> {
    let mut overrides = cli.overrides.iter().map(|s| parse_override(s)).collect::<Result<Vec<_>>>()?;
    if let Some(seed) = cli.seed {
        overrides.push(("seed".into(), Value::from(seed)));
    }
    let root = cli.out.unwrap_or_else(default_root);
    let (exp, path) = match cli.command {
        Command::Reproduce { figure } => {
            log::info!("reproducing {figure}");
            let dir = reproduce(&figure, &root, &overrides)?;
            println!("{}", dir.path.display());
            return Ok(());
        }
        Command::Validate { config } => {
            let cfg = load(&config, &overrides)?;
            println!("ok {} {}", cfg.name, cfg.hash());
            return Ok(());
        }
        Command::SweepAmplitude { config } => (Experiment::SweepAmplitude, config),
        Command::SweepPhase { config } => (Experiment::SweepPhase, config),
        Command::Symmetry { config } => (Experiment::Symmetry, config),
        Command::SplitInterval { config } => (Experiment::SplitInterval, config),
        Command::DdSweep { config } => (Experiment::DdSweep, config),
        Command::Sensitivity { config } => (Experiment::Sensitivity, config),
    };
    let cfg = load(&path, &overrides)?;
    log::info!("running {:?} for {} ({})", exp, cfg.name, cfg.hash());
    let dir = run_experiment(exp, &cfg, &root)?;
    println!("{}", dir.path.display());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
