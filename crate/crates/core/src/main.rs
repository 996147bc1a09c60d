use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::{info, warn};

use trispdc::config::{parse_config, Command, Overrides, RunConfig};
use trispdc::experiments::{run_grid, run_scenario, SweepGrid, SweepResult};
use trispdc::output::{emit_result, write_manifest, write_series_csv};
use trispdc::{selftest, Result};

#[derive(Parser)]
#[command(name = "trispdc", version, about = "Three-mode down-conversion simulator and moment witnesses")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Single thermal trajectory time series.
    Evolve(Common),
    /// Max-over-time witness grid (fig1-maxI, fig2-maxG).
    Sweep(Common),
    /// Time-coupling witness maps (fig3-rwa-G(t,g0), fig4-full-G(t,g0)).
    Landscape(Common),
    /// Double two-mode down-conversion grid.
    Baseline(Common),
    /// Fast oracle checks.
    Selftest(Common),
}

#[derive(Args, Clone, Debug)]
struct Common {
    /// TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long)]
    workers: Option<usize>,
    /// Fock cutoff per mode.
    #[arg(long)]
    cutoff: Option<usize>,
    /// Time step of the driven propagator.
    #[arg(long)]
    dt: Option<f64>,
    /// Scenario name.
    #[arg(long)]
    scenario: Option<String>,
}

impl Common {
    fn overrides(&self) -> Overrides {
        Overrides {
            scenario: self.scenario.clone(),
            out: self.out.clone(),
            workers: self.workers,
            cutoff: self.cutoff,
            dt: self.dt,
        }
    }
}

fn finish(label: &str, config: &RunConfig, result: &SweepResult, mut files: Vec<PathBuf>) -> Result<bool> {
    files.extend(emit_result(result, &config.out)?);
    finish_files(label, config, Some(result), files)
}

fn finish_files(label: &str, config: &RunConfig, result: Option<&SweepResult>, files: Vec<PathBuf>) -> Result<bool> {
    let manifest = write_manifest(&config.out, label, config, result, &files)?;
    for f in files.iter().chain(std::iter::once(&manifest)) {
        println!("wrote {}", f.display());
    }
    let converged = result.is_none_or(SweepResult::all_converged);
    if let Some(r) = result {
        for c in r.cells.iter().filter(|c| !c.certificate.converged) {
            warn!(
                "unconverged cell g0 = {}, beta*omega_a = {}: {}",
                c.g0,
                c.beta_omega_a,
                c.certificate.failure.as_deref().unwrap_or("")
            );
        }
    }
    Ok(converged)
}

fn evolve(config: &RunConfig) -> Result<bool> {
    let t = &config.trajectory;
    let grid = SweepGrid {
        g0_values: vec![t.g0],
        beta_values: vec![t.beta_omega_a],
        ..config.grid.clone()
    };
    let result = run_grid(t.variant, &grid, &config.settings, true)?;
    fs::create_dir_all(&config.out)?;
    let path = config.out.join("trajectory.csv");
    let series = &result.series[0];
    write_series_csv(&series.moments, &series.witnesses, fs::File::create(&path)?)?;
    let cert = &result.cells[0].certificate;
    info!("certificate: {cert:?}");
    finish_files("evolve", config, Some(&result), vec![path])
}

fn run(command: Command, args: &Common) -> Result<bool> {
    let config = parse_config(args.config.as_deref(), command, &args.overrides())?;
    info!("resolved configuration:\n{}", config.to_toml());
    match command {
        Command::Evolve => evolve(&config),
        Command::Sweep | Command::Landscape | Command::Baseline => {
            let result = run_scenario(&config.grid, &config.settings)?;
            for w in &result.warnings {
                eprintln!("warning: {w}");
            }
            let label = match command {
                Command::Sweep => "sweep",
                Command::Landscape => "landscape",
                _ => "baseline",
            };
            finish(label, &config, &result, Vec::new())
        }
        Command::Selftest => {
            let checks = selftest::run_all();
            for c in &checks {
                println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            Ok(checks.iter().all(|c| c.passed))
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let (command, args) = match &cli.command {
        Cmd::Evolve(a) => (Command::Evolve, a),
        Cmd::Sweep(a) => (Command::Sweep, a),
        Cmd::Landscape(a) => (Command::Landscape, a),
        Cmd::Baseline(a) => (Command::Baseline, a),
        Cmd::Selftest(a) => (Command::Selftest, a),
    };
    match run(command, args) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("some convergence certificates failed");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
