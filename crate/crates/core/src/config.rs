//! Run configuration: a strict TOML file merged with command-line overrides
//! into a fully resolved [`RunConfig`].
//!
//! ```toml
//! scenario = "fig2-maxG"
//! out = "results"
//!
//! [system]
//! cutoff = 8
//!
//! [evolution]
//! dt = 0.01
//!
//! [grid]
//! beta_values = [1.5, 1.6, 1.7]
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolution::{DEFAULT_DISCARDED_WEIGHT, DEFAULT_DT, DEFAULT_SAMPLES, DEFAULT_T_MAX};
use crate::experiments::{Scenario, SweepGrid, SweepSettings, DEFAULT_SWEEP_CUTOFF, DEFAULT_SWEEP_DT, DEFAULT_SWEEP_TAIL_TOLERANCE, LANDSCAPE_BETA};
use crate::fock::{DEFAULT_FREQUENCIES, MODE_COUNT};
use crate::model::Variant;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    scenario: Option<String>,
    out: Option<PathBuf>,
    workers: Option<usize>,
    #[serde(default)]
    system: RawSystem,
    #[serde(default)]
    hamiltonian: RawHamiltonian,
    #[serde(default)]
    thermal: RawThermal,
    #[serde(default)]
    evolution: RawEvolution,
    #[serde(default)]
    grid: RawGrid,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSystem {
    cutoff: Option<usize>,
    frequencies: Option<[f64; MODE_COUNT]>,
    phases: Option<[f64; MODE_COUNT]>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawHamiltonian {
    variant: Option<Variant>,
    g0: Option<f64>,
    theta: Option<f64>,
    omega0: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawThermal {
    beta_omega_a: Option<f64>,
    tail_tolerance: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEvolution {
    t_max: Option<f64>,
    samples: Option<usize>,
    dt: Option<f64>,
    convergence_tol: Option<f64>,
    discarded_weight: Option<f64>,
    step_check_stride: Option<usize>,
    truncation_check_stride: Option<usize>,
    escalate_cutoff: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    g0_values: Option<Vec<f64>>,
    beta_values: Option<Vec<f64>>,
}

/// Single-trajectory parameters used by `evolve`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySpec {
    pub variant: Variant,
    pub g0: f64,
    /// `inf` is the vacuum.
    pub beta_omega_a: f64,
}

/// Which command the configuration is resolved for; picks defaults that
/// the file leaves open.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Evolve,
    Sweep,
    Landscape,
    Baseline,
    Selftest,
}

impl Command {
    fn default_scenario(self) -> Scenario {
        match self {
            Command::Sweep | Command::Evolve | Command::Selftest => Scenario::Fig2MaxG,
            Command::Landscape => Scenario::Fig3Rwa,
            Command::Baseline => Scenario::DoubleSpdc,
        }
    }

    fn accepts(self, scenario: Scenario) -> bool {
        match self {
            Command::Sweep => matches!(scenario, Scenario::Fig1MaxI | Scenario::Fig2MaxG),
            Command::Landscape => scenario.is_landscape(),
            Command::Baseline => scenario == Scenario::DoubleSpdc,
            Command::Evolve | Command::Selftest => true,
        }
    }
}

/// Command-line values that take precedence over the file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub scenario: Option<String>,
    pub out: Option<PathBuf>,
    pub workers: Option<usize>,
    pub cutoff: Option<usize>,
    pub dt: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub out: PathBuf,
    pub grid: SweepGrid,
    pub settings: SweepSettings,
    pub trajectory: TrajectorySpec,
}

impl RunConfig {
    pub fn scenario(&self) -> Scenario {
        self.grid.scenario
    }

    /// TOML echo of every resolved value.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("resolved config serialises")
    }
}

/// 1-based line and column of a byte offset.
fn line_column(source: &str, offset: usize) -> (usize, usize) {
    let before = &source[..offset.min(source.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.len() - before.rfind('\n').map_or(0, |p| p + 1) + 1;
    (line, column)
}

/// Position of `key = …` inside `[section]` (top level when `section` is empty).
fn locate(source: &str, section: &str, key: &str) -> (usize, usize) {
    let mut current = String::new();
    for (n, line) in source.lines().enumerate() {
        let trimmed = line.trim_start();
        if let Some(rest) = trimmed.strip_prefix('[') {
            current = rest.trim_end().trim_end_matches(']').trim().to_string();
            continue;
        }
        let name = trimmed.split('=').next().unwrap_or("").trim();
        if current == section && name == key {
            return (n + 1, line.len() - trimmed.len() + 1);
        }
    }
    (0, 0)
}

fn config_error(source: &str, section: &str, key: &str, err: impl std::fmt::Display) -> Error {
    let (line, column) = locate(source, section, key);
    let name = if section.is_empty() {
        key.to_string()
    } else {
        format!("{section}.{key}")
    };
    Error::Config {
        line,
        column,
        message: format!("{name}: {err}"),
    }
}

/// Resolves a configuration from TOML text.
pub fn parse_config_str(source: &str, command: Command, overrides: &Overrides) -> Result<RunConfig> {
    let raw: RawConfig = toml::from_str(source).map_err(|e| {
        let (line, column) = e
            .span()
            .map_or((0, 0), |span| line_column(source, span.start));
        Error::Config {
            line,
            column,
            message: e.message().to_string(),
        }
    })?;

    let scenario_name = overrides.scenario.clone().or(raw.scenario);
    let scenario = match &scenario_name {
        Some(name) => name
            .parse::<Scenario>()
            .map_err(|e| config_error(source, "", "scenario", e))?,
        None => command.default_scenario(),
    };
    if !command.accepts(scenario) {
        return Err(config_error(
            source,
            "",
            "scenario",
            format!("scenario {scenario} cannot be run by this command"),
        ));
    }

    let defaults = SweepSettings::default();
    let default_dt = if command == Command::Evolve {
        DEFAULT_DT
    } else {
        DEFAULT_SWEEP_DT
    };
    let settings = SweepSettings {
        cutoff: overrides.cutoff.or(raw.system.cutoff).unwrap_or(DEFAULT_SWEEP_CUTOFF),
        frequencies: raw.system.frequencies.unwrap_or(DEFAULT_FREQUENCIES),
        phases: raw.system.phases.unwrap_or([0.0; MODE_COUNT]),
        theta: raw.hamiltonian.theta.unwrap_or(0.0),
        omega0: raw.hamiltonian.omega0,
        dt: overrides.dt.or(raw.evolution.dt).unwrap_or(default_dt),
        convergence_tol: raw.evolution.convergence_tol.unwrap_or(defaults.convergence_tol),
        tail_tolerance: raw.thermal.tail_tolerance.unwrap_or(DEFAULT_SWEEP_TAIL_TOLERANCE),
        discarded_weight: raw.evolution.discarded_weight.unwrap_or(DEFAULT_DISCARDED_WEIGHT),
        step_check_stride: raw.evolution.step_check_stride.unwrap_or(defaults.step_check_stride),
        truncation_check_stride: raw
            .evolution
            .truncation_check_stride
            .unwrap_or(defaults.truncation_check_stride),
        escalate_cutoff: raw.evolution.escalate_cutoff.unwrap_or(defaults.escalate_cutoff),
        workers: overrides.workers.or(raw.workers),
    };

    let preset = SweepGrid::default_for(scenario);
    let grid = SweepGrid {
        scenario,
        g0_values: raw.grid.g0_values.unwrap_or(preset.g0_values),
        beta_values: raw.grid.beta_values.unwrap_or(preset.beta_values),
        t_max: raw.evolution.t_max.unwrap_or(DEFAULT_T_MAX),
        samples: raw.evolution.samples.unwrap_or(DEFAULT_SAMPLES),
    };

    let trajectory = TrajectorySpec {
        variant: raw.hamiltonian.variant.unwrap_or(Variant::FullInteraction),
        g0: raw.hamiltonian.g0.unwrap_or(0.05),
        beta_omega_a: raw.thermal.beta_omega_a.unwrap_or(LANDSCAPE_BETA),
    };

    let config = RunConfig {
        out: overrides
            .out
            .clone()
            .or(raw.out)
            .unwrap_or_else(|| PathBuf::from("results")),
        grid,
        settings,
        trajectory,
    };
    validate(&config, source, command)?;
    Ok(config)
}

fn validate(config: &RunConfig, source: &str, command: Command) -> Result<()> {
    let s = &config.settings;
    s.system().map_err(|e| {
        let key = if s.cutoff < 2 {
            "cutoff"
        } else if s.frequencies[0] != 1.0 || s.frequencies.iter().any(|w| !(*w > 0.0)) {
            "frequencies"
        } else {
            "phases"
        };
        config_error(source, "system", key, e)
    })?;
    let variant = if command == Command::Evolve {
        config.trajectory.variant
    } else {
        config.scenario().variant()
    };
    s.validate(variant)
        .map_err(|e| config_error(source, "evolution", "dt", e))?;
    config
        .grid
        .validate()
        .map_err(|e| config_error(source, "grid", "g0_values", e))?;
    let t = &config.trajectory;
    if !(t.g0 >= 0.0 && t.g0.is_finite()) {
        return Err(config_error(source, "hamiltonian", "g0", "must be finite and nonnegative"));
    }
    if !(t.beta_omega_a > 0.0) {
        return Err(config_error(source, "thermal", "beta_omega_a", "must be positive"));
    }
    Ok(())
}

/// Reads and resolves a configuration file; `None` resolves pure defaults.
pub fn parse_config(path: Option<&Path>, command: Command, overrides: &Overrides) -> Result<RunConfig> {
    let source = match path {
        Some(p) => std::fs::read_to_string(p)?,
        None => String::new(),
    };
    parse_config_str(&source, command, overrides)
}
