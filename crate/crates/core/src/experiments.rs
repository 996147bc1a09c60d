//! Scenario presets and the parameter-sweep harness.
//!
//! A sweep evaluates one Hamiltonian variant over a `(g0, βω_a)` grid. Each
//! `g0` row evolves the union of the thermal ensembles of all its `β` cells
//! once and reweights the shared basis trajectories per cell. Rows are
//! independent and run on the worker pool; their results are gathered in grid
//! order, so output does not depend on scheduling.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::evolution::{combine_moments, max_relative_change, Dynamics, FockEnsemble, DEFAULT_DISCARDED_WEIGHT, DEFAULT_T_MAX, DEFAULT_SAMPLES};
use crate::fock::{ModeSystem, DEFAULT_FREQUENCIES, MODE_COUNT};
use crate::model::{HamiltonianSpec, ThermalSpec, Variant};
use crate::witness::{MomentSet, WitnessReport};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
/// Largest coupling of the explored regime, in units of `ω_a`.
pub const REGIME_MAX_G0: f64 = 0.1;
/// Smallest `βω_a` of the explored regime.
pub const REGIME_MIN_BETA: f64 = 1.0;
/// Temperature of the time-coupling landscapes.
pub const LANDSCAPE_BETA: f64 = 2.7;
pub const DEFAULT_SWEEP_CUTOFF: usize = 8;
/// Sweep step; each certified row is rerun at half this step.
pub const DEFAULT_SWEEP_DT: f64 = 0.01;
/// The default cutoff leaves a thermal tail of `e^{-8}` in mode `a` at
/// `βω_a = 1`; the truncation check bounds its effect on the witnesses.
pub const DEFAULT_SWEEP_TAIL_TOLERANCE: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Scenario {
    #[serde(rename = "fig1-maxI")]
    Fig1MaxI,
    #[serde(rename = "fig2-maxG")]
    Fig2MaxG,
    #[serde(rename = "fig3-rwa-G(t,g0)", alias = "fig3-rwa")]
    Fig3Rwa,
    #[serde(rename = "fig4-full-G(t,g0)", alias = "fig4-full")]
    Fig4Full,
    #[serde(rename = "double-spdc-G", alias = "double-spdc")]
    DoubleSpdc,
}

impl Scenario {
    pub const ALL: [Scenario; 5] = [
        Scenario::Fig1MaxI,
        Scenario::Fig2MaxG,
        Scenario::Fig3Rwa,
        Scenario::Fig4Full,
        Scenario::DoubleSpdc,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::Fig1MaxI => "fig1-maxI",
            Scenario::Fig2MaxG => "fig2-maxG",
            Scenario::Fig3Rwa => "fig3-rwa-G(t,g0)",
            Scenario::Fig4Full => "fig4-full-G(t,g0)",
            Scenario::DoubleSpdc => "double-spdc-G",
        }
    }

    /// File-name friendly label.
    pub fn slug(self) -> &'static str {
        match self {
            Scenario::Fig1MaxI => "fig1_max_i",
            Scenario::Fig2MaxG => "fig2_max_g",
            Scenario::Fig3Rwa => "fig3_rwa_landscape",
            Scenario::Fig4Full => "fig4_full_landscape",
            Scenario::DoubleSpdc => "double_spdc",
        }
    }

    pub fn variant(self) -> Variant {
        match self {
            Scenario::Fig1MaxI | Scenario::Fig2MaxG | Scenario::Fig4Full => Variant::FullInteraction,
            Scenario::Fig3Rwa => Variant::RwaTrilinear,
            Scenario::DoubleSpdc => Variant::DoubleSpdc,
        }
    }

    /// Landscapes keep the full time series of every cell.
    pub fn is_landscape(self) -> bool {
        matches!(self, Scenario::Fig3Rwa | Scenario::Fig4Full)
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scenario {
    type Err = crate::error::Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim();
        Scenario::ALL
            .into_iter()
            .find(|sc| sc.name() == key)
            .or(match key {
                "fig3-rwa" => Some(Scenario::Fig3Rwa),
                "fig4-full" => Some(Scenario::Fig4Full),
                "double-spdc" => Some(Scenario::DoubleSpdc),
                _ => None,
            })
            .ok_or_else(|| invalid(format!("unknown scenario {s:?}")))
    }
}

pub fn log_spaced(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let (a, b) = (lo.ln(), hi.ln());
            (0..n)
                .map(|k| {
                    if k == n - 1 {
                        hi
                    } else {
                        (a + (b - a) * k as f64 / (n - 1) as f64).exp()
                    }
                })
                .collect()
        }
    }
}

pub fn lin_spaced(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n)
            .map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64)
            .collect(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepGrid {
    pub scenario: Scenario,
    pub g0_values: Vec<f64>,
    pub beta_values: Vec<f64>,
    pub t_max: f64,
    /// Uniform sample times over `(0, t_max]`.
    pub samples: usize,
}

impl SweepGrid {
    /// 30 log-spaced couplings in `[0.001, 0.1]`; 30 linear `βω_a` in
    /// `[1, 3]`, or `βω_a = 2.7` alone for the landscapes.
    pub fn default_for(scenario: Scenario) -> Self {
        let beta_values = if scenario.is_landscape() {
            vec![LANDSCAPE_BETA]
        } else {
            lin_spaced(1.0, 3.0, 30)
        };
        Self {
            scenario,
            g0_values: log_spaced(0.001, 0.1, 30),
            beta_values,
            t_max: DEFAULT_T_MAX,
            samples: DEFAULT_SAMPLES,
        }
    }

    pub fn sample_times(&self) -> Vec<f64> {
        (1..=self.samples)
            .map(|k| self.t_max * k as f64 / self.samples as f64)
            .collect()
    }

    /// Rejects malformed grids; `βω_a = inf` denotes the vacuum. Returns warnings for points outside the
    /// explored regime.
    pub fn validate(&self) -> Result<Vec<String>> {
        for (label, values) in [("g0_values", &self.g0_values), ("beta_values", &self.beta_values)] {
            if values.is_empty() {
                return Err(invalid(format!("{label} is empty")));
            }
            if values.iter().any(|v| v.is_nan() || *v == f64::NEG_INFINITY) {
                return Err(invalid(format!("{label} contains an invalid value")));
            }
            if values.windows(2).any(|w| !(w[0] < w[1])) {
                return Err(invalid(format!("{label} must be strictly increasing")));
            }
        }
        if self.g0_values[0] < 0.0 || self.g0_values.iter().any(|g| g.is_infinite()) {
            return Err(invalid("couplings must be finite and nonnegative"));
        }
        if !(self.beta_values[0] > 0.0) {
            return Err(invalid("beta*omega_a values must be positive"));
        }
        if !(self.t_max.is_finite() && self.t_max > 0.0) || self.samples == 0 {
            return Err(invalid("need t_max > 0 and at least one sample"));
        }
        let mut warnings = Vec::new();
        if let Some(g) = self.g0_values.iter().find(|g| **g > REGIME_MAX_G0) {
            warnings.push(format!("g0 = {g} lies above the explored regime g0 <= {REGIME_MAX_G0}"));
        }
        if let Some(b) = self.beta_values.iter().find(|b| **b < REGIME_MIN_BETA) {
            warnings.push(format!("beta*omega_a = {b} lies below the explored regime beta*omega_a >= {REGIME_MIN_BETA}"));
        }
        Ok(warnings)
    }
}

/// Numerical settings shared by every cell of a sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSettings {
    pub cutoff: usize,
    pub frequencies: [f64; MODE_COUNT],
    pub phases: [f64; MODE_COUNT],
    pub theta: f64,
    /// Pump frequency override; defaults to the sum of mode frequencies.
    pub omega0: Option<f64>,
    pub dt: f64,
    pub convergence_tol: f64,
    pub tail_tolerance: f64,
    pub discarded_weight: f64,
    /// Rows rerun at `dt/2`: 0 none, 1 all, `k` every `k`-th plus the last.
    pub step_check_stride: usize,
    /// Rows rerun at `cutoff + 2`, same convention.
    pub truncation_check_stride: usize,
    /// On a failed truncation check, compare `cutoff + 2` with `cutoff + 4`
    /// and report the larger cutoff if that pair agrees.
    pub escalate_cutoff: bool,
    /// Worker threads; `None` uses the global pool.
    pub workers: Option<usize>,
}

impl Default for SweepSettings {
    fn default() -> Self {
        Self {
            cutoff: DEFAULT_SWEEP_CUTOFF,
            frequencies: DEFAULT_FREQUENCIES,
            phases: [0.0; MODE_COUNT],
            theta: 0.0,
            omega0: None,
            dt: DEFAULT_SWEEP_DT,
            convergence_tol: crate::evolution::DEFAULT_CONVERGENCE_TOL,
            tail_tolerance: DEFAULT_SWEEP_TAIL_TOLERANCE,
            discarded_weight: DEFAULT_DISCARDED_WEIGHT,
            step_check_stride: 1,
            truncation_check_stride: 1,
            escalate_cutoff: true,
            workers: None,
        }
    }
}

impl SweepSettings {
    pub fn system(&self) -> Result<ModeSystem> {
        ModeSystem::new(self.frequencies, self.phases, self.cutoff)
    }

    pub fn hamiltonian(&self, variant: Variant, g0: f64) -> Result<HamiltonianSpec> {
        let mut h = HamiltonianSpec::new(variant, g0)?.with_theta(self.theta);
        if let Some(w) = self.omega0 {
            h = h.with_pump_frequency(w);
        }
        Ok(h)
    }

    pub fn validate(&self, variant: Variant) -> Result<()> {
        let sys = self.system()?;
        if !(self.convergence_tol > 0.0) {
            return Err(invalid("convergence_tol must be positive"));
        }
        if !(self.tail_tolerance > 0.0) {
            return Err(invalid("tail_tolerance must be positive"));
        }
        if !(0.0..1.0).contains(&self.discarded_weight) {
            return Err(invalid("discarded_weight must lie in [0, 1)"));
        }
        if self.workers == Some(0) {
            return Err(invalid("workers must be at least 1"));
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(invalid(format!("dt must be positive, got {}", self.dt)));
        }
        if !variant.is_static() {
            let omega0 = self.omega0.unwrap_or(sys.pump_frequency());
            crate::evolution::EvolutionConfig::default()
                .with_dt(self.dt)
                .validate_for_pump(omega0)?;
        }
        Ok(())
    }
}

fn row_selected(stride: usize, row: usize, rows: usize) -> bool {
    stride != 0 && (row % stride == 0 || row + 1 == rows)
}

/// Numerical checks behind one cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellCertificate {
    pub cutoff_used: usize,
    /// `None` for exact propagation.
    pub dt_used: Option<f64>,
    /// `[I₁, I₂, I₃, G]` drift against a `dt/2` rerun, when checked.
    pub step_drift: Option<[f64; 4]>,
    /// `[I₁, I₂, I₃, G]` drift of the last cutoff comparison, when checked.
    pub truncation_drift: Option<[f64; 4]>,
    pub converged: bool,
    pub failure: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub g0: f64,
    pub beta_omega_a: f64,
    pub max_i: [f64; MODE_COUNT],
    pub t_argmax_i: [f64; MODE_COUNT],
    pub max_g: f64,
    pub t_argmax_g: f64,
    pub certificate: CellCertificate,
}

/// Sampled moments and witnesses of one cell.
#[derive(Clone, Debug, PartialEq)]
pub struct CellSeries {
    pub g0: f64,
    pub beta_omega_a: f64,
    pub moments: Vec<MomentSet>,
    pub witnesses: Vec<WitnessReport>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub version: String,
    pub variant: Variant,
    pub grid: SweepGrid,
    pub settings: SweepSettings,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepResult {
    pub scenario: Scenario,
    pub variant: Variant,
    /// Row-major: `g0` slowest, then `βω_a`.
    pub cells: Vec<SweepCell>,
    /// Same order as `cells`; empty unless series were requested.
    pub series: Vec<CellSeries>,
    pub provenance: Provenance,
    pub warnings: Vec<String>,
}

impl SweepResult {
    pub fn cell(&self, g0_index: usize, beta_index: usize) -> &SweepCell {
        &self.cells[g0_index * self.provenance.grid.beta_values.len() + beta_index]
    }

    pub fn series_of(&self, g0_index: usize, beta_index: usize) -> Option<&CellSeries> {
        self.series
            .get(g0_index * self.provenance.grid.beta_values.len() + beta_index)
    }

    pub fn all_converged(&self) -> bool {
        self.cells.iter().all(|c| c.certificate.converged)
    }
}

fn thermal_spec(beta: f64, tail_tolerance: f64) -> Result<ThermalSpec> {
    let spec = if beta.is_infinite() {
        ThermalSpec::vacuum()
    } else {
        ThermalSpec::new(beta)?
    };
    Ok(spec.with_tail_tolerance(tail_tolerance))
}

/// Moment trajectories of every `β` in `betas` for one Hamiltonian. Basis
/// trajectories are shared between temperatures.
pub fn thermal_moment_row(
    hspec: &HamiltonianSpec,
    sys: &ModeSystem,
    betas: &[f64],
    times: &[f64],
    dt: f64,
    tail_tolerance: f64,
    discarded_weight: f64,
) -> Result<Vec<Vec<MomentSet>>> {
    let dynamics = Dynamics::new(hspec, sys)?;
    let ensembles: Vec<FockEnsemble> = betas
        .iter()
        .map(|&b| FockEnsemble::thermal(&thermal_spec(b, tail_tolerance)?, sys, discarded_weight))
        .collect::<Result<_>>()?;
    let union: Vec<usize> = ensembles
        .iter()
        .flat_map(|e| e.members().iter().map(|(levels, _)| sys.index(*levels)))
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let basis: Vec<Vec<MomentSet>> = union
        .par_iter()
        .map(|&idx| dynamics.fock_moments_with_dt(sys.levels(idx), times, dt))
        .collect::<Result<_>>()?;
    let mut slot = vec![usize::MAX; sys.dim()];
    for (k, &idx) in union.iter().enumerate() {
        slot[idx] = k;
    }
    Ok(ensembles
        .iter()
        .map(|e| {
            let refs: Vec<&[MomentSet]> = e
                .members()
                .iter()
                .map(|(levels, _)| basis[slot[sys.index(*levels)]].as_slice())
                .collect();
            let weights: Vec<f64> = e.members().iter().map(|m| m.1).collect();
            combine_moments(&refs, &weights)
        })
        .collect())
}

fn witness_rows(rows: &[Vec<MomentSet>]) -> Result<Vec<Vec<WitnessReport>>> {
    rows.iter()
        .map(|r| r.iter().map(WitnessReport::from_moments).collect())
        .collect()
}

/// Per-witness drift `|Δw| / max(1, |w_ref|)` of the values a cell reports:
/// every sample for series, otherwise the max over time.
fn cell_drift(a: &[WitnessReport], reference: &[WitnessReport], series: bool) -> [f64; 4] {
    std::array::from_fn(|k| {
        let pick = |w: &[WitnessReport]| -> Vec<f64> {
            let values = w.iter().map(|r| r.values()[k]);
            if series {
                values.collect()
            } else {
                vec![values.fold(f64::NEG_INFINITY, f64::max)]
            }
        };
        max_relative_change(&pick(a), &pick(reference))
    })
}

fn worst(drift: &[f64; 4]) -> f64 {
    drift.iter().copied().fold(0.0, f64::max)
}

/// First sample attaining the maximum.
fn max_with_time(times: &[f64], values: impl Iterator<Item = f64>) -> (f64, f64) {
    let mut best = (f64::NEG_INFINITY, f64::NAN);
    for (t, v) in times.iter().zip(values) {
        if v > best.0 {
            best = (v, *t);
        }
    }
    best
}

struct RowOutcome {
    cells: Vec<SweepCell>,
    series: Vec<CellSeries>,
}

struct Sweep<'a> {
    variant: Variant,
    grid: &'a SweepGrid,
    settings: &'a SweepSettings,
    times: Vec<f64>,
    keep_series: bool,
}

impl Sweep<'_> {
    fn moments(&self, g0: f64, cutoff: usize, dt: f64) -> Result<Vec<Vec<MomentSet>>> {
        let sys = self.settings.system()?.resized(cutoff)?;
        let hspec = self.settings.hamiltonian(self.variant, g0)?;
        thermal_moment_row(
            &hspec,
            &sys,
            &self.grid.beta_values,
            &self.times,
            dt,
            self.settings.tail_tolerance,
            self.settings.discarded_weight,
        )
    }

    fn drifts(&self, a: &[Vec<WitnessReport>], reference: &[Vec<WitnessReport>]) -> Vec<[f64; 4]> {
        a.iter()
            .zip(reference)
            .map(|(x, y)| cell_drift(x, y, self.keep_series))
            .collect()
    }

    fn row(&self, row: usize) -> Result<RowOutcome> {
        let s = self.settings;
        let rows = self.grid.g0_values.len();
        let cells_per_row = self.grid.beta_values.len();
        let g0 = self.grid.g0_values[row];
        let tol = s.convergence_tol;
        let driven = !self.variant.is_static();
        let mut cutoff_used = s.cutoff;
        let mut moments = self.moments(g0, s.cutoff, s.dt)?;
        let mut witnesses = witness_rows(&moments)?;
        let mut failures: Vec<Vec<String>> = vec![Vec::new(); cells_per_row];

        let mut step_drift = vec![None; cells_per_row];
        if driven && row_selected(s.step_check_stride, row, rows) {
            let fine = witness_rows(&self.moments(g0, s.cutoff, s.dt / 2.0)?)?;
            for (k, d) in self.drifts(&witnesses, &fine).into_iter().enumerate() {
                if worst(&d) > tol {
                    failures[k].push(format!("dt = {} drifts by {:.3e} against dt/2", s.dt, worst(&d)));
                }
                step_drift[k] = Some(d);
            }
        }

        let mut truncation_drift = vec![None; cells_per_row];
        if row_selected(s.truncation_check_stride, row, rows) {
            let up_moments = self.moments(g0, s.cutoff + 2, s.dt)?;
            let up = witness_rows(&up_moments)?;
            let mut drifts = self.drifts(&witnesses, &up);
            let passed = drifts.iter().all(|d| worst(d) < tol);
            if !passed && s.escalate_cutoff {
                let up2 = witness_rows(&self.moments(g0, s.cutoff + 4, s.dt)?)?;
                let drifts2 = self.drifts(&up, &up2);
                if drifts2.iter().all(|d| worst(d) < tol) {
                    cutoff_used = s.cutoff + 2;
                    moments = up_moments;
                    witnesses = up;
                }
                drifts = drifts2;
            }
            for (k, d) in drifts.into_iter().enumerate() {
                if worst(&d) >= tol {
                    failures[k].push(format!(
                        "cutoff {} drifts by {:.3e} against cutoff {}",
                        cutoff_used,
                        worst(&d),
                        cutoff_used + 2
                    ));
                }
                truncation_drift[k] = Some(d);
            }
        }

        let mut cells = Vec::with_capacity(cells_per_row);
        let mut series = Vec::new();
        for (k, ((&beta, m), w)) in self.grid.beta_values.iter().zip(moments).zip(witnesses).enumerate() {
            let max_i: [(f64, f64); MODE_COUNT] =
                std::array::from_fn(|i| max_with_time(&self.times, w.iter().map(|r| r.i[i])));
            let (max_g, t_argmax_g) = max_with_time(&self.times, w.iter().map(|r| r.g));
            let failure = &failures[k];
            cells.push(SweepCell {
                g0,
                beta_omega_a: beta,
                max_i: max_i.map(|x| x.0),
                t_argmax_i: max_i.map(|x| x.1),
                max_g,
                t_argmax_g,
                certificate: CellCertificate {
                    cutoff_used,
                    dt_used: driven.then_some(s.dt),
                    step_drift: step_drift[k],
                    truncation_drift: truncation_drift[k],
                    converged: failure.is_empty(),
                    failure: (!failure.is_empty()).then(|| failure.join("; ")),
                },
            });
            if self.keep_series {
                series.push(CellSeries {
                    g0,
                    beta_omega_a: beta,
                    moments: m,
                    witnesses: w,
                });
            }
        }
        Ok(RowOutcome { cells, series })
    }
}

/// Evaluates `variant` over the grid. Cells carry max-over-time witnesses and
/// certificates; time series are kept when `keep_series` is set.
pub fn run_grid(variant: Variant, grid: &SweepGrid, settings: &SweepSettings, keep_series: bool) -> Result<SweepResult> {
    let warnings = grid.validate()?;
    for w in &warnings {
        warn!("{w}");
    }
    settings.validate(variant)?;
    let sweep = Sweep {
        variant,
        grid,
        settings,
        times: grid.sample_times(),
        keep_series,
    };
    let run = || -> Result<Vec<RowOutcome>> {
        (0..grid.g0_values.len())
            .into_par_iter()
            .map(|row| sweep.row(row))
            .collect()
    };
    let rows = match settings.workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| invalid(format!("cannot start worker pool: {e}")))?
            .install(run)?,
        None => run()?,
    };
    let mut cells = Vec::new();
    let mut series = Vec::new();
    for r in rows {
        cells.extend(r.cells);
        series.extend(r.series);
    }
    Ok(SweepResult {
        scenario: grid.scenario,
        variant,
        cells,
        series,
        provenance: Provenance {
            version: VERSION.to_string(),
            variant,
            grid: grid.clone(),
            settings: settings.clone(),
        },
        warnings,
    })
}

/// Runs the grid's scenario with its preset Hamiltonian variant.
pub fn run_scenario(grid: &SweepGrid, settings: &SweepSettings) -> Result<SweepResult> {
    run_grid(grid.scenario.variant(), grid, settings, grid.scenario.is_landscape())
}

fn expect_scenario(grid: &SweepGrid, allowed: &[Scenario]) -> Result<()> {
    if allowed.contains(&grid.scenario) {
        Ok(())
    } else {
        Err(invalid(format!(
            "grid scenario {} does not match this runner",
            grid.scenario
        )))
    }
}

/// Max-over-time `I_i` under the full Hamiltonian.
pub fn run_fig1(grid: &SweepGrid, settings: &SweepSettings) -> Result<SweepResult> {
    expect_scenario(grid, &[Scenario::Fig1MaxI])?;
    run_scenario(grid, settings)
}

/// Max-over-time `G` under the full Hamiltonian.
pub fn run_fig2(grid: &SweepGrid, settings: &SweepSettings) -> Result<SweepResult> {
    expect_scenario(grid, &[Scenario::Fig2MaxG])?;
    run_scenario(grid, settings)
}

/// `G(t, g0)` under the trilinear Hamiltonian.
pub fn run_fig3(grid: &SweepGrid, settings: &SweepSettings) -> Result<SweepResult> {
    expect_scenario(grid, &[Scenario::Fig3Rwa])?;
    run_scenario(grid, settings)
}

/// `G(t, g0)` under the full Hamiltonian.
pub fn run_fig4(grid: &SweepGrid, settings: &SweepSettings) -> Result<SweepResult> {
    expect_scenario(grid, &[Scenario::Fig4Full])?;
    run_scenario(grid, settings)
}

/// Max-over-time witnesses under the double two-mode Hamiltonian.
pub fn run_double_spdc(grid: &SweepGrid, settings: &SweepSettings) -> Result<SweepResult> {
    expect_scenario(grid, &[Scenario::DoubleSpdc])?;
    run_scenario(grid, settings)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_grid(scenario: Scenario) -> SweepGrid {
        SweepGrid {
            scenario,
            g0_values: vec![0.02, 0.05],
            beta_values: vec![2.0, 2.7],
            t_max: 5.0,
            samples: 10,
        }
    }

    #[test]
    fn default_grids() {
        let g = SweepGrid::default_for(Scenario::Fig2MaxG);
        assert_eq!(g.g0_values.len(), 30);
        assert_eq!(g.beta_values.len(), 30);
        assert!((g.g0_values[0] - 0.001).abs() < 1e-15);
        assert_eq!(*g.g0_values.last().unwrap(), 0.1);
        assert_eq!(g.beta_values[0], 1.0);
        assert_eq!(*g.beta_values.last().unwrap(), 3.0);
        assert_eq!(g.t_max, 50.0);
        assert!(g.validate().unwrap().is_empty());
        assert_eq!(SweepGrid::default_for(Scenario::Fig3Rwa).beta_values, vec![2.7]);
    }

    #[test]
    fn grid_validation() {
        let mut g = small_grid(Scenario::Fig1MaxI);
        g.g0_values = vec![0.05, 0.02];
        assert!(g.validate().is_err());
        g.g0_values = vec![];
        assert!(g.validate().is_err());
        g.g0_values = vec![0.05, 0.2];
        g.beta_values = vec![0.5, 2.0];
        assert_eq!(g.validate().unwrap().len(), 2);
    }

    #[test]
    fn scenario_names_round_trip() {
        for sc in Scenario::ALL {
            assert_eq!(sc.name().parse::<Scenario>().unwrap(), sc);
        }
        assert_eq!("fig3-rwa".parse::<Scenario>().unwrap(), Scenario::Fig3Rwa);
        assert!("fig5".parse::<Scenario>().is_err());
        assert_eq!(Scenario::Fig1MaxI.variant(), Variant::FullInteraction);
        assert_eq!(Scenario::Fig3Rwa.variant(), Variant::RwaTrilinear);
    }

    #[test]
    fn runner_rejects_mismatched_scenario() {
        let grid = small_grid(Scenario::Fig3Rwa);
        assert!(run_fig1(&grid, &SweepSettings::default()).is_err());
    }

    #[test]
    fn rwa_landscape_is_certified_and_ordered() {
        let grid = small_grid(Scenario::Fig3Rwa);
        let settings = SweepSettings {
            cutoff: 6,
            ..SweepSettings::default()
        };
        let r = run_fig3(&grid, &settings).unwrap();
        assert_eq!(r.cells.len(), 4);
        assert_eq!(r.series.len(), 4);
        assert!(r.all_converged());
        assert_eq!(r.cell(1, 0).g0, 0.05);
        assert_eq!(r.cell(1, 0).beta_omega_a, 2.0);
        assert!(r.cell(0, 0).certificate.dt_used.is_none());
        let s = r.series_of(1, 1).unwrap();
        assert_eq!(s.moments.len(), 10);
        assert!((s.moments[9].time - 5.0).abs() < 1e-15);
    }

    #[test]
    fn serial_and_parallel_sweeps_agree_bitwise() {
        let grid = small_grid(Scenario::Fig2MaxG);
        let base = SweepSettings {
            cutoff: 4,
            tail_tolerance: 1e-2,
            step_check_stride: 0,
            truncation_check_stride: 0,
            ..SweepSettings::default()
        };
        let serial = run_fig2(&grid, &SweepSettings { workers: Some(1), ..base.clone() }).unwrap();
        let parallel = run_fig2(&grid, &SweepSettings { workers: Some(3), ..base }).unwrap();
        assert_eq!(serial.cells, parallel.cells);
    }

    #[test]
    fn vacuum_row_reduces_to_pure_evolution() {
        let sys = ModeSystem::with_cutoff(5).unwrap();
        let h = HamiltonianSpec::new(Variant::RwaTrilinear, 0.1).unwrap();
        let times = [0.5, 1.0];
        let rows = thermal_moment_row(&h, &sys, &[f64::INFINITY], &times, 0.01, 1e-8, 0.0).unwrap();
        let direct = Dynamics::new(&h, &sys).unwrap().fock_moments_with_dt([0, 0, 0], &times, 0.01).unwrap();
        assert_eq!(rows[0], direct);
    }
}
