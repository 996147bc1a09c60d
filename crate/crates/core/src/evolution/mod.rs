//! Unitary propagation of states under the static and driven Hamiltonians.
//!
//! Two routes are provided. The dense route carries a full density matrix and
//! is used for small cutoffs and cross-checks. The ensemble route decomposes a
//! Fock-diagonal initial state into basis states, evolves each as a vector and
//! averages their moments; moments are linear in the state, so both routes
//! agree up to the discarded ensemble weight.

mod blocks;
mod driven;

use rayon::prelude::*;

pub use blocks::{connected_components, BlockSpectrum};
pub use driven::DrivenStateEvolver;

use crate::error::{invalid, Error, Result};
use crate::fock::{max_abs, CMatrix, DensityMatrix, ModeSystem, OperatorMatrix, Spectrum, C64, MODE_COUNT};
use crate::model::{static_hamiltonian, DriveParameters, DrivenHamiltonian, HamiltonianSpec, ThermalSpec, Variant};
use crate::witness::{MomentSet, WitnessReport};

pub const DEFAULT_T_MAX: f64 = 50.0;
pub const DEFAULT_SAMPLES: usize = 200;
pub const DEFAULT_DT: f64 = 0.002;
pub const DEFAULT_CONVERGENCE_TOL: f64 = 1e-3;
/// Ensemble members are dropped once the retained weight exceeds `1 − this`.
pub const DEFAULT_DISCARDED_WEIGHT: f64 = 1e-6;
pub const TRACE_DRIFT_TOL: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq)]
pub struct EvolutionConfig {
    pub t_max: f64,
    pub sample_times: Vec<f64>,
    pub dt: f64,
    pub convergence_tol: f64,
}

impl Default for EvolutionConfig {
    fn default() -> Self {
        Self::uniform(DEFAULT_T_MAX, DEFAULT_SAMPLES).expect("default sampling is valid")
    }
}

impl EvolutionConfig {
    /// `samples` uniform times over `(0, t_max]`.
    pub fn uniform(t_max: f64, samples: usize) -> Result<Self> {
        if !(t_max.is_finite() && t_max > 0.0) || samples == 0 {
            return Err(invalid(format!(
                "need t_max > 0 and at least one sample, got t_max = {t_max}, samples = {samples}"
            )));
        }
        let sample_times = (1..=samples)
            .map(|k| t_max * k as f64 / samples as f64)
            .collect();
        Ok(Self {
            t_max,
            sample_times,
            dt: DEFAULT_DT,
            convergence_tol: DEFAULT_CONVERGENCE_TOL,
        })
    }

    pub fn with_times(t_max: f64, sample_times: Vec<f64>) -> Result<Self> {
        let cfg = Self {
            t_max,
            sample_times,
            dt: DEFAULT_DT,
            convergence_tol: DEFAULT_CONVERGENCE_TOL,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_dt(mut self, dt: f64) -> Self {
        self.dt = dt;
        self
    }

    pub fn with_tolerance(mut self, tol: f64) -> Self {
        self.convergence_tol = tol;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(invalid(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.convergence_tol > 0.0) {
            return Err(invalid("convergence tolerance must be positive"));
        }
        if self.sample_times.is_empty() {
            return Err(invalid("no sample times"));
        }
        if self.sample_times.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(invalid("sample times must be strictly increasing"));
        }
        let first = self.sample_times[0];
        let last = *self.sample_times.last().unwrap();
        if first < 0.0 || last > self.t_max * (1.0 + 1e-12) {
            return Err(invalid(format!(
                "sample times must lie in [0, {}], got [{first}, {last}]",
                self.t_max
            )));
        }
        Ok(())
    }

    /// Largest step resolving the fastest phase `ω_fast = 2ω0` with 20 points per period.
    pub fn max_dt(omega0: f64) -> f64 {
        if omega0 == 0.0 {
            f64::INFINITY
        } else {
            std::f64::consts::PI / omega0.abs() / 20.0
        }
    }

    pub fn validate_for_pump(&self, omega0: f64) -> Result<()> {
        self.validate()?;
        let bound = Self::max_dt(omega0);
        if self.dt > bound {
            return Err(invalid(format!(
                "dt = {} exceeds {bound:.4} (20 steps per period of the fastest phase)",
                self.dt
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceCertificate {
    pub cutoff_used: usize,
    /// `None` for exact (eigendecomposition) propagation.
    pub dt_used: Option<f64>,
    pub max_relative_drift: f64,
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<DensityMatrix>,
    pub certificate: ConvergenceCertificate,
}

impl Trajectory {
    fn new(times: Vec<f64>, states: Vec<DensityMatrix>, certificate: ConvergenceCertificate) -> Result<Self> {
        for (t, s) in times.iter().zip(&states) {
            let drift = (s.trace() - C64::new(1.0, 0.0)).norm();
            if drift > TRACE_DRIFT_TOL {
                return Err(Error::InvalidState(format!(
                    "trace drifted by {drift:.3e} at t = {t}"
                )));
            }
        }
        Ok(Self {
            times,
            states,
            certificate,
        })
    }
}

/// Moments sampled along a trajectory.
#[derive(Clone, Debug, PartialEq)]
pub struct MomentTrajectory {
    pub moments: Vec<MomentSet>,
    pub certificate: Option<ConvergenceCertificate>,
}

impl MomentTrajectory {
    pub fn times(&self) -> Vec<f64> {
        self.moments.iter().map(|m| m.time).collect()
    }

    pub fn witnesses(&self) -> Result<Vec<WitnessReport>> {
        self.moments.iter().map(WitnessReport::from_moments).collect()
    }
}

fn cutoff_of(dims: &[usize]) -> usize {
    dims.first().copied().unwrap_or(0)
}

/// `ρ(t) = e^{−iHt}ρ₀e^{iHt}` at each sample time, mapped through `observe`.
/// One block eigendecomposition of `H` serves every sample.
pub fn evolve_static_map<R>(
    h: &OperatorMatrix,
    rho0: &DensityMatrix,
    cfg: &EvolutionConfig,
    mut observe: impl FnMut(f64, &DensityMatrix) -> Result<R>,
) -> Result<Vec<R>> {
    if !h.is_hermitian() {
        return Err(invalid("static evolution requires a Hermitian Hamiltonian"));
    }
    if h.dim() != rho0.dim() {
        return Err(invalid("Hamiltonian and state dimensions differ"));
    }
    cfg.validate()?;
    let spectrum = BlockSpectrum::new(h.matrix());
    let propagator = blocks::StaticPropagator::new(&spectrum, rho0.matrix());
    cfg.sample_times
        .iter()
        .map(|&t| {
            let rho = DensityMatrix::from_matrix_unchecked(propagator.state_at(t));
            observe(t, &rho)
        })
        .collect()
}

pub fn evolve_static(h: &OperatorMatrix, rho0: &DensityMatrix, cfg: &EvolutionConfig) -> Result<Trajectory> {
    let states = evolve_static_map(h, rho0, cfg, |_, rho| Ok(rho.clone()))?;
    Trajectory::new(
        cfg.sample_times.clone(),
        states,
        ConvergenceCertificate {
            cutoff_used: cutoff_of(h.dims()),
            dt_used: None,
            max_relative_drift: 0.0,
        },
    )
}

/// Dense midpoint-exponential propagation of a density matrix.
pub struct DenseDrivenPropagator {
    hamiltonian: DrivenHamiltonian,
    blocks: Vec<Vec<usize>>,
}

impl DenseDrivenPropagator {
    pub fn new(hspec: &HamiltonianSpec, sys: &ModeSystem) -> Result<Self> {
        let hamiltonian = DrivenHamiltonian::new(hspec, sys)?;
        let blocks = connected_components(&hamiltonian.pattern());
        Ok(Self { hamiltonian, blocks })
    }

    pub fn hamiltonian(&self) -> &DrivenHamiltonian {
        &self.hamiltonian
    }

    /// Block-diagonal step operator `exp(−i H(t_mid) h)`.
    pub fn step_operator(&self, t_mid: f64, h: f64) -> Vec<CMatrix> {
        let hm = self.hamiltonian.at(t_mid);
        self.blocks
            .iter()
            .map(|idx| Spectrum::of_hermitian(blocks::submatrix(hm.matrix(), idx, idx)).propagator(h))
            .collect()
    }

    fn apply_step(&self, rho: &mut CMatrix, us: &[CMatrix]) {
        for (bi, ii) in self.blocks.iter().enumerate() {
            for (bj, jj) in self.blocks.iter().enumerate() {
                let sub = blocks::submatrix(rho, ii, jj);
                if sub.iter().all(|z| *z == C64::new(0.0, 0.0)) {
                    continue;
                }
                let next = &us[bi] * sub * us[bj].adjoint();
                blocks::scatter(rho, &next, ii, jj);
            }
        }
    }

    /// Propagates `rho` from `t0` to `t1` with equal steps no longer than `dt`.
    /// A backward interval retraces the forward grid, undoing it exactly.
    pub fn propagate(&self, rho: &mut CMatrix, t0: f64, t1: f64, dt: f64) {
        let span = t1 - t0;
        if span == 0.0 {
            return;
        }
        let steps = ((span.abs() / dt) - 1e-9).ceil().max(1.0) as usize;
        let h = span / steps as f64;
        for j in 0..steps {
            let us = self.step_operator(t0 + (j as f64 + 0.5) * h, h);
            debug_assert!(us.iter().all(|u| crate::fock::unitarity_defect(u) < 1e-9));
            self.apply_step(rho, &us);
        }
    }

    fn run(&self, rho0: &DensityMatrix, times: &[f64], dt: f64) -> Vec<DensityMatrix> {
        let mut rho = rho0.matrix().clone();
        let mut t = 0.0;
        times
            .iter()
            .map(|&tau| {
                self.propagate(&mut rho, t, tau, dt);
                t = tau;
                DensityMatrix::from_matrix_unchecked(rho.clone())
            })
            .collect()
    }
}

/// Relative max-norm distance between two matrices.
fn relative_drift(a: &CMatrix, b: &CMatrix) -> f64 {
    max_abs(&(a - b)) / max_abs(b).max(f64::MIN_POSITIVE)
}

/// Dense density-matrix evolution under the full interaction-picture
/// Hamiltonian. The run is repeated at `dt/2`; the final states must agree
/// within `convergence_tol`.
pub fn evolve_timedep(
    hspec: &HamiltonianSpec,
    sys: &ModeSystem,
    rho0: &DensityMatrix,
    cfg: &EvolutionConfig,
) -> Result<Trajectory> {
    if rho0.dim() != sys.dim() {
        return Err(invalid("state dimension does not match the system"));
    }
    cfg.validate_for_pump(hspec.pump_frequency(sys))?;
    let propagator = DenseDrivenPropagator::new(hspec, sys)?;
    let coarse = propagator.run(rho0, &cfg.sample_times, cfg.dt);
    let fine_final = propagator
        .run(rho0, &cfg.sample_times, cfg.dt / 2.0)
        .pop()
        .expect("at least one sample");
    let coarse_final = coarse.last().expect("at least one sample");
    let drift = relative_drift(coarse_final.matrix(), fine_final.matrix());
    if drift > cfg.convergence_tol {
        return Err(Error::StepConvergence {
            dt: cfg.dt,
            drift,
            tolerance: cfg.convergence_tol,
            coarse: Box::new(coarse_final.clone()),
            fine: Box::new(fine_final),
        });
    }
    Trajectory::new(
        cfg.sample_times.clone(),
        coarse,
        ConvergenceCertificate {
            cutoff_used: sys.cutoff(),
            dt_used: Some(cfg.dt),
            max_relative_drift: drift,
        },
    )
}

/// Fock basis states and weights of a Fock-diagonal initial state.
#[derive(Clone, Debug, PartialEq)]
pub struct FockEnsemble {
    members: Vec<([usize; MODE_COUNT], f64)>,
}

impl FockEnsemble {
    /// Dominant members of a thermal state, heaviest first, until the retained
    /// weight exceeds `1 − discarded`. Weights are not renormalised.
    pub fn thermal(spec: &ThermalSpec, sys: &ModeSystem, discarded: f64) -> Result<Self> {
        let populations = spec.populations(sys)?;
        let mut ranked: Vec<(usize, f64)> = populations.into_iter().enumerate().collect();
        ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        let mut members = Vec::new();
        let mut retained = 0.0;
        for (idx, w) in ranked {
            if retained > 1.0 - discarded || w == 0.0 {
                break;
            }
            retained += w;
            members.push((sys.levels(idx), w));
        }
        Ok(Self { members })
    }

    pub fn from_members(members: Vec<([usize; MODE_COUNT], f64)>) -> Self {
        Self { members }
    }

    pub fn members(&self) -> &[([usize; MODE_COUNT], f64)] {
        &self.members
    }

    pub fn retained_weight(&self) -> f64 {
        self.members.iter().map(|m| m.1).sum()
    }

    /// Weight of `levels`, zero if absent.
    pub fn weight_of(&self, levels: [usize; MODE_COUNT]) -> f64 {
        self.members
            .iter()
            .find(|m| m.0 == levels)
            .map_or(0.0, |m| m.1)
    }
}

/// Generator of per-basis-state moment trajectories for one Hamiltonian.
pub enum Dynamics {
    Static {
        sys: ModeSystem,
        spectrum: BlockSpectrum,
    },
    Driven(DrivenStateEvolver),
}

impl Dynamics {
    pub fn new(hspec: &HamiltonianSpec, sys: &ModeSystem) -> Result<Self> {
        match hspec.variant {
            Variant::FullInteraction => Ok(Dynamics::Driven(DrivenStateEvolver::new(
                DriveParameters::new(hspec, sys)?,
                sys,
            ))),
            Variant::RwaTrilinear | Variant::DoubleSpdc => {
                let h = static_hamiltonian(hspec, sys)?;
                Ok(Dynamics::Static {
                    sys: sys.clone(),
                    spectrum: BlockSpectrum::new(h.matrix()),
                })
            }
        }
    }

    pub fn system(&self) -> &ModeSystem {
        match self {
            Dynamics::Static { sys, .. } => sys,
            Dynamics::Driven(d) => d.system(),
        }
    }

    /// Step used by this generator; `None` when propagation is exact.
    pub fn step(&self, cfg: &EvolutionConfig) -> Option<f64> {
        match self {
            Dynamics::Static { .. } => None,
            Dynamics::Driven(_) => Some(cfg.dt),
        }
    }

    pub fn fock_moments(&self, levels: [usize; MODE_COUNT], cfg: &EvolutionConfig) -> Result<Vec<MomentSet>> {
        self.fock_moments_with_dt(levels, &cfg.sample_times, cfg.dt)
    }

    pub fn fock_moments_with_dt(&self, levels: [usize; MODE_COUNT], times: &[f64], dt: f64) -> Result<Vec<MomentSet>> {
        match self {
            Dynamics::Driven(d) => d.fock_moments(levels, times, dt),
            Dynamics::Static { sys, spectrum } => {
                if levels.iter().any(|&n| n >= sys.cutoff()) {
                    return Err(invalid(format!("levels {levels:?} exceed the cutoff")));
                }
                let start = sys.index(levels);
                let mut psi = vec![C64::new(0.0, 0.0); sys.dim()];
                Ok(times
                    .iter()
                    .map(|&t| {
                        let amps = spectrum.evolve_basis_state(start, t);
                        for (i, a) in &amps {
                            psi[*i] = *a;
                        }
                        let m = crate::witness::pure_moments(&psi, sys, t);
                        for (i, _) in &amps {
                            psi[*i] = C64::new(0.0, 0.0);
                        }
                        m
                    })
                    .collect())
            }
        }
    }
}

/// Weighted sum of per-member moment trajectories.
pub fn combine_moments(basis: &[&[MomentSet]], weights: &[f64]) -> Vec<MomentSet> {
    let Some(first) = basis.first() else {
        return Vec::new();
    };
    let mut out: Vec<MomentSet> = first.iter().map(|m| MomentSet::zero(m.time)).collect();
    for (traj, w) in basis.iter().zip(weights) {
        for (acc, m) in out.iter_mut().zip(traj.iter()) {
            acc.add_weighted(*w, m);
        }
    }
    out
}

/// Moments of an evolved Fock-diagonal ensemble, members evolved in parallel.
pub fn evolve_ensemble(dynamics: &Dynamics, ensemble: &FockEnsemble, cfg: &EvolutionConfig) -> Result<MomentTrajectory> {
    cfg.validate()?;
    let per_member: Vec<Vec<MomentSet>> = ensemble
        .members()
        .par_iter()
        .map(|(levels, _)| dynamics.fock_moments(*levels, cfg))
        .collect::<Result<_>>()?;
    let refs: Vec<&[MomentSet]> = per_member.iter().map(|v| v.as_slice()).collect();
    let weights: Vec<f64> = ensemble.members().iter().map(|m| m.1).collect();
    Ok(MomentTrajectory {
        moments: combine_moments(&refs, &weights),
        certificate: Some(ConvergenceCertificate {
            cutoff_used: dynamics.system().cutoff(),
            dt_used: dynamics.step(cfg),
            max_relative_drift: 0.0,
        }),
    })
}

/// Outcome of a truncation check.
#[derive(Clone, Debug, PartialEq)]
pub struct TruncationCertificate {
    pub base_cutoff: usize,
    /// Cutoff whose values were confirmed by the next-larger cutoff.
    pub cutoff_used: usize,
    pub max_relative_drift: f64,
    pub values: Vec<f64>,
}

/// Largest `|a − b| / max(1, |b|)` over paired values.
pub fn max_relative_change(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs() / y.abs().max(1.0))
        .fold(0.0, f64::max)
}

/// Reruns `run` at `cutoff + 2` and certifies when every value changes by
/// less than `tol·max(1, |value|)`; otherwise escalates once more to
/// `cutoff + 4` before failing.
pub fn certify_truncation<F>(sys: &ModeSystem, tol: f64, run: F) -> Result<TruncationCertificate>
where
    F: Fn(&ModeSystem) -> Result<Vec<f64>>,
{
    let base = sys.cutoff();
    let mut coarse = run(sys)?;
    let mut cutoff = base;
    let mut drift = f64::INFINITY;
    for _ in 0..2 {
        let next = sys.resized(cutoff + 2)?;
        let fine = run(&next)?;
        if fine.len() != coarse.len() {
            return Err(invalid("truncation check produced value sets of different length"));
        }
        drift = max_relative_change(&coarse, &fine);
        if drift < tol {
            return Ok(TruncationCertificate {
                base_cutoff: base,
                cutoff_used: cutoff,
                max_relative_drift: drift,
                values: coarse,
            });
        }
        cutoff += 2;
        if cutoff == base + 4 {
            return Err(Error::Truncation {
                cutoff: cutoff,
                drift,
                coarse,
                fine,
            });
        }
        coarse = fine;
    }
    unreachable!("loop returns within two escalations (last drift {drift})")
}

/// Flattens witness reports into `[I₁, I₂, I₃, G, …]`.
pub fn witness_values(reports: &[WitnessReport]) -> Vec<f64> {
    reports.iter().flat_map(|r| r.values()).collect()
}

/// Error ratio `e(dt)/e(dt/2)` of the midpoint rule for one basis state,
/// measured against a reference run at `dt/8`. Second order gives ≈ 4.
pub fn midpoint_order_ratio(
    evolver: &DrivenStateEvolver,
    levels: [usize; MODE_COUNT],
    t: f64,
    dt: f64,
) -> Result<f64> {
    let sys = evolver.system();
    let mut psi0 = crate::fock::CVector::zeros(sys.dim());
    psi0[sys.index(levels)] = C64::new(1.0, 0.0);
    let reference = evolver.propagate(&psi0, 0.0, t, dt / 8.0)?;
    let coarse = evolver.propagate(&psi0, 0.0, t, dt)?;
    let half = evolver.propagate(&psi0, 0.0, t, dt / 2.0)?;
    Ok((coarse - &reference).norm() / (half - &reference).norm())
}
