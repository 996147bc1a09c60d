//! Fast oracle checks run by the `selftest` command.

use crate::error::Result;
use crate::evolution::{evolve_static, EvolutionConfig};
use crate::fock::{lowering_operator, max_abs, raising_operator, DensityMatrix, ModeSystem, C64};
use crate::model::{
    double_spdc_hamiltonian, rwa_hamiltonian, thermal_state, DrivenHamiltonian, HamiltonianSpec, ThermalSpec, Variant,
};
use crate::witness::{covariance, moments, WitnessReport};

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, passed: bool, detail: String) -> Check {
    Check { name, passed, detail }
}

fn commutator() -> Result<Check> {
    let d = 5;
    let a = lowering_operator(d)?;
    let ad = raising_operator(d)?;
    let c = a.commutator(&ad)?;
    let mut defect: f64 = 0.0;
    for i in 0..d {
        for j in 0..d {
            let expected = match (i == j, i + 1 == d) {
                (true, false) => 1.0,
                (true, true) => 1.0 - d as f64,
                _ => 0.0,
            };
            defect = defect.max((c.entry(i, j) - C64::new(expected, 0.0)).norm());
        }
    }
    Ok(check(
        "truncated commutator [a, a+] = diag(1, ..., 1, 1-d)",
        defect < 1e-14,
        format!("max defect {defect:.2e}"),
    ))
}

fn perturbative() -> Result<Check> {
    let sys = ModeSystem::with_cutoff(6)?;
    let g0 = 0.1;
    let h = rwa_hamiltonian(&HamiltonianSpec::new(Variant::RwaTrilinear, g0)?, &sys)?;
    let cfg = EvolutionConfig::with_times(0.2, vec![0.2])?;
    let traj = evolve_static(&h, &DensityMatrix::vacuum(&sys), &cfg)?;
    let m = moments(&traj.states[0], &sys)?;
    let w = WitnessReport::from_moments(&m)?;
    let eps = g0 * 0.2 / 2.0;
    let abc_err = (m.abc.norm() - eps).abs() / eps;
    let g_ref = eps - 3.0 * eps * eps;
    let g_err = (w.g - g_ref).abs() / g_ref;
    Ok(check(
        "vacuum under the trilinear Hamiltonian at g0 t = 0.02",
        abc_err < 0.01 && g_err < 0.05,
        format!("|<abc>| rel. error {abc_err:.2e}, G rel. error {g_err:.2e}"),
    ))
}

fn gaussian_null() -> Result<Check> {
    let sys = ModeSystem::with_cutoff(6)?;
    let h = double_spdc_hamiltonian(&HamiltonianSpec::new(Variant::DoubleSpdc, 0.1)?, &sys)?;
    let rho0 = thermal_state(&ThermalSpec::new(2.0)?.with_tail_tolerance(1e-3), &sys)?;
    let cfg = EvolutionConfig::uniform(10.0, 10)?;
    let traj = evolve_static(&h, &rho0, &cfg)?;
    let mut worst_abc: f64 = 0.0;
    let mut worst_g = f64::NEG_INFINITY;
    for s in &traj.states {
        let m = moments(s, &sys)?;
        worst_abc = worst_abc.max(m.abc.norm());
        worst_g = worst_g.max(WitnessReport::from_moments(&m)?.g);
    }
    Ok(check(
        "double two-mode Hamiltonian leaves <abc> = 0 and G <= 0",
        worst_abc < 1e-10 && worst_g < 1e-10,
        format!("max |<abc>| {worst_abc:.2e}, max G {worst_g:.3e}"),
    ))
}

fn covariance_diagonal() -> Result<Check> {
    let sys = ModeSystem::with_cutoff(6)?;
    let h = rwa_hamiltonian(&HamiltonianSpec::new(Variant::RwaTrilinear, 0.1)?, &sys)?;
    let cfg = EvolutionConfig::with_times(10.0, vec![10.0])?;
    let traj = evolve_static(&h, &DensityMatrix::vacuum(&sys), &cfg)?;
    let off = covariance(&traj.states[0], &sys)?.max_off_diagonal();
    Ok(check(
        "trilinear evolution keeps the covariance matrix diagonal",
        off < 1e-10,
        format!("max off-diagonal {off:.2e}"),
    ))
}

fn selection_rule() -> Result<Check> {
    let sys = ModeSystem::with_cutoff(4)?;
    let h = rwa_hamiltonian(&HamiltonianSpec::new(Variant::RwaTrilinear, 0.3)?, &sys)?;
    let rho0 = thermal_state(&ThermalSpec::new(1.0)?.with_tail_tolerance(0.1), &sys)?;
    let cfg = EvolutionConfig::with_times(3.0, vec![3.0])?;
    let traj = evolve_static(&h, &rho0, &cfg)?;
    let rho = traj.states[0].matrix();
    let mut stray: f64 = 0.0;
    for i in 0..sys.dim() {
        for j in 0..sys.dim() {
            let (m, n) = (sys.levels(i), sys.levels(j));
            let diff: Vec<i64> = (0..3).map(|k| m[k] as i64 - n[k] as i64).collect();
            if !(diff[0] == diff[1] && diff[1] == diff[2]) {
                stray = stray.max(rho[(i, j)].norm());
            }
        }
    }
    Ok(check(
        "coherences only between levels differing by multiples of (1,1,1)",
        stray == 0.0,
        format!("largest forbidden coherence {stray:.2e}"),
    ))
}

fn secular_limit() -> Result<Check> {
    let sys = ModeSystem::new([1.0, 2.0, 3.0], [0.3, -0.2, 0.5], 4)?;
    let hspec = HamiltonianSpec::new(Variant::FullInteraction, 0.07)?;
    let secular = DrivenHamiltonian::new(&hspec, &sys)?.secular_average();
    let rwa = rwa_hamiltonian(&HamiltonianSpec::new(Variant::RwaTrilinear, 0.07)?, &sys)?;
    let defect = max_abs(&(secular.matrix() - rwa.matrix()));
    Ok(check(
        "secular part of the full Hamiltonian is the trilinear Hamiltonian",
        defect < 1e-14,
        format!("max defect {defect:.2e}"),
    ))
}

/// Runs every check; errors are reported as failures.
pub fn run_all() -> Vec<Check> {
    let checks: [(&'static str, fn() -> Result<Check>); 6] = [
        ("commutator", commutator),
        ("perturbative", perturbative),
        ("gaussian-null", gaussian_null),
        ("covariance", covariance_diagonal),
        ("selection-rule", selection_rule),
        ("secular-limit", secular_limit),
    ];
    checks
        .into_iter()
        .map(|(name, f)| f().unwrap_or_else(|e| check(name, false, format!("error: {e}"))))
        .collect()
}

#[cfg(test)]
mod tests {
    #[test]
    fn all_checks_pass() {
        for c in super::run_all() {
            assert!(c.passed, "{}: {}", c.name, c.detail);
        }
    }
}
