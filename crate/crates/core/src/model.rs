//! Thermal initial states and the trilinear, full interaction-picture and
//! double two-mode Hamiltonians.
//!
//! Phase convention: the full Hamiltonian uses per-mode phases
//! `φ = sys.phases` with `hspec.theta` added onto mode `a`, so its secular
//! part is always the trilinear Hamiltonian with `θ = hspec.theta + Σ φ_i`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::fock::{
    CMatrix, DensityMatrix, ModeSystem, OperatorMatrix, Shift, C64, MODE_COUNT,
    MODE_NAMES,
};

pub const DEFAULT_TAIL_TOLERANCE: f64 = 1e-8;

/// Bose–Einstein occupation `1/(e^{βω} − 1)`.
pub fn thermal_occupation(beta_omega: f64) -> Result<f64> {
    if beta_omega.is_nan() || beta_omega <= 0.0 {
        return Err(invalid(format!(
            "beta*omega must be positive, got {beta_omega}"
        )));
    }
    Ok(1.0 / beta_omega.exp_m1())
}

/// Inverse temperature in units of `ω_a`, plus the admissible truncated tail.
#[derive(Clone, Debug, PartialEq)]
pub struct ThermalSpec {
    pub beta_omega_a: f64,
    pub tail_tolerance: f64,
}

impl ThermalSpec {
    pub fn new(beta_omega_a: f64) -> Result<Self> {
        thermal_occupation(beta_omega_a)?;
        Ok(Self {
            beta_omega_a,
            tail_tolerance: DEFAULT_TAIL_TOLERANCE,
        })
    }

    pub fn vacuum() -> Self {
        Self {
            beta_omega_a: f64::INFINITY,
            tail_tolerance: DEFAULT_TAIL_TOLERANCE,
        }
    }

    pub fn with_tail_tolerance(mut self, tolerance: f64) -> Self {
        self.tail_tolerance = tolerance;
        self
    }

    pub fn occupations(&self, sys: &ModeSystem) -> [f64; MODE_COUNT] {
        let w = sys.frequencies();
        std::array::from_fn(|i| 1.0 / (self.beta_omega_a * w[i]).exp_m1())
    }

    /// Truncated, renormalised geometric distribution of one mode.
    pub fn mode_distribution(&self, sys: &ModeSystem, mode: usize) -> Result<Vec<f64>> {
        let d = sys.cutoff();
        let q = (-self.beta_omega_a * sys.frequencies()[mode]).exp();
        let tail = q.powi(d as i32);
        if tail > self.tail_tolerance {
            return Err(Error::CutoffTooSmall {
                mode: MODE_NAMES[mode],
                cutoff: d,
                tail,
                tolerance: self.tail_tolerance,
            });
        }
        let norm = (1.0 - q) / (1.0 - tail);
        Ok((0..d).map(|n| norm * q.powi(n as i32)).collect())
    }

    /// Product-state Fock populations `p(n_a, n_b, n_c)` in basis order.
    pub fn populations(&self, sys: &ModeSystem) -> Result<Vec<f64>> {
        let dists = [
            self.mode_distribution(sys, 0)?,
            self.mode_distribution(sys, 1)?,
            self.mode_distribution(sys, 2)?,
        ];
        Ok((0..sys.dim())
            .map(|i| {
                let n = sys.levels(i);
                dists[0][n[0]] * dists[1][n[1]] * dists[2][n[2]]
            })
            .collect())
    }
}

pub fn thermal_state(spec: &ThermalSpec, sys: &ModeSystem) -> Result<DensityMatrix> {
    DensityMatrix::from_diagonal(&spec.populations(sys)?)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    RwaTrilinear,
    FullInteraction,
    DoubleSpdc,
}

impl Variant {
    pub fn is_static(self) -> bool {
        !matches!(self, Variant::FullInteraction)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct HamiltonianSpec {
    pub variant: Variant,
    pub g0: f64,
    pub theta: f64,
    pub omega0: Option<f64>,
}

impl HamiltonianSpec {
    pub fn new(variant: Variant, g0: f64) -> Result<Self> {
        if !(g0.is_finite() && g0 >= 0.0) {
            return Err(invalid(format!("coupling g0 must be finite and >= 0, got {g0}")));
        }
        Ok(Self {
            variant,
            g0,
            theta: 0.0,
            omega0: None,
        })
    }

    pub fn with_theta(mut self, theta: f64) -> Self {
        self.theta = theta;
        self
    }

    pub fn with_pump_frequency(mut self, omega0: f64) -> Self {
        self.omega0 = Some(omega0);
        self
    }

    pub fn pump_frequency(&self, sys: &ModeSystem) -> f64 {
        self.omega0.unwrap_or_else(|| sys.pump_frequency())
    }

    /// Per-mode phases seen by the full Hamiltonian.
    pub fn mode_phases(&self, sys: &ModeSystem) -> [f64; MODE_COUNT] {
        let mut phases = sys.phases();
        phases[0] += self.theta;
        phases
    }

    /// Total phase of the trilinear Hamiltonian.
    pub fn total_phase(&self, sys: &ModeSystem) -> f64 {
        self.mode_phases(sys).iter().sum()
    }

    fn require(&self, variant: Variant) -> Result<()> {
        if self.variant != variant {
            return Err(invalid(format!(
                "expected a {variant:?} Hamiltonian, got {:?}",
                self.variant
            )));
        }
        Ok(())
    }
}

/// One Hamiltonian term with a definite photon-number shift; `operator`
/// includes its coefficient.
#[derive(Clone, Debug)]
pub struct Term {
    pub shift: [i32; MODE_COUNT],
    pub operator: OperatorMatrix,
}

fn sum_terms(terms: &[Term], sys: &ModeSystem) -> OperatorMatrix {
    let dim = sys.dim();
    let mut m = CMatrix::zeros(dim, dim);
    let mut shift: Option<Shift> = None;
    for t in terms {
        m += t.operator.matrix();
        shift = Some(match shift {
            None => t.operator.shift().clone(),
            Some(s) => s.merge(t.operator.shift()),
        });
    }
    OperatorMatrix::from_parts(
        m,
        vec![sys.cutoff(); MODE_COUNT],
        shift.unwrap_or(Shift::zero(MODE_COUNT)),
    )
}

/// Ladder monomial `Π_i op_i` built directly in the Fock basis; `signs[i]`
/// is `+1` for `a_i†`, `−1` for `a_i`, `0` for the identity.
pub fn ladder_monomial(sys: &ModeSystem, signs: [i32; MODE_COUNT]) -> OperatorMatrix {
    let dim = sys.dim();
    let mut m = CMatrix::zeros(dim, dim);
    for col in 0..dim {
        let levels = sys.levels(col);
        if let Some(row) = sys.shifted_index(levels, signs) {
            let coeff: f64 = (0..MODE_COUNT)
                .map(|i| match signs[i] {
                    1 => (levels[i] + 1) as f64,
                    -1 => levels[i] as f64,
                    _ => 1.0,
                })
                .product::<f64>()
                .sqrt();
            m[(row, col)] = C64::new(coeff, 0.0);
        }
    }
    OperatorMatrix::from_parts(m, vec![sys.cutoff(); MODE_COUNT], Shift::exact(signs.to_vec()))
}

/// `(g0/2)e^{iθ} abc` and its conjugate.
pub fn rwa_terms(hspec: &HamiltonianSpec, sys: &ModeSystem) -> Result<Vec<Term>> {
    hspec.require(Variant::RwaTrilinear)?;
    let theta = hspec.total_phase(sys);
    let half = 0.5 * hspec.g0;
    let abc = ladder_monomial(sys, [-1, -1, -1]);
    let adag = abc.adjoint();
    Ok(vec![
        Term {
            shift: [-1, -1, -1],
            operator: abc.scaled(C64::from_polar(half, theta)),
        },
        Term {
            shift: [1, 1, 1],
            operator: adag.scaled(C64::from_polar(half, -theta)),
        },
    ])
}

/// `H = (g0/2)(e^{iθ} abc + e^{−iθ} a†b†c†)`.
pub fn rwa_hamiltonian(hspec: &HamiltonianSpec, sys: &ModeSystem) -> Result<OperatorMatrix> {
    Ok(sum_terms(&rwa_terms(hspec, sys)?, sys))
}

/// `(g0/2)` times each of `ab, ac, a†b†, a†c†`.
pub fn double_spdc_terms(hspec: &HamiltonianSpec, sys: &ModeSystem) -> Result<Vec<Term>> {
    hspec.require(Variant::DoubleSpdc)?;
    let half = C64::new(0.5 * hspec.g0, 0.0);
    let mut terms = Vec::with_capacity(4);
    for partner in [1usize, 2] {
        let mut signs = [0; MODE_COUNT];
        signs[0] = -1;
        signs[partner] = -1;
        let lower = ladder_monomial(sys, signs).scaled(half);
        let raise = lower.adjoint();
        terms.push(Term {
            shift: signs,
            operator: lower,
        });
        terms.push(Term {
            shift: signs.map(|s| -s),
            operator: raise,
        });
    }
    Ok(terms)
}

/// `H = (g0/2)(ab + ac + a†b† + a†c†)`.
pub fn double_spdc_hamiltonian(hspec: &HamiltonianSpec, sys: &ModeSystem) -> Result<OperatorMatrix> {
    Ok(sum_terms(&double_spdc_terms(hspec, sys)?, sys))
}

/// All eight sign patterns `s ∈ {±1}³`; `+1` selects `a_i†`.
pub const TRILINEAR_SIGNS: [[i32; MODE_COUNT]; 8] = [
    [-1, -1, -1],
    [-1, -1, 1],
    [-1, 1, -1],
    [-1, 1, 1],
    [1, -1, -1],
    [1, -1, 1],
    [1, 1, -1],
    [1, 1, 1],
];

/// Coefficients of the interaction-picture Hamiltonian
/// `H(t) = g0 cos(ω0 t) Π_i (e^{iφ_i} a_i e^{−iω_i t} + e^{−iφ_i} a_i† e^{iω_i t})`
/// on its eight ladder products.
#[derive(Clone, Debug, PartialEq)]
pub struct DriveParameters {
    pub g0: f64,
    pub omega0: f64,
    pub frequencies: [f64; MODE_COUNT],
    pub phases: [f64; MODE_COUNT],
}

impl DriveParameters {
    pub fn new(hspec: &HamiltonianSpec, sys: &ModeSystem) -> Result<Self> {
        hspec.require(Variant::FullInteraction)?;
        Ok(Self {
            g0: hspec.g0,
            omega0: hspec.pump_frequency(sys),
            frequencies: sys.frequencies(),
            phases: hspec.mode_phases(sys),
        })
    }

    /// Net rotation frequency `s·ω` of the ladder product with signs `s`.
    pub fn detuning(&self, signs: [i32; MODE_COUNT]) -> f64 {
        (0..MODE_COUNT).map(|i| signs[i] as f64 * self.frequencies[i]).sum()
    }

    /// Coefficient of the ladder product with signs `s` at time `t`.
    pub fn coefficient(&self, signs: [i32; MODE_COUNT], t: f64) -> C64 {
        let phase: f64 = (0..MODE_COUNT)
            .map(|i| signs[i] as f64 * (self.frequencies[i] * t - self.phases[i]))
            .sum();
        C64::from_polar(self.g0 * (self.omega0 * t).cos(), phase)
    }

    /// All eight coefficients in [`TRILINEAR_SIGNS`] order.
    pub fn coefficients(&self, t: f64) -> [C64; 8] {
        TRILINEAR_SIGNS.map(|s| self.coefficient(s, t))
    }

    /// Long-time average of [`Self::coefficient`]: only products rotating at
    /// `±ω0` survive, with weight `g0/2`.
    pub fn secular_coefficient(&self, signs: [i32; MODE_COUNT]) -> C64 {
        let nu = self.detuning(signs);
        let tol = 1e-9 * self.omega0.abs().max(1.0);
        let mut weight = 0.0;
        if (nu - self.omega0).abs() < tol {
            weight += 0.5;
        }
        if (nu + self.omega0).abs() < tol {
            weight += 0.5;
        }
        let phase: f64 = -(0..MODE_COUNT)
            .map(|i| signs[i] as f64 * self.phases[i])
            .sum::<f64>();
        C64::from_polar(self.g0 * weight, phase)
    }

    /// Fastest rotation in `H(t)`, `ω0 + Σ ω_i`.
    pub fn fastest_frequency(&self) -> f64 {
        self.omega0.abs() + self.frequencies.iter().sum::<f64>()
    }
}

/// Dense form of the interaction-picture Hamiltonian, one matrix per ladder
/// product.
#[derive(Clone, Debug)]
pub struct DrivenHamiltonian {
    params: DriveParameters,
    dims: Vec<usize>,
    products: Vec<OperatorMatrix>,
}

impl DrivenHamiltonian {
    pub fn new(hspec: &HamiltonianSpec, sys: &ModeSystem) -> Result<Self> {
        let params = DriveParameters::new(hspec, sys)?;
        let products = TRILINEAR_SIGNS
            .iter()
            .map(|s| ladder_monomial(sys, *s))
            .collect();
        Ok(Self {
            params,
            dims: vec![sys.cutoff(); MODE_COUNT],
            products,
        })
    }

    pub fn params(&self) -> &DriveParameters {
        &self.params
    }

    /// The eight ladder products without coefficients, in [`TRILINEAR_SIGNS`] order.
    pub fn products(&self) -> &[OperatorMatrix] {
        &self.products
    }

    pub fn terms_at(&self, t: f64) -> Vec<Term> {
        TRILINEAR_SIGNS
            .iter()
            .zip(&self.products)
            .map(|(s, p)| Term {
                shift: *s,
                operator: p.scaled(self.params.coefficient(*s, t)),
            })
            .collect()
    }

    pub fn at(&self, t: f64) -> OperatorMatrix {
        self.combine(&self.params.coefficients(t))
    }

    /// Term-by-term long-time average; equals the trilinear Hamiltonian.
    pub fn secular_average(&self) -> OperatorMatrix {
        let coefficients = TRILINEAR_SIGNS.map(|s| self.params.secular_coefficient(s));
        self.combine(&coefficients)
    }

    /// Union of the sparsity patterns of all ladder products.
    pub fn pattern(&self) -> CMatrix {
        let dim: usize = self.dims.iter().product();
        let mut m = CMatrix::zeros(dim, dim);
        for p in &self.products {
            m.zip_apply(p.matrix(), |acc, x| *acc += x);
        }
        m
    }

    fn combine(&self, coefficients: &[C64]) -> OperatorMatrix {
        let dim: usize = self.dims.iter().product();
        let mut m = CMatrix::zeros(dim, dim);
        for (p, c) in self.products.iter().zip(coefficients) {
            if *c != C64::new(0.0, 0.0) {
                m.zip_apply(p.matrix(), |acc, x| *acc += x * c);
            }
        }
        OperatorMatrix::from_parts(m, self.dims.clone(), Shift::Mixed)
    }
}

pub fn full_hamiltonian_at(hspec: &HamiltonianSpec, sys: &ModeSystem, t: f64) -> Result<OperatorMatrix> {
    Ok(DrivenHamiltonian::new(hspec, sys)?.at(t))
}

/// Time-independent Hamiltonian for a static variant.
pub fn static_hamiltonian(hspec: &HamiltonianSpec, sys: &ModeSystem) -> Result<OperatorMatrix> {
    match hspec.variant {
        Variant::RwaTrilinear => rwa_hamiltonian(hspec, sys),
        Variant::DoubleSpdc => double_spdc_hamiltonian(hspec, sys),
        Variant::FullInteraction => Err(invalid(
            "the full interaction-picture Hamiltonian is time dependent",
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{expectation_real, max_abs, ModeOperators};
    use approx::assert_abs_diff_eq;

    fn sys(d: usize) -> ModeSystem {
        ModeSystem::with_cutoff(d).unwrap()
    }

    #[test]
    fn occupation_limits() {
        assert!(thermal_occupation(50.0).unwrap() < 1e-20);
        assert_abs_diff_eq!(thermal_occupation(2f64.ln()).unwrap(), 1.0, epsilon = 1e-14);
        // 1/(e^2.7 - 1)
        let direct = 1.0 / (2.7f64.exp() - 1.0);
        assert_abs_diff_eq!(thermal_occupation(2.7).unwrap(), direct, epsilon = 1e-15);
        assert_abs_diff_eq!(direct, 0.07205, epsilon = 5e-6);
        assert!(thermal_occupation(0.0).is_err());
        assert!(thermal_occupation(-1.0).is_err());
        assert_eq!(thermal_occupation(f64::INFINITY).unwrap(), 0.0);
    }

    #[test]
    fn occupations_decrease_with_frequency() {
        for beta in [1.0, 1.6, 2.7] {
            let n = ThermalSpec::new(beta).unwrap().occupations(&sys(4));
            assert!(n[0] > n[1] && n[1] > n[2] && n[2] > 0.0);
        }
    }

    #[test]
    fn cold_thermal_state_is_vacuum() {
        let s = sys(3);
        let rho = thermal_state(&ThermalSpec::vacuum(), &s).unwrap();
        assert_eq!(rho, DensityMatrix::vacuum(&s));
        let rho = thermal_state(&ThermalSpec::new(60.0).unwrap(), &s).unwrap();
        assert!(max_abs(&(rho.matrix() - DensityMatrix::vacuum(&s).matrix())) < 1e-25);
    }

    #[test]
    fn thermal_mean_matches_geometric_series() {
        // geometric-series oracle summed to 30 levels
        let q = (-2.7f64).exp();
        let oracle: f64 = (0..30).map(|n| n as f64 * (1.0 - q) * q.powi(n)).sum();
        let s = ModeSystem::with_cutoff(30).unwrap();
        let dist = ThermalSpec::new(2.7).unwrap().mode_distribution(&s, 0).unwrap();
        let mean: f64 = dist.iter().enumerate().map(|(n, p)| n as f64 * p).sum();
        assert_abs_diff_eq!(mean, oracle, epsilon = 1e-12);
        assert_abs_diff_eq!(mean, 0.07205, epsilon = 1e-5);
    }

    #[test]
    fn thermal_state_mean_and_diagonal() {
        let s = sys(10);
        let spec = ThermalSpec::new(2.7).unwrap();
        let rho = thermal_state(&spec, &s).unwrap();
        let ops = ModeOperators::new(&s).unwrap();
        let na = expectation_real(&ops.number[0], &rho).unwrap();
        assert_abs_diff_eq!(na, thermal_occupation(2.7).unwrap(), epsilon = 1e-6);
        let m = rho.matrix();
        for i in 0..s.dim() {
            for j in 0..s.dim() {
                if i != j {
                    assert_eq!(m[(i, j)], C64::new(0.0, 0.0));
                }
            }
        }
        rho.validate().unwrap();
    }

    #[test]
    fn thermal_state_commutes_with_free_hamiltonian() {
        let s = sys(6);
        let ops = ModeOperators::new(&s).unwrap();
        let w = s.frequencies();
        let free = ops.number[0]
            .scaled(C64::new(w[0], 0.0))
            .sum(&ops.number[1].scaled(C64::new(w[1], 0.0)))
            .unwrap()
            .sum(&ops.number[2].scaled(C64::new(w[2], 0.0)))
            .unwrap();
        let spec = ThermalSpec::new(2.0).unwrap().with_tail_tolerance(1e-4);
        let rho = thermal_state(&spec, &s).unwrap();
        let comm = rho.matrix() * free.matrix() - free.matrix() * rho.matrix();
        assert!(max_abs(&comm) < 1e-12);
    }

    #[test]
    fn cutoff_guard_names_mode() {
        let err = thermal_state(&ThermalSpec::new(1.0).unwrap(), &sys(8)).unwrap_err();
        match err {
            Error::CutoffTooSmall { mode, cutoff, .. } => {
                assert_eq!(mode, 'a');
                assert_eq!(cutoff, 8);
            }
            other => panic!("unexpected error {other}"),
        }
        let relaxed = ThermalSpec::new(1.0).unwrap().with_tail_tolerance(1e-3);
        assert!(thermal_state(&relaxed, &sys(8)).is_ok());
    }

    #[test]
    fn rwa_matrix_elements() {
        let s = sys(3);
        let g0 = 0.3;
        let h = rwa_hamiltonian(&HamiltonianSpec::new(Variant::RwaTrilinear, g0).unwrap(), &s).unwrap();
        assert!(h.is_hermitian());
        let e = h.entry(s.index([1, 1, 1]), s.index([0, 0, 0]));
        assert_abs_diff_eq!(e.re, g0 / 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(e.im, 0.0, epsilon = 1e-15);
        assert_eq!(h.entry(0, 0), C64::new(0.0, 0.0));
    }

    #[test]
    fn rwa_terms_obey_triplet_shifts() {
        let s = sys(3);
        let terms = rwa_terms(&HamiltonianSpec::new(Variant::RwaTrilinear, 0.2).unwrap(), &s).unwrap();
        for t in &terms {
            assert!(t.shift == [1, 1, 1] || t.shift == [-1, -1, -1]);
            assert_eq!(t.operator.shift(), &Shift::exact(t.shift.to_vec()));
            assert!(t.operator.obeys_shift());
        }
    }

    #[test]
    fn rwa_spectrum_is_phase_independent() {
        let s = sys(4);
        let spectrum = |theta: f64| {
            let h = rwa_hamiltonian(
                &HamiltonianSpec::new(Variant::RwaTrilinear, 0.4).unwrap().with_theta(theta),
                &s,
            )
            .unwrap();
            let mut e = crate::fock::hermitian_eigenvalues(h.matrix());
            e.sort_by(|a, b| a.partial_cmp(b).unwrap());
            e
        };
        let reference = spectrum(0.0);
        for theta in [std::f64::consts::FRAC_PI_3, 1.0] {
            for (a, b) in reference.iter().zip(spectrum(theta)) {
                assert_abs_diff_eq!(*a, b, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn wrong_variant_rejected() {
        let s = sys(3);
        let full = HamiltonianSpec::new(Variant::FullInteraction, 0.1).unwrap();
        assert!(rwa_hamiltonian(&full, &s).is_err());
        assert!(double_spdc_hamiltonian(&full, &s).is_err());
        let rwa = HamiltonianSpec::new(Variant::RwaTrilinear, 0.1).unwrap();
        assert!(full_hamiltonian_at(&rwa, &s, 0.0).is_err());
        assert!(HamiltonianSpec::new(Variant::RwaTrilinear, -1.0).is_err());
    }

    #[test]
    fn full_hamiltonian_at_origin_is_quadrature_product() {
        let s = sys(3);
        let g0 = 0.25;
        let h = full_hamiltonian_at(&HamiltonianSpec::new(Variant::FullInteraction, g0).unwrap(), &s, 0.0).unwrap();
        let ops = ModeOperators::new(&s).unwrap();
        let x = |m: usize| ops.lowering[m].sum(&ops.raising[m]).unwrap();
        let expected = x(0).product(&x(1)).unwrap().product(&x(2)).unwrap().scaled(C64::new(g0, 0.0));
        assert!(max_abs(&(h.matrix() - expected.matrix())) < 1e-14);
    }

    #[test]
    fn full_hamiltonian_is_hermitian() {
        let s = sys(3);
        let spec = HamiltonianSpec::new(Variant::FullInteraction, 0.1).unwrap().with_theta(0.4);
        let h = full_hamiltonian_at(&spec, &s, 0.37).unwrap();
        assert!(h.is_hermitian());
        assert!(crate::fock::hermiticity_defect(h.matrix()) <= 1e-12 * max_abs(h.matrix()));
    }

    #[test]
    fn triplet_creation_coefficient_averages_to_half() {
        let s = sys(3);
        let g0 = 0.1;
        let driven = DrivenHamiltonian::new(&HamiltonianSpec::new(Variant::FullInteraction, g0).unwrap(), &s).unwrap();
        let omega0 = driven.params().omega0;
        let period = 2.0 * std::f64::consts::PI / omega0;
        // composite midpoint quadrature of a smooth periodic integrand is spectrally accurate
        let n = 256;
        let mut acc = C64::new(0.0, 0.0);
        for k in 0..n {
            acc += driven.params().coefficient([1, 1, 1], (k as f64 + 0.5) * period / n as f64);
        }
        acc /= n as f64;
        assert_abs_diff_eq!(acc.re, g0 / 2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(acc.im, 0.0, epsilon = 1e-14);
    }

    #[test]
    fn builders_scale_linearly_in_coupling() {
        let s = sys(3);
        for variant in [Variant::RwaTrilinear, Variant::DoubleSpdc] {
            let h1 = static_hamiltonian(&HamiltonianSpec::new(variant, 0.07).unwrap(), &s).unwrap();
            let h2 = static_hamiltonian(&HamiltonianSpec::new(variant, 0.14).unwrap(), &s).unwrap();
            assert!(max_abs(&(h2.matrix() - h1.matrix() * C64::new(2.0, 0.0))) < 1e-15);
        }
        let f1 = full_hamiltonian_at(&HamiltonianSpec::new(Variant::FullInteraction, 0.07).unwrap(), &s, 0.9).unwrap();
        let f2 = full_hamiltonian_at(&HamiltonianSpec::new(Variant::FullInteraction, 0.14).unwrap(), &s, 0.9).unwrap();
        assert!(max_abs(&(f2.matrix() - f1.matrix() * C64::new(2.0, 0.0))) < 1e-15);
    }

    #[test]
    fn double_spdc_elements_and_shifts() {
        let s = sys(3);
        let g0 = 0.2;
        let spec = HamiltonianSpec::new(Variant::DoubleSpdc, g0).unwrap();
        let h = double_spdc_hamiltonian(&spec, &s).unwrap();
        assert!(h.is_hermitian());
        assert_abs_diff_eq!(h.entry(s.index([1, 1, 0]), 0).re, g0 / 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(h.entry(s.index([1, 0, 1]), 0).re, g0 / 2.0, epsilon = 1e-15);
        assert_eq!(h.entry(s.index([1, 1, 1]), 0), C64::new(0.0, 0.0));
        for t in double_spdc_terms(&spec, &s).unwrap() {
            let moved = t.shift.iter().filter(|x| **x != 0).count();
            assert_eq!(moved, 2, "shift {:?} is not a two-mode term", t.shift);
            assert!(t.operator.obeys_shift());
        }
    }

    #[test]
    fn monomials_match_operator_products() {
        let s = sys(3);
        let ops = ModeOperators::new(&s).unwrap();
        for signs in TRILINEAR_SIGNS {
            let pick = |m: usize| if signs[m] > 0 { &ops.raising[m] } else { &ops.lowering[m] };
            let product = pick(0).product(pick(1)).unwrap().product(pick(2)).unwrap();
            let direct = ladder_monomial(&s, signs);
            assert!(max_abs(&(product.matrix() - direct.matrix())) < 1e-14);
            assert_eq!(direct.shift(), product.shift());
        }
        let ab = ops.lowering[0].product(&ops.lowering[1]).unwrap();
        assert!(max_abs(&(ab.matrix() - ladder_monomial(&s, [-1, -1, 0]).matrix())) < 1e-14);
    }
}
