//! Third/fourth-order moments and the entanglement witnesses built on them.
//!
//! Bipartition witnesses `I_i = |⟨abc⟩| − √(⟨N_i⟩⟨N_jN_k⟩)` use the index
//! convention `I₁ ↔ a|bc`, `I₂ ↔ b|ac`, `I₃ ↔ c|ab`. The genuine-entanglement
//! witness subtracts all three square roots:
//! `G = |⟨abc⟩| − Σ_i √(⟨N_i⟩⟨N_jN_k⟩)`.

use nalgebra::{Matrix6, SMatrix};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{
    expectation, expectation_real, CMatrix, DensityMatrix, ModeSystem, OperatorMatrix, Shift, C64,
    MODE_COUNT,
};

pub const MOMENT_TOL: f64 = 1e-10;

/// `⟨abc⟩`, `⟨N_i⟩` and `⟨N_jN_k⟩` at one instant. `nn[i]` pairs with
/// `n[i]`: `nn = [⟨N_bN_c⟩, ⟨N_aN_c⟩, ⟨N_aN_b⟩]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentSet {
    pub time: f64,
    pub abc: C64,
    pub n: [f64; MODE_COUNT],
    pub nn: [f64; MODE_COUNT],
    /// `⟨N_aN_bN_c⟩`, when available; bounds `|⟨abc⟩|²` from above.
    pub nnn: Option<f64>,
}

impl MomentSet {
    pub fn zero(time: f64) -> Self {
        Self {
            time,
            abc: C64::new(0.0, 0.0),
            n: [0.0; MODE_COUNT],
            nn: [0.0; MODE_COUNT],
            nnn: Some(0.0),
        }
    }

    /// Accumulates `weight · other`; moments are linear in the state.
    pub fn add_weighted(&mut self, weight: f64, other: &MomentSet) {
        self.abc += other.abc * weight;
        for i in 0..MODE_COUNT {
            self.n[i] += weight * other.n[i];
            self.nn[i] += weight * other.nn[i];
        }
        self.nnn = match (self.nnn, other.nnn) {
            (Some(a), Some(b)) => Some(a + weight * b),
            _ => None,
        };
    }

    pub fn validate(&self) -> Result<()> {
        for (label, values) in [("<N_i>", &self.n), ("<N_j N_k>", &self.nn)] {
            if let Some(v) = values.iter().find(|v| !(**v >= -MOMENT_TOL)) {
                return Err(Error::InvalidMoment(format!("{label} = {v} is negative")));
            }
        }
        if let Some(nnn) = self.nnn {
            let lhs = self.abc.norm_sqr();
            if lhs > nnn + MOMENT_TOL {
                return Err(Error::InvalidMoment(format!(
                    "|<abc>|^2 = {lhs} exceeds <N_a N_b N_c> = {nnn}"
                )));
            }
        }
        Ok(())
    }

    /// `√(⟨N_i⟩⟨N_jN_k⟩)` for each bipartition, tiny negative round-off clamped.
    pub fn bipartition_bounds(&self) -> [f64; MODE_COUNT] {
        std::array::from_fn(|i| (self.n[i] * self.nn[i]).max(0.0).sqrt())
    }
}

/// Dense moment operators, built directly in the Fock basis.
#[derive(Clone, Debug)]
pub struct MomentOperators {
    pub abc: OperatorMatrix,
    pub n: [OperatorMatrix; MODE_COUNT],
    pub nn: [OperatorMatrix; MODE_COUNT],
    pub nnn: OperatorMatrix,
}

impl MomentOperators {
    pub fn new(sys: &ModeSystem) -> Self {
        let dim = sys.dim();
        let dims = vec![sys.cutoff(); MODE_COUNT];
        let diagonal = |f: &dyn Fn([usize; MODE_COUNT]) -> f64| {
            let mut m = CMatrix::zeros(dim, dim);
            for i in 0..dim {
                m[(i, i)] = C64::new(f(sys.levels(i)), 0.0);
            }
            OperatorMatrix::from_parts(m, dims.clone(), Shift::zero(MODE_COUNT))
        };
        let n = [
            diagonal(&|l| l[0] as f64),
            diagonal(&|l| l[1] as f64),
            diagonal(&|l| l[2] as f64),
        ];
        let nn = [
            diagonal(&|l| (l[1] * l[2]) as f64),
            diagonal(&|l| (l[0] * l[2]) as f64),
            diagonal(&|l| (l[0] * l[1]) as f64),
        ];
        let nnn = diagonal(&|l| (l[0] * l[1] * l[2]) as f64);
        let mut abc = CMatrix::zeros(dim, dim);
        for col in 0..dim {
            let l = sys.levels(col);
            if let Some(row) = sys.shifted_index(l, [-1, -1, -1]) {
                abc[(row, col)] = C64::new(((l[0] * l[1] * l[2]) as f64).sqrt(), 0.0);
            }
        }
        let abc = OperatorMatrix::from_parts(abc, dims, Shift::exact([-1, -1, -1]));
        Self { abc, n, nn, nnn }
    }

    pub fn evaluate(&self, rho: &DensityMatrix, time: f64) -> Result<MomentSet> {
        let mut out = MomentSet::zero(time);
        out.abc = expectation(&self.abc, rho)?;
        for i in 0..MODE_COUNT {
            out.n[i] = expectation_real(&self.n[i], rho)?;
            out.nn[i] = expectation_real(&self.nn[i], rho)?;
        }
        out.nnn = Some(expectation_real(&self.nnn, rho)?);
        Ok(out)
    }
}

/// Moment set of a density matrix (time stamp 0).
pub fn moments(rho: &DensityMatrix, sys: &ModeSystem) -> Result<MomentSet> {
    if rho.dim() != sys.dim() {
        return Err(crate::error::invalid(format!(
            "state dimension {} does not match system dimension {}",
            rho.dim(),
            sys.dim()
        )));
    }
    MomentOperators::new(sys).evaluate(rho, 0.0)
}

/// Moment set of a normalised state vector, evaluated directly on amplitudes.
pub fn pure_moments(psi: &[C64], sys: &ModeSystem, time: f64) -> MomentSet {
    debug_assert_eq!(psi.len(), sys.dim());
    let mut out = MomentSet::zero(time);
    let mut nnn = 0.0;
    let diag = sys.stride(0) + sys.stride(1) + sys.stride(2);
    for (idx, amp) in psi.iter().enumerate() {
        let p = amp.norm_sqr();
        if p == 0.0 {
            continue;
        }
        let l = sys.levels(idx);
        let [na, nb, nc] = l.map(|x| x as f64);
        out.n[0] += p * na;
        out.n[1] += p * nb;
        out.n[2] += p * nc;
        out.nn[0] += p * nb * nc;
        out.nn[1] += p * na * nc;
        out.nn[2] += p * na * nb;
        nnn += p * na * nb * nc;
        if l.iter().all(|&x| x > 0) {
            out.abc += psi[idx - diag].conj() * *amp * (na * nb * nc).sqrt();
        }
    }
    out.nnn = Some(nnn);
    out
}

pub fn witness_i(m: &MomentSet) -> Result<[f64; MODE_COUNT]> {
    m.validate()?;
    let lhs = m.abc.norm();
    let bounds = m.bipartition_bounds();
    Ok(bounds.map(|b| lhs - b))
}

pub fn witness_g(m: &MomentSet) -> Result<f64> {
    m.validate()?;
    Ok(m.abc.norm() - m.bipartition_bounds().iter().sum::<f64>())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WitnessReport {
    pub i: [f64; MODE_COUNT],
    pub g: f64,
    pub fully_inseparable: bool,
    pub genuine: bool,
}

impl WitnessReport {
    pub fn from_moments(m: &MomentSet) -> Result<Self> {
        let i = witness_i(m)?;
        let g = witness_g(m)?;
        Ok(Self {
            i,
            g,
            fully_inseparable: i.iter().all(|v| *v > 0.0),
            genuine: g > 0.0,
        })
    }

    /// `[I₁, I₂, I₃, G]`.
    pub fn values(&self) -> [f64; 4] {
        [self.i[0], self.i[1], self.i[2], self.g]
    }
}

/// Both sides of the biseparability bound
/// `|⟨abc⟩| ≤ Σ_i √(⟨N_i⟩⟨N_jN_k⟩)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BiseparableBound {
    pub lhs: f64,
    pub rhs: [f64; MODE_COUNT],
    /// `lhs − Σ rhs`; equals `G`.
    pub slack: f64,
}

pub fn biseparable_bound_check(m: &MomentSet) -> Result<BiseparableBound> {
    m.validate()?;
    let lhs = m.abc.norm();
    let rhs = m.bipartition_bounds();
    Ok(BiseparableBound {
        lhs,
        rhs,
        slack: lhs - rhs.iter().sum::<f64>(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Ladder {
    Lower,
    Raise,
}

/// Applies a word of ladder operators (rightmost first) to a basis state.
fn apply_word(
    sys: &ModeSystem,
    word: &[(usize, Ladder)],
    mut levels: [usize; MODE_COUNT],
) -> Option<([usize; MODE_COUNT], f64)> {
    let d = sys.cutoff();
    let mut coeff = 1.0;
    for &(mode, op) in word.iter().rev() {
        let n = levels[mode];
        match op {
            Ladder::Lower => {
                if n == 0 {
                    return None;
                }
                coeff *= (n as f64).sqrt();
                levels[mode] = n - 1;
            }
            Ladder::Raise => {
                if n + 1 >= d {
                    return None;
                }
                coeff *= ((n + 1) as f64).sqrt();
                levels[mode] = n + 1;
            }
        }
    }
    Some((levels, coeff))
}

/// `Tr[ρ·W]` for a product `W` of ladder operators, in O(D).
pub fn ladder_expectation(rho: &DensityMatrix, sys: &ModeSystem, word: &[(usize, Ladder)]) -> C64 {
    let m = rho.matrix();
    let mut acc = C64::new(0.0, 0.0);
    for col in 0..sys.dim() {
        if let Some((levels, c)) = apply_word(sys, word, sys.levels(col)) {
            acc += m[(col, sys.index(levels))] * c;
        }
    }
    acc
}

/// Symmetrised quadrature covariances over `(x_a, p_a, x_b, p_b, x_c, p_c)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CovarianceMatrix {
    pub matrix: Matrix6<f64>,
}

impl CovarianceMatrix {
    pub fn max_off_diagonal(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..6 {
            for j in 0..6 {
                if i != j {
                    worst = worst.max(self.matrix[(i, j)].abs());
                }
            }
        }
        worst
    }

    /// Smallest eigenvalue of `V + (i/2)Ω`; nonnegative for physical states.
    pub fn uncertainty_min_eigenvalue(&self) -> f64 {
        let mut m: SMatrix<C64, 6, 6> = self.matrix.map(|v| C64::new(v, 0.0));
        for k in 0..MODE_COUNT {
            m[(2 * k, 2 * k + 1)] += C64::new(0.0, 0.5);
            m[(2 * k + 1, 2 * k)] -= C64::new(0.0, 0.5);
        }
        let m = crate::fock::CMatrix::from_fn(6, 6, |i, j| m[(i, j)]);
        crate::fock::hermitian_eigenvalues(&m).into_iter().fold(f64::INFINITY, f64::min)
    }

    pub fn satisfies_uncertainty(&self, tol: f64) -> bool {
        self.uncertainty_min_eigenvalue() >= -tol
    }
}

pub fn covariance(rho: &DensityMatrix, sys: &ModeSystem) -> Result<CovarianceMatrix> {
    if rho.dim() != sys.dim() {
        return Err(crate::error::invalid(format!(
            "state dimension {} does not match system dimension {}",
            rho.dim(),
            sys.dim()
        )));
    }
    let s = std::f64::consts::FRAC_1_SQRT_2;
    // quadrature j = coefficient on a + coefficient on a†, acting on mode j/2
    let coeffs: [(C64, C64); 2] = [
        (C64::new(s, 0.0), C64::new(s, 0.0)),
        (C64::new(0.0, -s), C64::new(0.0, s)),
    ];
    let quad = |j: usize| (j / 2, coeffs[j % 2]);

    let mut mean = [0.0; 6];
    for (j, slot) in mean.iter_mut().enumerate() {
        let (mode, (ca, cd)) = quad(j);
        let v = ca * ladder_expectation(rho, sys, &[(mode, Ladder::Lower)])
            + cd * ladder_expectation(rho, sys, &[(mode, Ladder::Raise)]);
        *slot = v.re;
    }

    let ops = [Ladder::Lower, Ladder::Raise];
    let mut second = [[C64::new(0.0, 0.0); 6]; 6];
    for (j, row) in second.iter_mut().enumerate() {
        let (mj, cj) = quad(j);
        for (k, slot) in row.iter_mut().enumerate() {
            let (mk, ck) = quad(k);
            let mut acc = C64::new(0.0, 0.0);
            for (x, cx) in ops.iter().zip([cj.0, cj.1]) {
                for (y, cy) in ops.iter().zip([ck.0, ck.1]) {
                    acc += cx * cy * ladder_expectation(rho, sys, &[(mj, *x), (mk, *y)]);
                }
            }
            *slot = acc;
        }
    }
    let matrix = Matrix6::from_fn(|j, k| {
        0.5 * (second[j][k] + second[k][j]).re - mean[j] * mean[k]
    });
    Ok(CovarianceMatrix { matrix })
}
