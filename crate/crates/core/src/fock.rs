//! Truncated Fock space for three bosonic modes.
//!
//! Basis states `|n_a, n_b, n_c⟩` with `0 ≤ n_i < d` are laid out with mode `a`
//! as the slowest index: `index = (n_a·d + n_b)·d + n_c`. Every embedding,
//! moment formula and selection-rule check in the crate relies on this order.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{invalid, Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

pub const MODE_COUNT: usize = 3;
pub const MODE_NAMES: [char; MODE_COUNT] = ['a', 'b', 'c'];
pub const DEFAULT_FREQUENCIES: [f64; MODE_COUNT] = [1.0, 2.0, 3.0];

const HERMITIAN_RTOL: f64 = 1e-12;

/// Three modes with frequencies in units of `ω_a`, local phases and a common
/// Fock cutoff.
#[derive(Clone, Debug, PartialEq)]
pub struct ModeSystem {
    frequencies: [f64; MODE_COUNT],
    phases: [f64; MODE_COUNT],
    cutoff: usize,
}

impl ModeSystem {
    pub fn new(
        frequencies: [f64; MODE_COUNT],
        phases: [f64; MODE_COUNT],
        cutoff: usize,
    ) -> Result<Self> {
        if cutoff < 2 {
            return Err(invalid(format!("cutoff must be at least 2, got {cutoff}")));
        }
        if frequencies.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(invalid(format!(
                "mode frequencies must be finite and positive, got {frequencies:?}"
            )));
        }
        if frequencies[0] != 1.0 {
            return Err(invalid(format!(
                "frequencies are in units of the first mode, so frequencies[0] must be 1, got {}",
                frequencies[0]
            )));
        }
        if phases.iter().any(|p| !p.is_finite()) {
            return Err(invalid(format!("phases must be finite, got {phases:?}")));
        }
        Ok(Self {
            frequencies,
            phases,
            cutoff,
        })
    }

    /// Frequencies (1, 2, 3), zero phases.
    pub fn with_cutoff(cutoff: usize) -> Result<Self> {
        Self::new(DEFAULT_FREQUENCIES, [0.0; MODE_COUNT], cutoff)
    }

    pub fn resized(&self, cutoff: usize) -> Result<Self> {
        Self::new(self.frequencies, self.phases, cutoff)
    }

    pub fn frequencies(&self) -> [f64; MODE_COUNT] {
        self.frequencies
    }

    pub fn phases(&self) -> [f64; MODE_COUNT] {
        self.phases
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn dim(&self) -> usize {
        self.cutoff.pow(MODE_COUNT as u32)
    }

    /// Sum of mode frequencies, the resonant pump frequency.
    pub fn pump_frequency(&self) -> f64 {
        self.frequencies.iter().sum()
    }

    /// Stride of `mode` in the flattened basis.
    pub fn stride(&self, mode: usize) -> usize {
        self.cutoff.pow((MODE_COUNT - 1 - mode) as u32)
    }

    pub fn index(&self, levels: [usize; MODE_COUNT]) -> usize {
        let d = self.cutoff;
        debug_assert!(levels.iter().all(|&n| n < d));
        (levels[0] * d + levels[1]) * d + levels[2]
    }

    pub fn levels(&self, index: usize) -> [usize; MODE_COUNT] {
        let d = self.cutoff;
        [index / (d * d), (index / d) % d, index % d]
    }

    /// Index of `levels + shift`, if it stays inside the truncated space.
    pub fn shifted_index(&self, levels: [usize; MODE_COUNT], shift: [i32; MODE_COUNT]) -> Option<usize> {
        let mut out = [0usize; MODE_COUNT];
        for m in 0..MODE_COUNT {
            let n = levels[m] as i64 + shift[m] as i64;
            if n < 0 || n >= self.cutoff as i64 {
                return None;
            }
            out[m] = n as usize;
        }
        Some(self.index(out))
    }
}

/// Photon-number change produced by an operator, per mode.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Shift {
    Exact(Vec<i32>),
    Mixed,
}

impl Shift {
    pub fn exact(shift: impl Into<Vec<i32>>) -> Self {
        Shift::Exact(shift.into())
    }

    pub fn zero(modes: usize) -> Self {
        Shift::Exact(vec![0; modes])
    }

    pub fn as_slice(&self) -> Option<&[i32]> {
        match self {
            Shift::Exact(s) => Some(s),
            Shift::Mixed => None,
        }
    }

    /// Shift of an operator product.
    pub fn compose(&self, other: &Shift) -> Shift {
        match (self, other) {
            (Shift::Exact(a), Shift::Exact(b)) if a.len() == b.len() => {
                Shift::Exact(a.iter().zip(b).map(|(x, y)| x + y).collect())
            }
            _ => Shift::Mixed,
        }
    }

    /// Shift of an operator sum.
    pub fn merge(&self, other: &Shift) -> Shift {
        if self == other {
            self.clone()
        } else {
            Shift::Mixed
        }
    }

    pub fn negated(&self) -> Shift {
        match self {
            Shift::Exact(s) => Shift::Exact(s.iter().map(|x| -x).collect()),
            Shift::Mixed => Shift::Mixed,
        }
    }
}

/// Dense operator on a tensor product of truncated modes, carrying a Hermitian
/// flag and its photon-number shift.
#[derive(Clone, Debug)]
pub struct OperatorMatrix {
    matrix: CMatrix,
    dims: Vec<usize>,
    hermitian: bool,
    shift: Shift,
}

impl OperatorMatrix {
    /// Checks shape and, for an exact shift, the sparsity pattern.
    pub fn new(matrix: CMatrix, dims: Vec<usize>, shift: Shift) -> Result<Self> {
        let dim: usize = dims.iter().product();
        if matrix.nrows() != dim || matrix.ncols() != dim {
            return Err(invalid(format!(
                "matrix is {}x{} but mode dimensions {dims:?} require {dim}x{dim}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        if let Shift::Exact(s) = &shift {
            if s.len() != dims.len() {
                return Err(invalid(format!(
                    "shift {s:?} does not match {} modes",
                    dims.len()
                )));
            }
        }
        let op = Self::from_parts(matrix, dims, shift);
        if !op.obeys_shift() {
            return Err(invalid(format!(
                "matrix entries violate declared shift {:?}",
                op.shift
            )));
        }
        Ok(op)
    }

    pub(crate) fn from_parts(matrix: CMatrix, dims: Vec<usize>, shift: Shift) -> Self {
        let hermitian = hermiticity_defect(&matrix) <= HERMITIAN_RTOL * max_abs(&matrix).max(f64::MIN_POSITIVE);
        Self {
            matrix,
            dims,
            hermitian,
            shift,
        }
    }

    pub fn identity(dims: Vec<usize>) -> Self {
        let dim = dims.iter().product();
        let shift = Shift::zero(dims.len());
        Self::from_parts(CMatrix::identity(dim, dim), dims, shift)
    }

    pub fn zeros(dims: Vec<usize>, shift: Shift) -> Self {
        let dim = dims.iter().product();
        Self::from_parts(CMatrix::zeros(dim, dim), dims, shift)
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    pub fn shift(&self) -> &Shift {
        &self.shift
    }

    pub fn entry(&self, row: usize, col: usize) -> C64 {
        self.matrix[(row, col)]
    }

    fn check_dims(&self, other: &Self) -> Result<()> {
        if self.dims != other.dims {
            return Err(invalid(format!(
                "operator dimensions differ: {:?} vs {:?}",
                self.dims, other.dims
            )));
        }
        Ok(())
    }

    pub fn product(&self, rhs: &Self) -> Result<Self> {
        self.check_dims(rhs)?;
        Ok(Self::from_parts(
            &self.matrix * &rhs.matrix,
            self.dims.clone(),
            self.shift.compose(&rhs.shift),
        ))
    }

    pub fn sum(&self, rhs: &Self) -> Result<Self> {
        self.check_dims(rhs)?;
        Ok(Self::from_parts(
            &self.matrix + &rhs.matrix,
            self.dims.clone(),
            self.shift.merge(&rhs.shift),
        ))
    }

    pub fn scaled(&self, factor: C64) -> Self {
        Self::from_parts(&self.matrix * factor, self.dims.clone(), self.shift.clone())
    }

    pub fn adjoint(&self) -> Self {
        Self {
            matrix: self.matrix.adjoint(),
            dims: self.dims.clone(),
            hermitian: self.hermitian,
            shift: self.shift.negated(),
        }
    }

    pub fn commutator(&self, rhs: &Self) -> Result<Self> {
        let ab = self.product(rhs)?;
        let ba = rhs.product(self)?;
        Ok(Self::from_parts(
            ab.matrix - ba.matrix,
            self.dims.clone(),
            ab.shift.merge(&ba.shift),
        ))
    }

    /// True when every nonzero entry `⟨m|O|n⟩` has `m − n` equal to the shift.
    pub fn obeys_shift(&self) -> bool {
        let Shift::Exact(shift) = &self.shift else {
            return true;
        };
        let dim = self.dim();
        for col in 0..dim {
            let n = multi_index(col, &self.dims);
            for row in 0..dim {
                if self.matrix[(row, col)] == C64::new(0.0, 0.0) {
                    continue;
                }
                let m = multi_index(row, &self.dims);
                if m.iter().zip(&n).zip(shift).any(|((mi, ni), s)| *mi as i64 - *ni as i64 != *s as i64) {
                    return false;
                }
            }
        }
        true
    }
}

fn multi_index(mut index: usize, dims: &[usize]) -> Vec<usize> {
    let mut out = vec![0; dims.len()];
    for (slot, d) in out.iter_mut().zip(dims).rev() {
        *slot = index % d;
        index /= d;
    }
    out
}

pub(crate) fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

pub(crate) fn hermiticity_defect(m: &CMatrix) -> f64 {
    if m.nrows() != m.ncols() {
        return f64::INFINITY;
    }
    let n = m.nrows();
    let mut worst: f64 = 0.0;
    for j in 0..n {
        for i in j..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// Single-mode annihilation operator, `⟨n−1|a|n⟩ = √n`.
pub fn lowering_operator(cutoff: usize) -> Result<OperatorMatrix> {
    if cutoff < 2 {
        return Err(invalid(format!("cutoff must be at least 2, got {cutoff}")));
    }
    let mut m = CMatrix::zeros(cutoff, cutoff);
    for n in 1..cutoff {
        m[(n - 1, n)] = C64::new((n as f64).sqrt(), 0.0);
    }
    Ok(OperatorMatrix::from_parts(m, vec![cutoff], Shift::exact([-1])))
}

pub fn raising_operator(cutoff: usize) -> Result<OperatorMatrix> {
    Ok(lowering_operator(cutoff)?.adjoint())
}

pub fn number_operator(cutoff: usize) -> Result<OperatorMatrix> {
    if cutoff < 2 {
        return Err(invalid(format!("cutoff must be at least 2, got {cutoff}")));
    }
    let diag = CVector::from_fn(cutoff, |n, _| C64::new(n as f64, 0.0));
    Ok(OperatorMatrix::from_parts(
        CMatrix::from_diagonal(&diag),
        vec![cutoff],
        Shift::exact([0]),
    ))
}

/// `1 ⊗ … ⊗ op ⊗ … ⊗ 1` with `op` in slot `mode`.
pub fn embed(op: &OperatorMatrix, mode: usize, sys: &ModeSystem) -> Result<OperatorMatrix> {
    let d = sys.cutoff();
    if mode >= MODE_COUNT {
        return Err(invalid(format!("mode index {mode} out of range")));
    }
    if op.dims() != [d] {
        return Err(invalid(format!(
            "single-mode operator has dimensions {:?}, system cutoff is {d}",
            op.dims()
        )));
    }
    let before = CMatrix::identity(d.pow(mode as u32), d.pow(mode as u32));
    let after = CMatrix::identity(
        d.pow((MODE_COUNT - 1 - mode) as u32),
        d.pow((MODE_COUNT - 1 - mode) as u32),
    );
    let matrix = before.kronecker(op.matrix()).kronecker(&after);
    let shift = match op.shift() {
        Shift::Exact(s) => {
            let mut full = vec![0; MODE_COUNT];
            full[mode] = s[0];
            Shift::Exact(full)
        }
        Shift::Mixed => Shift::Mixed,
    };
    Ok(OperatorMatrix {
        matrix,
        dims: vec![d; MODE_COUNT],
        hermitian: op.is_hermitian(),
        shift,
    })
}

/// Embedded ladder and number operators for all three modes.
#[derive(Clone, Debug)]
pub struct ModeOperators {
    pub lowering: [OperatorMatrix; MODE_COUNT],
    pub raising: [OperatorMatrix; MODE_COUNT],
    pub number: [OperatorMatrix; MODE_COUNT],
}

impl ModeOperators {
    pub fn new(sys: &ModeSystem) -> Result<Self> {
        let d = sys.cutoff();
        let a = lowering_operator(d)?;
        let n = number_operator(d)?;
        let lowering = [embed(&a, 0, sys)?, embed(&a, 1, sys)?, embed(&a, 2, sys)?];
        let raising = [
            lowering[0].adjoint(),
            lowering[1].adjoint(),
            lowering[2].adjoint(),
        ];
        let number = [embed(&n, 0, sys)?, embed(&n, 1, sys)?, embed(&n, 2, sys)?];
        Ok(Self {
            lowering,
            raising,
            number,
        })
    }
}

/// Eigendecomposition `H = V diag(E) V†` of a Hermitian matrix.
#[derive(Clone, Debug)]
pub struct Spectrum {
    eigenvalues: DVector<f64>,
    eigenvectors: CMatrix,
}

impl Spectrum {
    pub fn of(h: &OperatorMatrix) -> Result<Self> {
        if !h.is_hermitian() {
            return Err(invalid("eigendecomposition requires a Hermitian operator"));
        }
        Ok(Self::of_hermitian(h.matrix().clone()))
    }

    pub(crate) fn of_hermitian(m: CMatrix) -> Self {
        let (eigenvalues, eigenvectors) = hermitian_eigen(&m);
        Self {
            eigenvalues,
            eigenvectors,
        }
    }

    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.eigenvalues
    }

    pub fn eigenvectors(&self) -> &CMatrix {
        &self.eigenvectors
    }

    /// `exp(−iHt)`.
    pub fn propagator(&self, t: f64) -> CMatrix {
        let v = &self.eigenvectors;
        let mut scaled = v.clone();
        for (k, mut col) in scaled.column_iter_mut().enumerate() {
            col *= C64::from_polar(1.0, -self.eigenvalues[k] * t);
        }
        scaled * v.adjoint()
    }
}

fn hermitian_evd(m: &CMatrix) -> faer::linalg::solvers::SelfAdjointEigen<C64> {
    faer::Mat::<C64>::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
        .self_adjoint_eigen(faer::Side::Lower)
        .expect("Hermitian eigensolver failed to converge")
}

/// `(E, V)` with `m = V diag(E) V†`, eigenvalues ascending. Complex matrices
/// go through faer: nalgebra's complex `symmetric_eigen` returns residuals
/// up to 1e-3 on some block Hamiltonians.
pub(crate) fn hermitian_eigen(m: &CMatrix) -> (DVector<f64>, CMatrix) {
    let evd = hermitian_evd(m);
    let n = m.nrows();
    let (s, u) = (evd.S(), evd.U());
    (
        DVector::from_fn(n, |k, _| s[k].re),
        CMatrix::from_fn(n, n, |i, j| u[(i, j)]),
    )
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn hermitian_eigenvalues(m: &CMatrix) -> Vec<f64> {
    let evd = hermitian_evd(m);
    (0..m.nrows()).map(|k| evd.S()[k].re).collect()
}

/// Exact propagator `exp(−iHt)` (ħ = 1) via eigendecomposition.
pub fn hermitian_propagator(h: &OperatorMatrix, t: f64) -> Result<OperatorMatrix> {
    let spectrum = Spectrum::of(h)?;
    Ok(OperatorMatrix::from_parts(
        spectrum.propagator(t),
        h.dims().to_vec(),
        Shift::Mixed,
    ))
}

/// Max-norm distance of `U†U` from the identity.
pub fn unitarity_defect(u: &CMatrix) -> f64 {
    let n = u.nrows();
    let uu = u.adjoint() * u;
    max_abs(&(uu - CMatrix::identity(n, n)))
}

/// Hermitian, positive-semidefinite, unit-trace matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    matrix: CMatrix,
}

pub const STATE_HERMITIAN_TOL: f64 = 1e-12;
pub const STATE_TRACE_TOL: f64 = 1e-10;
pub const STATE_EIGEN_TOL: f64 = 1e-10;

impl DensityMatrix {
    /// Validates Hermiticity, unit trace and positivity.
    pub fn new(matrix: CMatrix) -> Result<Self> {
        let rho = Self { matrix };
        rho.validate()?;
        Ok(rho)
    }

    pub(crate) fn from_matrix_unchecked(matrix: CMatrix) -> Self {
        Self { matrix }
    }

    pub fn from_pure(psi: &CVector) -> Result<Self> {
        let norm = psi.norm_squared();
        if (norm - 1.0).abs() > STATE_TRACE_TOL {
            return Err(Error::InvalidState(format!(
                "state vector has squared norm {norm}, expected 1"
            )));
        }
        Ok(Self {
            matrix: psi * psi.adjoint(),
        })
    }

    pub fn from_diagonal(probabilities: &[f64]) -> Result<Self> {
        if probabilities.iter().any(|p| *p < -STATE_EIGEN_TOL || !p.is_finite()) {
            return Err(Error::InvalidState("negative or non-finite probability".into()));
        }
        let total: f64 = probabilities.iter().sum();
        if (total - 1.0).abs() > STATE_TRACE_TOL {
            return Err(Error::InvalidState(format!(
                "probabilities sum to {total}, expected 1"
            )));
        }
        let diag = CVector::from_iterator(
            probabilities.len(),
            probabilities.iter().map(|p| C64::new(*p, 0.0)),
        );
        Ok(Self {
            matrix: CMatrix::from_diagonal(&diag),
        })
    }

    pub fn basis_state(sys: &ModeSystem, levels: [usize; MODE_COUNT]) -> Result<Self> {
        if levels.iter().any(|&n| n >= sys.cutoff()) {
            return Err(invalid(format!(
                "levels {levels:?} exceed cutoff {}",
                sys.cutoff()
            )));
        }
        let dim = sys.dim();
        let mut m = CMatrix::zeros(dim, dim);
        let i = sys.index(levels);
        m[(i, i)] = C64::new(1.0, 0.0);
        Ok(Self { matrix: m })
    }

    pub fn vacuum(sys: &ModeSystem) -> Self {
        Self::basis_state(sys, [0, 0, 0]).expect("vacuum is inside every truncated space")
    }

    pub fn validate(&self) -> Result<()> {
        let m = &self.matrix;
        if m.nrows() != m.ncols() {
            return Err(Error::InvalidState("matrix is not square".into()));
        }
        let defect = hermiticity_defect(m);
        if defect > STATE_HERMITIAN_TOL {
            return Err(Error::InvalidState(format!(
                "not Hermitian (defect {defect:.3e})"
            )));
        }
        let trace = m.trace();
        if (trace - C64::new(1.0, 0.0)).norm() > STATE_TRACE_TOL {
            return Err(Error::InvalidState(format!("trace is {trace}, expected 1")));
        }
        let min_eig = hermitian_eigenvalues(m).into_iter().fold(f64::INFINITY, f64::min);
        if min_eig < -STATE_EIGEN_TOL {
            return Err(Error::InvalidState(format!(
                "smallest eigenvalue {min_eig:.3e} is negative"
            )));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn trace(&self) -> C64 {
        self.matrix.trace()
    }

    /// `Tr[ρ²]`.
    pub fn purity(&self) -> f64 {
        self.matrix.iter().map(|z| z.norm_sqr()).sum()
    }

    /// Entries `⟨m|ρ|n⟩` above `threshold`, as index pairs.
    pub fn support(&self, threshold: f64) -> Vec<(usize, usize)> {
        let n = self.dim();
        let mut out = Vec::new();
        for col in 0..n {
            for row in 0..n {
                if self.matrix[(row, col)].norm() > threshold {
                    out.push((row, col));
                }
            }
        }
        out
    }
}

/// `Tr[ρ·O]`. For a Hermitian `O` the imaginary part is checked to vanish.
pub fn expectation(op: &OperatorMatrix, rho: &DensityMatrix) -> Result<C64> {
    let dim = rho.dim();
    if op.dim() != dim {
        return Err(invalid(format!(
            "operator dimension {} does not match state dimension {dim}",
            op.dim()
        )));
    }
    let o = op.matrix();
    let r = rho.matrix();
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..dim {
        for j in 0..dim {
            acc += r[(i, j)] * o[(j, i)];
        }
    }
    if op.is_hermitian() {
        let scale = max_abs(o).max(1.0);
        if acc.im.abs() >= 1e-10 * scale {
            return Err(Error::NonRealExpectation(acc.im));
        }
    }
    Ok(acc)
}

/// Real expectation value of a Hermitian operator.
pub fn expectation_real(op: &OperatorMatrix, rho: &DensityMatrix) -> Result<f64> {
    if !op.is_hermitian() {
        return Err(invalid("real expectation requires a Hermitian operator"));
    }
    Ok(expectation(op, rho)?.re)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn lowering_two_levels() {
        let a = lowering_operator(2).unwrap();
        assert_eq!(a.entry(0, 1), c(1.0));
        assert_eq!(a.entry(1, 0), c(0.0));
        assert_eq!(a.entry(0, 0), c(0.0));
        assert_eq!(a.entry(1, 1), c(0.0));
        assert_eq!(a.shift(), &Shift::exact([-1]));
    }

    #[test]
    fn lowering_ladder_rule() {
        let a = lowering_operator(4).unwrap();
        assert_abs_diff_eq!(a.entry(2, 3).re, 1.7320508075688772, epsilon = 1e-15);
        assert!(a.obeys_shift());
    }

    #[test]
    fn lowering_rejects_cutoff_one() {
        assert!(matches!(lowering_operator(1), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn commutator_is_identity_below_top_level() {
        for d in 2..10 {
            let a = lowering_operator(d).unwrap();
            let comm = a.commutator(&a.adjoint()).unwrap();
            for i in 0..d - 1 {
                for j in 0..d - 1 {
                    let expected = if i == j { 1.0 } else { 0.0 };
                    assert_abs_diff_eq!(comm.entry(i, j).re, expected, epsilon = 1e-12);
                    assert_abs_diff_eq!(comm.entry(i, j).im, 0.0, epsilon = 1e-12);
                }
            }
            // truncation artefact at the top level
            assert_abs_diff_eq!(comm.entry(d - 1, d - 1).re, 1.0 - d as f64, epsilon = 1e-12);
        }
    }

    #[test]
    fn embedded_number_operator_reads_levels() {
        let sys = ModeSystem::with_cutoff(3).unwrap();
        let n = embed(&number_operator(3).unwrap(), 0, &sys).unwrap();
        let rho = DensityMatrix::basis_state(&sys, [2, 0, 1]).unwrap();
        assert_abs_diff_eq!(expectation_real(&n, &rho).unwrap(), 2.0, epsilon = 1e-14);
    }

    #[test]
    fn distinct_modes_commute() {
        let sys = ModeSystem::with_cutoff(3).unwrap();
        let ops = ModeOperators::new(&sys).unwrap();
        let ab = ops.lowering[0].product(&ops.lowering[1]).unwrap();
        let ba = ops.lowering[1].product(&ops.lowering[0]).unwrap();
        assert_eq!(max_abs(&(ab.matrix() - ba.matrix())), 0.0);
    }

    #[test]
    fn triple_product_shift() {
        let sys = ModeSystem::with_cutoff(3).unwrap();
        let ops = ModeOperators::new(&sys).unwrap();
        let abc = ops.lowering[0]
            .product(&ops.lowering[1])
            .unwrap()
            .product(&ops.lowering[2])
            .unwrap();
        assert_eq!(abc.shift(), &Shift::exact([-1, -1, -1]));
        assert!(abc.obeys_shift());
    }

    #[test]
    fn embed_rejects_wrong_dimension() {
        let sys = ModeSystem::with_cutoff(3).unwrap();
        let a = lowering_operator(4).unwrap();
        assert!(embed(&a, 1, &sys).is_err());
    }

    #[test]
    fn mode_system_invariants() {
        assert!(ModeSystem::with_cutoff(1).is_err());
        assert!(ModeSystem::new([2.0, 2.0, 3.0], [0.0; 3], 4).is_err());
        assert!(ModeSystem::new([1.0, -2.0, 3.0], [0.0; 3], 4).is_err());
        let sys = ModeSystem::with_cutoff(5).unwrap();
        assert_eq!(sys.dim(), 125);
        for i in 0..sys.dim() {
            assert_eq!(sys.index(sys.levels(i)), i);
        }
        assert_eq!(sys.index([1, 0, 0]), 25);
    }

    #[test]
    fn propagator_at_zero_is_identity() {
        let sys = ModeSystem::with_cutoff(3).unwrap();
        let ops = ModeOperators::new(&sys).unwrap();
        let h = ops.number[0].sum(&ops.number[1]).unwrap();
        let u = hermitian_propagator(&h, 0.0).unwrap();
        assert!(max_abs(&(u.matrix() - CMatrix::identity(27, 27))) < 1e-12);
    }

    #[test]
    fn propagator_free_phases() {
        let omega = 1.7;
        let h = number_operator(5).unwrap().scaled(c(omega));
        let t = 0.83;
        let u = hermitian_propagator(&h, t).unwrap();
        for n in 0..5 {
            let expected = C64::from_polar(1.0, -omega * n as f64 * t);
            assert!((u.entry(n, n) - expected).norm() < 1e-12);
        }
    }

    #[test]
    fn propagator_rejects_non_hermitian() {
        let a = lowering_operator(3).unwrap();
        assert!(hermitian_propagator(&a, 1.0).is_err());
    }

    #[test]
    fn expectation_examples() {
        let sys = ModeSystem::with_cutoff(3).unwrap();
        let ops = ModeOperators::new(&sys).unwrap();
        let vac = DensityMatrix::vacuum(&sys);
        assert_eq!(expectation_real(&ops.number[0], &vac).unwrap(), 0.0);

        let one = DensityMatrix::basis_state(&sys, [1, 1, 1]).unwrap();
        let nbnc = ops.number[1].product(&ops.number[2]).unwrap();
        assert_abs_diff_eq!(expectation_real(&nbnc, &one).unwrap(), 1.0, epsilon = 1e-14);

        let mut psi = CVector::zeros(sys.dim());
        psi[sys.index([0, 0, 0])] = c(0.5f64.sqrt());
        psi[sys.index([1, 1, 1])] = c(0.5f64.sqrt());
        let cat = DensityMatrix::from_pure(&psi).unwrap();
        let abc = ops.lowering[0]
            .product(&ops.lowering[1])
            .unwrap()
            .product(&ops.lowering[2])
            .unwrap();
        let value = expectation(&abc, &cat).unwrap();
        assert_abs_diff_eq!(value.re, 0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(value.im, 0.0, epsilon = 1e-14);
    }

    #[test]
    fn expectation_dimension_mismatch() {
        let sys = ModeSystem::with_cutoff(3).unwrap();
        let rho = DensityMatrix::vacuum(&sys);
        let n = number_operator(3).unwrap();
        assert!(expectation(&n, &rho).is_err());
    }

    #[test]
    fn density_matrix_validation() {
        let bad_trace = CMatrix::identity(2, 2);
        assert!(DensityMatrix::new(bad_trace).is_err());
        let mut negative = CMatrix::zeros(2, 2);
        negative[(0, 0)] = c(1.5);
        negative[(1, 1)] = c(-0.5);
        assert!(DensityMatrix::new(negative).is_err());
        let mut nonherm = CMatrix::identity(2, 2) * c(0.5);
        nonherm[(0, 1)] = C64::new(0.0, 0.1);
        assert!(DensityMatrix::new(nonherm).is_err());
        assert!(DensityMatrix::new(CMatrix::identity(2, 2) * c(0.5)).is_ok());
    }

    #[test]
    fn shift_declaration_is_checked() {
        let a = lowering_operator(3).unwrap();
        assert!(OperatorMatrix::new(a.matrix().clone(), vec![3], Shift::exact([1])).is_err());
        assert!(OperatorMatrix::new(a.matrix().clone(), vec![3], Shift::exact([-1])).is_ok());
    }
}
