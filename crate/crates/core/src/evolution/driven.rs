//! State-vector propagation under the interaction-picture trilinear
//! Hamiltonian with the exponential midpoint rule.
//!
//! Every ladder product changes each `n_i` by ±1, so the parities of
//! `n_a + n_b` and `n_b + n_c` are conserved and the space splits into four
//! invariant classes. Each step applies `exp(−i H(t_mid) h)` to a vector in
//! one class; the action of the exponential is summed as a Taylor series
//! until terms drop below machine precision, so every step is unitary to
//! rounding.

use crate::error::{invalid, Result};
use crate::fock::{CVector, ModeSystem, C64, MODE_COUNT};
use crate::model::{DriveParameters, TRILINEAR_SIGNS};
use crate::witness::MomentSet;

const TERMS: usize = TRILINEAR_SIGNS.len();
const MAX_TAYLOR_TERMS: usize = 60;
/// Largest `‖H‖·h` handled by a single Taylor sum.
const MAX_TAYLOR_ARGUMENT: f64 = 0.5;

struct ParityClass {
    indices: Vec<usize>,
    /// Row-major `len × TERMS` source positions and matrix elements of
    /// each ladder product.
    source: Vec<u32>,
    element: Vec<f64>,
    /// Local position of `n − (1,1,1)` for each member, if present.
    triplet_partner: Vec<Option<u32>>,
}

pub struct DrivenStateEvolver {
    sys: ModeSystem,
    params: DriveParameters,
    classes: Vec<ParityClass>,
    location: Vec<(usize, usize)>,
    max_element: f64,
}

fn parity_class(levels: [usize; MODE_COUNT]) -> usize {
    ((levels[0] + levels[1]) % 2) * 2 + (levels[1] + levels[2]) % 2
}

impl DrivenStateEvolver {
    pub fn new(params: DriveParameters, sys: &ModeSystem) -> Self {
        let dim = sys.dim();
        let mut members: Vec<Vec<usize>> = vec![Vec::new(); 4];
        let mut location = vec![(0, 0); dim];
        for idx in 0..dim {
            let c = parity_class(sys.levels(idx));
            location[idx] = (c, members[c].len());
            members[c].push(idx);
        }
        let mut max_element: f64 = 0.0;
        let classes = members
            .into_iter()
            .map(|indices| {
                let mut source = Vec::with_capacity(indices.len() * TERMS);
                let mut element = Vec::with_capacity(indices.len() * TERMS);
                let mut triplet_partner = Vec::with_capacity(indices.len());
                for &idx in &indices {
                    let levels = sys.levels(idx);
                    for signs in TRILINEAR_SIGNS {
                        let back = signs.map(|s| -s);
                        match sys.shifted_index(levels, back) {
                            Some(src) => {
                                let value: f64 = (0..MODE_COUNT)
                                    .map(|i| {
                                        if signs[i] > 0 {
                                            levels[i] as f64
                                        } else {
                                            (levels[i] + 1) as f64
                                        }
                                    })
                                    .product::<f64>()
                                    .sqrt();
                                max_element = max_element.max(value);
                                source.push(location[src].1 as u32);
                                element.push(value);
                            }
                            None => {
                                source.push(0);
                                element.push(0.0);
                            }
                        }
                    }
                    triplet_partner.push(
                        sys.shifted_index(levels, [-1, -1, -1])
                            .map(|p| location[p].1 as u32),
                    );
                }
                ParityClass {
                    indices,
                    source,
                    element,
                    triplet_partner,
                }
            })
            .collect();
        Self {
            sys: sys.clone(),
            params,
            classes,
            location,
            max_element,
        }
    }

    pub fn params(&self) -> &DriveParameters {
        &self.params
    }

    pub fn system(&self) -> &ModeSystem {
        &self.sys
    }

    fn apply(class: &ParityClass, z: &[C64; TERMS], psi: &[C64], out: &mut [C64]) {
        for (k, slot) in out.iter_mut().enumerate() {
            let base = k * TERMS;
            let mut acc = C64::new(0.0, 0.0);
            for s in 0..TERMS {
                let e = class.element[base + s];
                if e != 0.0 {
                    acc += z[s] * (psi[class.source[base + s] as usize] * e);
                }
            }
            *slot = acc;
        }
    }

    /// `psi ← exp(−i h Σ_s z_s T_s) psi` on one parity class.
    fn exp_step(&self, class: &ParityClass, z: &[C64; TERMS], h: f64, psi: &mut Vec<C64>, scratch: &mut [Vec<C64>; 2]) {
        let bound = z.iter().map(|c| c.norm()).sum::<f64>() * self.max_element * h.abs();
        let substeps = ((bound / MAX_TAYLOR_ARGUMENT).ceil() as usize).max(1);
        let hh = h / substeps as f64;
        let n = psi.len();
        for _ in 0..substeps {
            let [term, next] = scratch;
            term.clear();
            term.extend_from_slice(psi);
            next.resize(n, C64::new(0.0, 0.0));
            let mut converged = false;
            for k in 1..=MAX_TAYLOR_TERMS {
                Self::apply(class, z, term, next);
                let factor = C64::new(0.0, -hh / k as f64);
                let mut term_norm = 0.0;
                let mut acc_norm = 0.0;
                for ((t, x), p) in term.iter_mut().zip(next.iter()).zip(psi.iter_mut()) {
                    *t = *x * factor;
                    *p += *t;
                    term_norm += t.norm_sqr();
                    acc_norm += p.norm_sqr();
                }
                if term_norm <= 1e-34 * acc_norm {
                    converged = true;
                    break;
                }
            }
            assert!(converged, "Taylor series of a step exponential failed to converge");
        }
    }

    fn check_dt(&self, dt: f64) -> Result<()> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(invalid(format!("time step must be positive, got {dt}")));
        }
        Ok(())
    }

    /// Propagates a class-local vector from `t0` to `t1` in equal midpoint
    /// steps no longer than `dt`. Backward intervals retrace the same grid.
    fn propagate_local(&self, class: &ParityClass, psi: &mut Vec<C64>, t0: f64, t1: f64, dt: f64, scratch: &mut [Vec<C64>; 2]) {
        let span = t1 - t0;
        if span == 0.0 {
            return;
        }
        let steps = ((span.abs() / dt) - 1e-9).ceil().max(1.0) as usize;
        let h = span / steps as f64;
        for j in 0..steps {
            let mid = t0 + (j as f64 + 0.5) * h;
            let z = self.params.coefficients(mid);
            self.exp_step(class, &z, h, psi, scratch);
        }
    }

    /// Propagates a full state vector from `t0` to `t1`.
    pub fn propagate(&self, psi: &CVector, t0: f64, t1: f64, dt: f64) -> Result<CVector> {
        self.check_dt(dt)?;
        if psi.len() != self.sys.dim() {
            return Err(invalid("state vector dimension does not match the system"));
        }
        let mut out = CVector::zeros(psi.len());
        let mut scratch = [Vec::new(), Vec::new()];
        for class in &self.classes {
            let mut local: Vec<C64> = class.indices.iter().map(|&i| psi[i]).collect();
            if local.iter().all(|z| *z == C64::new(0.0, 0.0)) {
                continue;
            }
            self.propagate_local(class, &mut local, t0, t1, dt, &mut scratch);
            for (&i, v) in class.indices.iter().zip(local) {
                out[i] = v;
            }
        }
        Ok(out)
    }

    fn local_moments(&self, class: &ParityClass, psi: &[C64], time: f64) -> MomentSet {
        let mut out = MomentSet::zero(time);
        let mut nnn = 0.0;
        for (k, amp) in psi.iter().enumerate() {
            let p = amp.norm_sqr();
            let [na, nb, nc] = self.sys.levels(class.indices[k]).map(|x| x as f64);
            out.n[0] += p * na;
            out.n[1] += p * nb;
            out.n[2] += p * nc;
            out.nn[0] += p * nb * nc;
            out.nn[1] += p * na * nc;
            out.nn[2] += p * na * nb;
            nnn += p * na * nb * nc;
            if let Some(partner) = class.triplet_partner[k] {
                out.abc += psi[partner as usize].conj() * *amp * (na * nb * nc).sqrt();
            }
        }
        out.nnn = Some(nnn);
        out
    }

    /// Moments of `|levels⟩` evolved to each sample time.
    pub fn fock_moments(&self, levels: [usize; MODE_COUNT], times: &[f64], dt: f64) -> Result<Vec<MomentSet>> {
        self.check_dt(dt)?;
        if levels.iter().any(|&n| n >= self.sys.cutoff()) {
            return Err(invalid(format!("levels {levels:?} exceed the cutoff")));
        }
        let (c, pos) = self.location[self.sys.index(levels)];
        let class = &self.classes[c];
        let mut psi = vec![C64::new(0.0, 0.0); class.indices.len()];
        psi[pos] = C64::new(1.0, 0.0);
        let mut scratch = [Vec::new(), Vec::new()];
        let mut t = 0.0;
        let mut out = Vec::with_capacity(times.len());
        for &tau in times {
            self.propagate_local(class, &mut psi, t, tau, dt, &mut scratch);
            t = tau;
            out.push(self.local_moments(class, &psi, tau));
        }
        Ok(out)
    }
}
