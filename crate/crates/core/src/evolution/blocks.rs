use crate::fock::{CMatrix, Spectrum, C64};

/// Connected components of the nonzero pattern of a square matrix.
pub fn connected_components(pattern: &CMatrix) -> Vec<Vec<usize>> {
    let n = pattern.nrows();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for col in 0..n {
        for row in 0..n {
            if row != col && pattern[(row, col)] != C64::new(0.0, 0.0) {
                let (a, b) = (find(&mut parent, row), find(&mut parent, col));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut root_slot = vec![usize::MAX; n];
    let mut blocks: Vec<Vec<usize>> = Vec::new();
    for i in 0..n {
        let r = find(&mut parent, i);
        if root_slot[r] == usize::MAX {
            root_slot[r] = blocks.len();
            blocks.push(Vec::new());
        }
        blocks[root_slot[r]].push(i);
    }
    blocks
}

pub(crate) fn submatrix(m: &CMatrix, rows: &[usize], cols: &[usize]) -> CMatrix {
    CMatrix::from_fn(rows.len(), cols.len(), |i, j| m[(rows[i], cols[j])])
}

pub(crate) fn scatter(target: &mut CMatrix, block: &CMatrix, rows: &[usize], cols: &[usize]) {
    for (j, &c) in cols.iter().enumerate() {
        for (i, &r) in rows.iter().enumerate() {
            target[(r, c)] = block[(i, j)];
        }
    }
}

/// Eigendecomposition of a Hermitian matrix restricted to each invariant block.
#[derive(Clone, Debug)]
pub struct BlockSpectrum {
    dim: usize,
    blocks: Vec<(Vec<usize>, Spectrum)>,
    /// `(block, position)` of every basis index.
    location: Vec<(usize, usize)>,
}

impl BlockSpectrum {
    /// `h` must be Hermitian.
    pub fn new(h: &CMatrix) -> Self {
        let components = connected_components(h);
        Self::with_blocks(h, components)
    }

    pub fn with_blocks(h: &CMatrix, components: Vec<Vec<usize>>) -> Self {
        let dim = h.nrows();
        let mut location = vec![(0, 0); dim];
        let blocks = components
            .into_iter()
            .enumerate()
            .map(|(b, idx)| {
                for (p, &i) in idx.iter().enumerate() {
                    location[i] = (b, p);
                }
                let sub = submatrix(h, &idx, &idx);
                (idx, Spectrum::of_hermitian(sub))
            })
            .collect();
        Self {
            dim,
            blocks,
            location,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn block_count(&self) -> usize {
        self.blocks.len()
    }

    pub fn largest_block(&self) -> usize {
        self.blocks.iter().map(|(i, _)| i.len()).max().unwrap_or(0)
    }

    pub fn blocks(&self) -> impl Iterator<Item = (&[usize], &Spectrum)> {
        self.blocks.iter().map(|(i, s)| (i.as_slice(), s))
    }

    /// `exp(−iHt)|index⟩` as `(basis index, amplitude)` pairs on its block.
    pub fn evolve_basis_state(&self, index: usize, t: f64) -> Vec<(usize, C64)> {
        let (b, p) = self.location[index];
        let (idx, spec) = &self.blocks[b];
        let v = spec.eigenvectors();
        let e = spec.eigenvalues();
        let n = idx.len();
        let coeffs: Vec<C64> = (0..n)
            .map(|k| v[(p, k)].conj() * C64::from_polar(1.0, -e[k] * t))
            .collect();
        (0..n)
            .map(|r| {
                let amp = (0..n).map(|k| v[(r, k)] * coeffs[k]).sum();
                (idx[r], amp)
            })
            .collect()
    }
}

/// `ρ(t) = e^{−iHt} ρ₀ e^{iHt}` evaluated block by block in the eigenbasis.
pub(crate) struct StaticPropagator<'a> {
    spectrum: &'a BlockSpectrum,
    /// `(I, J, V_I† ρ₀_IJ V_J)` for every nonzero block pair.
    rotated: Vec<(usize, usize, CMatrix)>,
}

impl<'a> StaticPropagator<'a> {
    pub fn new(spectrum: &'a BlockSpectrum, rho0: &CMatrix) -> Self {
        let mut rotated = Vec::new();
        for (bi, (ii, si)) in spectrum.blocks.iter().enumerate() {
            for (bj, (jj, sj)) in spectrum.blocks.iter().enumerate() {
                let sub = submatrix(rho0, ii, jj);
                if sub.iter().all(|z| *z == C64::new(0.0, 0.0)) {
                    continue;
                }
                let r = si.eigenvectors().adjoint() * sub * sj.eigenvectors();
                rotated.push((bi, bj, r));
            }
        }
        Self { spectrum, rotated }
    }

    pub fn state_at(&self, t: f64) -> CMatrix {
        let dim = self.spectrum.dim;
        let mut out = CMatrix::zeros(dim, dim);
        for (bi, bj, r) in &self.rotated {
            let (ii, si) = &self.spectrum.blocks[*bi];
            let (jj, sj) = &self.spectrum.blocks[*bj];
            let ei = si.eigenvalues();
            let ej = sj.eigenvalues();
            let phased = CMatrix::from_fn(r.nrows(), r.ncols(), |i, j| {
                r[(i, j)] * C64::from_polar(1.0, -(ei[i] - ej[j]) * t)
            });
            let block = si.eigenvectors() * phased * sj.eigenvectors().adjoint();
            scatter(&mut out, &block, ii, jj);
        }
        out
    }
}
