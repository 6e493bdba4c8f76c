//! Cross-product penalty matrix `Γ` and its eigen split.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{invalid, Error, Result};

/// Largest coefficient count for which `Γ` is materialized.
pub const EXPLICIT_LIMIT: usize = 4000;

/// Structure of `Γ`: weight `ρ` between every pair of coefficients whose
/// positions differ by `1..=N_min`, zero elsewhere (including the diagonal).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrossProductPenalty {
    atoms: usize,
    positions: usize,
    nmin: usize,
    weight: f64,
}

impl CrossProductPenalty {
    pub fn new(atoms: usize, positions: usize, nmin: usize, weight: f64) -> Result<Self> {
        if atoms == 0 || positions == 0 {
            return Err(invalid("gamma", "need at least one atom and one position"));
        }
        if !(weight >= 0.0 && weight.is_finite()) {
            return Err(invalid("rho", format!("{weight} must be non-negative")));
        }
        Ok(CrossProductPenalty {
            atoms,
            positions,
            nmin,
            weight,
        })
    }

    pub fn dim(&self) -> usize {
        self.atoms * self.positions
    }

    pub fn atoms(&self) -> usize {
        self.atoms
    }

    pub fn positions(&self) -> usize {
        self.positions
    }

    pub fn nmin(&self) -> usize {
        self.nmin
    }

    pub fn weight(&self) -> f64 {
        self.weight
    }

    /// Same structure with a different weight.
    pub fn with_weight(&self, weight: f64) -> Result<Self> {
        CrossProductPenalty::new(self.atoms, self.positions, self.nmin, weight)
    }

    pub fn is_zero(&self) -> bool {
        self.weight == 0.0 || self.nmin == 0 || self.positions == 1
    }

    pub fn entry(&self, a: usize, b: usize) -> f64 {
        let d = (a / self.atoms).abs_diff(b / self.atoms);
        if d > 0 && d <= self.nmin {
            self.weight
        } else {
            0.0
        }
    }

    fn block_sums(&self, c: &[f64]) -> Vec<f64> {
        // prefix[p] = sum of all entries in blocks < p
        let mut prefix = Vec::with_capacity(self.positions + 1);
        prefix.push(0.0);
        let mut acc = 0.0;
        for block in c.chunks_exact(self.atoms) {
            acc += block.iter().sum::<f64>();
            prefix.push(acc);
        }
        prefix
    }

    /// `Γc` without forming `Γ`, via prefix sums over blocks.
    pub fn mul(&self, c: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; c.len()];
        self.mul_into(c, &mut out);
        out
    }

    pub fn mul_into(&self, c: &[f64], out: &mut [f64]) {
        debug_assert_eq!(c.len(), self.dim());
        let prefix = self.block_sums(c);
        for p in 0..self.positions {
            let lo = p.saturating_sub(self.nmin);
            let hi = (p + self.nmin).min(self.positions - 1);
            let window = prefix[hi + 1] - prefix[lo];
            let own = prefix[p + 1] - prefix[p];
            let v = self.weight * (window - own);
            out[p * self.atoms..(p + 1) * self.atoms].fill(v);
        }
    }

    /// `cᵀΓc`.
    pub fn quad(&self, c: &[f64]) -> f64 {
        c.iter().zip(self.mul(c)).map(|(a, b)| a * b).sum()
    }

    /// `|β|ᵀ Γ |β|`.
    pub fn quad_abs(&self, beta: &[f64]) -> f64 {
        let a: Vec<f64> = beta.iter().map(|v| v.abs()).collect();
        self.quad(&a)
    }

    /// Ordered pairs of non-zero coefficients at positions `1..=N_min` apart.
    pub fn violating_pairs(&self, beta: &[f64]) -> usize {
        let nz: Vec<f64> = beta
            .iter()
            .map(|v| if *v != 0.0 { 1.0 } else { 0.0 })
            .collect();
        let prefix = self.block_sums(&nz);
        let mut count = 0.0;
        for p in 0..self.positions {
            let lo = p.saturating_sub(self.nmin);
            let hi = (p + self.nmin).min(self.positions - 1);
            let own = prefix[p + 1] - prefix[p];
            count += own * (prefix[hi + 1] - prefix[lo] - own);
        }
        count as usize
    }

    /// Upper bound on the spectral norm (largest row sum).
    pub fn norm_bound(&self) -> f64 {
        let width = (2 * self.nmin).min(self.positions - 1);
        self.weight * (self.atoms * width) as f64
    }

    /// Dense `Γ`; refused beyond [`EXPLICIT_LIMIT`] coefficients.
    pub fn to_dense(&self) -> Result<DMatrix<f64>> {
        let n = self.dim();
        if n > EXPLICIT_LIMIT {
            return Err(Error::TooLarge(n, EXPLICIT_LIMIT));
        }
        Ok(DMatrix::from_fn(n, n, |a, b| self.entry(a, b)))
    }
}

/// Convenience constructor matching [`CrossProductPenalty::new`].
pub fn build_gamma(
    atoms: usize,
    positions: usize,
    nmin: usize,
    rho: f64,
) -> Result<CrossProductPenalty> {
    CrossProductPenalty::new(atoms, positions, nmin, rho)
}

#[derive(Debug, Clone)]
enum Basis {
    Full(DMatrix<f64>),
    /// `Γ = T ⊗ J` with `J` the all-ones block: eigenvectors `v_i ⊗ 1/√M`
    /// of the position pattern `T`, everything orthogonal to them has eigenvalue 0.
    Kronecker {
        vectors: DMatrix<f64>,
        atoms: usize,
    },
}

/// `Γ = Γ₊ + Γ₋` from a symmetric eigendecomposition.
#[derive(Debug, Clone)]
pub struct SplitPenalty {
    eigenvalues: DVector<f64>,
    basis: Basis,
    dim: usize,
}

impl SplitPenalty {
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Eigenvalues carried explicitly (the rest, if any, are zero).
    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.eigenvalues
    }

    pub fn has_negative_part(&self) -> bool {
        self.eigenvalues.iter().any(|&l| l < 0.0)
    }

    /// `V f(Λ) Vᵀ x` for an elementwise spectral function.
    pub fn apply_spectral(&self, x: &[f64], f: impl Fn(f64) -> f64) -> Vec<f64> {
        match &self.basis {
            Basis::Full(v) => {
                let mut coords = v.tr_mul(&DVector::from_column_slice(x));
                for (c, &l) in coords.iter_mut().zip(self.eigenvalues.iter()) {
                    *c *= f(l);
                }
                (v * coords).as_slice().to_vec()
            }
            Basis::Kronecker { vectors, .. } if vectors.ncols() == 0 => {
                let f0 = f(0.0);
                x.iter().map(|v| f0 * v).collect()
            }
            Basis::Kronecker { vectors, atoms } => {
                let scale = (*atoms as f64).sqrt();
                let b = DVector::from_iterator(
                    vectors.nrows(),
                    x.chunks_exact(*atoms)
                        .map(|blk| blk.iter().sum::<f64>() / scale),
                );
                let mut coords = vectors.tr_mul(&b);
                for (c, &l) in coords.iter_mut().zip(self.eigenvalues.iter()) {
                    *c *= f(l);
                }
                let inside = vectors * coords;
                let f0 = f(0.0);
                x.chunks_exact(*atoms)
                    .enumerate()
                    .flat_map(|(p, blk)| {
                        let mean = b[p] / scale;
                        let ins = inside[p] / scale;
                        blk.iter().map(move |&v| f0 * (v - mean) + ins)
                    })
                    .collect()
            }
        }
    }

    fn dense_part(&self, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
        let n = self.dim;
        let mut out = DMatrix::zeros(n, n);
        let mut e = vec![0.0; n];
        for j in 0..n {
            e[j] = 1.0;
            let col = self.apply_spectral(&e, &f);
            out.set_column(j, &DVector::from_vec(col));
            e[j] = 0.0;
        }
        out
    }

    /// Positive semidefinite part `Γ₊`.
    pub fn plus(&self) -> DMatrix<f64> {
        self.dense_part(|l| l.max(0.0))
    }

    /// Negative semidefinite part `Γ₋`.
    pub fn minus(&self) -> DMatrix<f64> {
        self.dense_part(|l| l.min(0.0))
    }
}

/// Full eigendecomposition of an explicit symmetric matrix.
pub fn split_gamma(gamma: &DMatrix<f64>) -> Result<SplitPenalty> {
    if gamma.nrows() != gamma.ncols() {
        return Err(Error::DimensionMismatch {
            expected: gamma.nrows(),
            actual: gamma.ncols(),
            context: "square penalty matrix",
        });
    }
    let eig = SymmetricEigen::try_new(gamma.clone(), 1e-14, 0).ok_or(Error::Eigen)?;
    if eig.eigenvalues.iter().any(|l| !l.is_finite()) {
        return Err(Error::Eigen);
    }
    Ok(SplitPenalty {
        eigenvalues: eig.eigenvalues,
        basis: Basis::Full(eig.eigenvectors),
        dim: gamma.nrows(),
    })
}

impl CrossProductPenalty {
    /// Split exploiting `Γ = ρ T ⊗ 1 1ᵀ`: only the `P x P` position pattern
    /// is decomposed. Limited to [`EXPLICIT_LIMIT`] positions.
    pub fn split(&self) -> Result<SplitPenalty> {
        let p = self.positions;
        if p > EXPLICIT_LIMIT {
            return Err(Error::TooLarge(p, EXPLICIT_LIMIT));
        }
        let scale = self.weight * self.atoms as f64;
        let (eigenvalues, vectors) = if self.is_zero() {
            (DVector::zeros(0), DMatrix::zeros(p, 0))
        } else {
            let t = DMatrix::from_fn(p, p, |a, b| {
                let d = a.abs_diff(b);
                if d > 0 && d <= self.nmin {
                    1.0
                } else {
                    0.0
                }
            });
            let eig = SymmetricEigen::try_new(t, 1e-14, 0).ok_or(Error::Eigen)?;
            (eig.eigenvalues * scale, eig.eigenvectors)
        };
        if eigenvalues.iter().any(|l| !l.is_finite()) {
            return Err(Error::Eigen);
        }
        Ok(SplitPenalty {
            eigenvalues,
            basis: Basis::Kronecker {
                vectors,
                atoms: self.atoms,
            },
            dim: self.dim(),
        })
    }
}
