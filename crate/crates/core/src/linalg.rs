//! Banded symmetric positive definite factorization.

use crate::error::{Error, Result};

/// Lower band of a symmetric matrix, `bandwidth` sub-diagonals.
#[derive(Debug, Clone)]
pub struct BandedSpd {
    n: usize,
    bw: usize,
    // row i holds columns i-bw ..= i at offsets 0 ..= bw
    data: Vec<f64>,
}

impl BandedSpd {
    pub fn zeros(n: usize, bandwidth: usize) -> Self {
        let bw = bandwidth.min(n.saturating_sub(1));
        BandedSpd {
            n,
            bw,
            data: vec![0.0; n * (bw + 1)],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.bw
    }

    fn slot(&self, i: usize, j: usize) -> usize {
        i * (self.bw + 1) + (j + self.bw - i)
    }

    /// Entry `(i, j)`; either triangle.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        if i - j > self.bw {
            0.0
        } else {
            self.data[self.slot(i, j)]
        }
    }

    /// Adds to entry `(i, j)` (and its mirror); must lie in the band.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        debug_assert!(i - j <= self.bw);
        let s = self.slot(i, j);
        self.data[s] += v;
    }

    /// In-place Cholesky `A = L Lᵀ`.
    pub fn cholesky(mut self) -> Result<BandedCholesky> {
        let (n, bw) = (self.n, self.bw);
        for i in 0..n {
            let j0 = i.saturating_sub(bw);
            for j in j0..=i {
                let k0 = j0.max(j.saturating_sub(bw));
                let mut s = self.data[self.slot(i, j)];
                for k in k0..j {
                    s -= self.data[self.slot(i, k)] * self.data[self.slot(j, k)];
                }
                if i == j {
                    if !(s > 0.0) {
                        return Err(Error::Numerical(format!(
                            "banded matrix is not positive definite at row {i}"
                        )));
                    }
                    let sl = self.slot(i, i);
                    self.data[sl] = s.sqrt();
                } else {
                    let sl = self.slot(i, j);
                    self.data[sl] = s / self.data[self.slot(j, j)];
                }
            }
        }
        Ok(BandedCholesky { factor: self })
    }
}

#[derive(Debug, Clone)]
pub struct BandedCholesky {
    factor: BandedSpd,
}

impl BandedCholesky {
    /// Solves `A x = b` in place.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let f = &self.factor;
        let (n, bw) = (f.n, f.bw);
        for i in 0..n {
            let mut s = b[i];
            for k in i.saturating_sub(bw)..i {
                s -= f.data[f.slot(i, k)] * b[k];
            }
            b[i] = s / f.data[f.slot(i, i)];
        }
        for i in (0..n).rev() {
            let mut s = b[i];
            for k in i + 1..(i + bw + 1).min(n) {
                s -= f.data[f.slot(k, i)] * b[k];
            }
            b[i] = s / f.data[f.slot(i, i)];
        }
    }
}
