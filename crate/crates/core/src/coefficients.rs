use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Coefficients in block layout: `positions` blocks of `atoms` values each.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientVector {
    atoms: usize,
    values: Vec<f64>,
}

impl CoefficientVector {
    pub fn new(atoms: usize, values: Vec<f64>) -> Result<Self> {
        if atoms == 0 || !values.len().is_multiple_of(atoms) {
            return Err(Error::DimensionMismatch {
                expected: atoms.max(1) * (values.len() / atoms.max(1)),
                actual: values.len(),
                context: "coefficient block layout",
            });
        }
        Ok(CoefficientVector { atoms, values })
    }

    pub fn zeros(atoms: usize, positions: usize) -> Self {
        CoefficientVector {
            atoms,
            values: vec![0.0; atoms * positions],
        }
    }

    pub fn atoms(&self) -> usize {
        self.atoms
    }

    pub fn positions(&self) -> usize {
        self.values.len() / self.atoms
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.values
    }

    /// All atom coefficients at position `p`.
    pub fn block(&self, p: usize) -> &[f64] {
        &self.values[p * self.atoms..(p + 1) * self.atoms]
    }

    pub fn get(&self, m: usize, p: usize) -> f64 {
        self.values[p * self.atoms + m]
    }

    pub fn set(&mut self, m: usize, p: usize, v: f64) {
        self.values[p * self.atoms + m] = v;
    }

    pub fn nonzeros(&self) -> usize {
        self.values.iter().filter(|v| **v != 0.0).count()
    }

    /// `(m, p, value)` for every non-zero entry, position-major.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.values
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(move |(i, &v)| (i % self.atoms, i / self.atoms, v))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn block_and_flat_views_agree() {
        let c = CoefficientVector::new(3, (0..12).map(f64::from).collect()).unwrap();
        assert_eq!(c.positions(), 4);
        assert_eq!(c.block(2), &[6.0, 7.0, 8.0]);
        assert_eq!(c.get(1, 3), 10.0);
        assert!(CoefficientVector::new(3, vec![0.0; 10]).is_err());
        let t: Vec<_> = CoefficientVector::new(2, vec![0.0, 1.5, 0.0, -2.0])
            .unwrap()
            .triplets()
            .collect();
        assert_eq!(t, vec![(1, 0, 1.5), (1, 1, -2.0)]);
    }
}
