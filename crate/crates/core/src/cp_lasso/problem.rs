//! Problem statements, cost functions and the convex surrogate.

use serde::{Deserialize, Serialize};

use super::gamma::{CrossProductPenalty, SplitPenalty};
use crate::dictionary::DictionaryOperator;
use crate::error::{invalid, Error, Result};

/// How the data fit enters the problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Formulation {
    /// minimize `1ᵀc + cᵀΓc` subject to `‖y - Φβ‖ <= ξ`.
    Constrained { xi: f64 },
    /// minimize `(1/2N) ‖y - Φβ‖² + λ 1ᵀc + cᵀΓc`.
    Penalized { lambda: f64 },
}

/// Cross-products LASSO in the lifted `(β, c)` variables, with `|β_k| <= c_k`.
#[derive(Debug, Clone, Copy)]
pub struct CpLassoProblem<'a> {
    pub op: &'a DictionaryOperator,
    pub target: &'a [f64],
    pub formulation: Formulation,
    pub gamma: CrossProductPenalty,
}

impl<'a> CpLassoProblem<'a> {
    pub fn new(
        op: &'a DictionaryOperator,
        target: &'a [f64],
        formulation: Formulation,
        gamma: CrossProductPenalty,
    ) -> Result<Self> {
        if target.len() != op.n_samples() {
            return Err(Error::DimensionMismatch {
                expected: op.n_samples(),
                actual: target.len(),
                context: "target length vs operator",
            });
        }
        if gamma.dim() != op.len() || gamma.atoms() != op.n_atoms() {
            return Err(Error::DimensionMismatch {
                expected: op.len(),
                actual: gamma.dim(),
                context: "penalty size vs coefficient count",
            });
        }
        match formulation {
            Formulation::Constrained { xi } if !(xi >= 0.0 && xi.is_finite()) => {
                return Err(invalid("xi", format!("{xi} must be non-negative")))
            }
            Formulation::Penalized { lambda } if !(lambda > 0.0 && lambda.is_finite()) => {
                return Err(invalid("lambda", format!("{lambda} must be positive")))
            }
            _ => {}
        }
        Ok(CpLassoProblem {
            op,
            target,
            formulation,
            gamma,
        })
    }

    /// Weight of `1ᵀc` in the objective.
    pub fn kappa(&self) -> f64 {
        match self.formulation {
            Formulation::Constrained { .. } => 1.0,
            Formulation::Penalized { lambda } => lambda,
        }
    }

    pub fn residual_norm(&self, beta: &[f64]) -> Result<f64> {
        let fit = self.op.apply(beta)?;
        Ok(self
            .target
            .iter()
            .zip(&fit)
            .map(|(y, f)| (y - f) * (y - f))
            .sum::<f64>()
            .sqrt())
    }

    /// Data term of the objective (zero in the constrained form).
    pub fn data_term(&self, beta: &[f64]) -> Result<f64> {
        match self.formulation {
            Formulation::Constrained { .. } => Ok(0.0),
            Formulation::Penalized { .. } => {
                let r = self.residual_norm(beta)?;
                Ok(r * r / (2.0 * self.target.len() as f64))
            }
        }
    }

    /// Non-convex objective at `(β, c)`.
    pub fn objective(&self, beta: &[f64], c: &[f64]) -> Result<f64> {
        Ok(self.data_term(beta)? + self.kappa() * c.iter().sum::<f64>() + self.gamma.quad(c))
    }
}

fn fidelity(op: &DictionaryOperator, target: &[f64], beta: &[f64]) -> Result<f64> {
    let fit = op.apply(beta)?;
    Ok(target
        .iter()
        .zip(&fit)
        .map(|(y, f)| (y - f) * (y - f))
        .sum::<f64>()
        / (2.0 * target.len() as f64))
}

/// `(1/2N) ‖z - Φβ‖² + λ ‖β‖₁ + ρ · #(ordered pairs of non-zeros within N_min)`.
pub fn exact_cost(
    beta: &[f64],
    op: &DictionaryOperator,
    target: &[f64],
    lambda: f64,
    gamma: &CrossProductPenalty,
) -> Result<f64> {
    let l1: f64 = beta.iter().map(|v| v.abs()).sum();
    Ok(fidelity(op, target, beta)?
        + lambda * l1
        + gamma.weight() * gamma.violating_pairs(beta) as f64)
}

/// `(1/2N) ‖z - Φβ‖² + λ ‖β‖₁ + |β|ᵀ Γ |β|`.
pub fn approx_cost(
    beta: &[f64],
    op: &DictionaryOperator,
    target: &[f64],
    lambda: f64,
    gamma: &CrossProductPenalty,
) -> Result<f64> {
    let l1: f64 = beta.iter().map(|v| v.abs()).sum();
    Ok(fidelity(op, target, beta)? + lambda * l1 + gamma.quad_abs(beta))
}

/// Convex over-estimator of `κ 1ᵀc + cᵀΓc` around `c₀`, with the concave
/// part `cᵀΓ₋c` replaced by its tangent plane:
///
/// ```text
/// f̃(c) = κ 1ᵀc + cᵀΓ₊c + c₀ᵀΓ₋c₀ + 2 c₀ᵀΓ₋ (c - c₀)
/// ```
#[derive(Debug, Clone)]
pub struct Surrogate<'s> {
    split: &'s SplitPenalty,
    gamma: CrossProductPenalty,
    kappa: f64,
    c0: Vec<f64>,
    minus_c0: Vec<f64>,
    offset: f64,
}

impl<'s> Surrogate<'s> {
    pub fn new(
        split: &'s SplitPenalty,
        gamma: CrossProductPenalty,
        kappa: f64,
        c0: &[f64],
    ) -> Self {
        let minus_c0 = split.apply_spectral(c0, |l| l.min(0.0));
        let offset = -dot(c0, &minus_c0);
        Surrogate {
            split,
            gamma,
            kappa,
            c0: c0.to_vec(),
            minus_c0,
            offset,
        }
    }

    pub fn reference(&self) -> &[f64] {
        &self.c0
    }

    /// `Γ₋c₀`.
    pub fn minus_c0(&self) -> &[f64] {
        &self.minus_c0
    }

    pub fn value(&self, c: &[f64]) -> f64 {
        let plus_c = self.split.apply_spectral(c, |l| l.max(0.0));
        self.kappa * c.iter().sum::<f64>()
            + dot(c, &plus_c)
            + 2.0 * dot(&self.minus_c0, c)
            + self.offset
    }

    pub fn gradient(&self, c: &[f64]) -> Vec<f64> {
        let plus_c = self.split.apply_spectral(c, |l| l.max(0.0));
        plus_c
            .iter()
            .zip(&self.minus_c0)
            .map(|(p, m)| self.kappa + 2.0 * p + 2.0 * m)
            .collect()
    }

    /// The function being approximated, `κ 1ᵀc + cᵀΓc`.
    pub fn exact(&self, c: &[f64]) -> f64 {
        self.kappa * c.iter().sum::<f64>() + self.gamma.quad(c)
    }

    pub fn exact_gradient(&self, c: &[f64]) -> Vec<f64> {
        self.gamma
            .mul(c)
            .iter()
            .map(|g| self.kappa + 2.0 * g)
            .collect()
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cp_lasso::build_gamma;
    use crate::dictionary::BoundaryMode;

    fn op(n: usize) -> DictionaryOperator {
        DictionaryOperator::from_kernels(vec![vec![0.5, 1.0, 0.5]], n, 1, BoundaryMode::Interior)
            .unwrap()
    }

    #[test]
    fn costs_of_zero_are_fidelity_only() {
        let op = op(10);
        let z: Vec<f64> = (0..10).map(|i| i as f64 * 0.1).collect();
        let g = build_gamma(1, 10, 2, 5.0).unwrap();
        let fid = z.iter().map(|v| v * v).sum::<f64>() / 20.0;
        assert!((exact_cost(&[0.0; 10], &op, &z, 0.3, &g).unwrap() - fid).abs() < 1e-15);
        assert!((approx_cost(&[0.0; 10], &op, &z, 0.3, &g).unwrap() - fid).abs() < 1e-15);
    }

    #[test]
    fn adjacent_pair_costs() {
        let op = op(10);
        let z = vec![0.0; 10];
        let g = build_gamma(1, 10, 1, 1.0).unwrap();
        let mut b = vec![0.0; 10];
        b[5] = 2.0;
        b[6] = 3.0;
        let fid = fidelity(&op, &z, &b).unwrap();
        assert!((approx_cost(&b, &op, &z, 0.0, &g).unwrap() - fid - 12.0).abs() < 1e-12);
        assert!((exact_cost(&b, &op, &z, 0.0, &g).unwrap() - fid - 2.0).abs() < 1e-12);
    }

    #[test]
    fn surrogate_touches_at_reference() {
        let g = build_gamma(2, 6, 2, 1.3).unwrap();
        let split = g.split().unwrap();
        let c0: Vec<f64> = (0..12).map(|i| 0.1 * (i % 5) as f64).collect();
        let s = Surrogate::new(&split, g, 0.7, &c0);
        assert!((s.value(&c0) - s.exact(&c0)).abs() < 1e-12);
        for (a, b) in s.gradient(&c0).iter().zip(s.exact_gradient(&c0)) {
            assert!((a - b).abs() < 1e-12);
        }
        let c: Vec<f64> = (0..12).map(|i| 0.3 * ((i * 7) % 4) as f64).collect();
        assert!(s.value(&c) >= s.exact(&c) - 1e-12);
    }

    #[test]
    fn validates_shapes() {
        let op = op(10);
        let z = vec![0.0; 10];
        let g = build_gamma(1, 9, 1, 1.0).unwrap();
        assert!(CpLassoProblem::new(&op, &z, Formulation::Constrained { xi: 1.0 }, g).is_err());
        let g = build_gamma(1, 10, 1, 1.0).unwrap();
        assert!(CpLassoProblem::new(&op, &z, Formulation::Constrained { xi: -1.0 }, g).is_err());
        assert!(CpLassoProblem::new(&op, &z, Formulation::Penalized { lambda: 0.0 }, g).is_err());
        assert!(
            CpLassoProblem::new(&op, &z[..5], Formulation::Penalized { lambda: 1.0 }, g).is_err()
        );
    }
}
