//! Successive convex approximation for the cross-products LASSO.

use serde::{Deserialize, Serialize};

use super::admm::{InnerOptions, InnerSolver};
use super::problem::{CpLassoProblem, Formulation};
use crate::coefficients::CoefficientVector;
use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaOptions {
    pub max_outer: usize,
    /// Stop once `|Δcost| <= tol * (1 + |cost|)`.
    pub tol: f64,
    pub inner: InnerOptions,
    /// Clean up the relaxed solution against the exact pair count.
    pub prune: bool,
}

impl Default for ScaOptions {
    fn default() -> Self {
        ScaOptions {
            max_outer: 50,
            tol: 1e-6,
            inner: InnerOptions::default(),
            prune: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaReport {
    /// Objective after each accepted outer iteration; non-increasing.
    pub cost_trace: Vec<f64>,
    pub outer_iterations: usize,
    pub inner_iterations: Vec<usize>,
    pub converged: bool,
    /// Set when an outer step was rejected for raising the cost.
    pub stalled: bool,
    /// Final `c`, the magnitude bounds.
    pub bounds: Vec<f64>,
    /// Coefficients dropped by the clean-up pass.
    pub pruned: usize,
}

/// Runs the SCA loop from `c₀ = 0`.
///
/// Each outer iteration solves the convex surrogate around the previous
/// bounds `c` and re-centres on its solution. A step that would raise the
/// objective (possible only through inexact inner solves) is rejected and
/// the best iterate so far is returned.
///
/// The relaxed penalty `|β_k||β_l|` is cheap for small coefficients, so the
/// loop can end with minor entries inside the refractory band. With
/// `opts.prune` those are dropped one at a time while that lowers the exact
/// cost, and in the penalized form the surviving support is refitted. The
/// trace covers the SCA iterations only.
pub fn solve_sca(
    problem: &CpLassoProblem,
    opts: &ScaOptions,
) -> Result<(CoefficientVector, ScaReport)> {
    if opts.max_outer == 0 {
        return Err(invalid("sca-max-outer", "must be at least 1"));
    }
    let split = problem.gamma.split()?;
    let solver = InnerSolver::new(*problem, &split)?;
    let n = problem.op.len();
    let mut c0 = vec![0.0; n];
    let mut best_beta = vec![0.0; n];
    let mut trace: Vec<f64> = Vec::new();
    let mut inner_iterations = Vec::new();
    let mut warm = None;
    let mut converged = false;
    let mut stalled = false;

    for _ in 0..opts.max_outer {
        let (sol, state) = solver.solve(&c0, &opts.inner, warm.take())?;
        inner_iterations.push(sol.iterations);
        let cost = problem.objective(&sol.beta, &sol.c)?;
        if let Some(&prev) = trace.last() {
            if cost > prev {
                stalled = true;
                converged = (cost - prev).abs() <= opts.tol * (1.0 + prev.abs());
                break;
            }
        }
        let delta = trace.last().map(|&prev| (prev - cost).abs());
        trace.push(cost);
        best_beta = sol.beta;
        c0 = sol.c;
        warm = Some(state);
        if !split.has_negative_part() {
            // the surrogate is exact, so one solve is the answer
            converged = true;
            break;
        }
        if let Some(d) = delta {
            if d <= opts.tol * (1.0 + cost.abs()) {
                converged = true;
                break;
            }
        }
    }
    let mut pruned = 0;
    if opts.prune {
        pruned = prune_violations(problem, &mut best_beta)?;
        if let Formulation::Penalized { lambda } = problem.formulation {
            refit_support(problem, lambda, &mut best_beta)?;
        }
        c0 = best_beta.iter().map(|v| v.abs()).collect();
    }
    let report = ScaReport {
        outer_iterations: inner_iterations.len(),
        cost_trace: trace,
        inner_iterations,
        converged,
        stalled,
        bounds: c0,
        pruned,
    };
    Ok((
        CoefficientVector::new(problem.op.n_atoms(), best_beta)?,
        report,
    ))
}

fn residual(problem: &CpLassoProblem, beta: &[f64]) -> Result<Vec<f64>> {
    let fit = problem.op.apply(beta)?;
    Ok(problem
        .target
        .iter()
        .zip(&fit)
        .map(|(y, f)| y - f)
        .collect())
}

fn column_residual_dot(problem: &CpLassoProblem, k: usize, r: &[f64]) -> f64 {
    let (start, col) = problem.op.column(k);
    col.iter().zip(&r[start..]).map(|(a, b)| a * b).sum()
}

fn add_column(problem: &CpLassoProblem, k: usize, scale: f64, r: &mut [f64]) {
    let (start, col) = problem.op.column(k);
    for (v, c) in r[start..].iter_mut().zip(col) {
        *v += scale * c;
    }
}

/// Greedy removal of band violators, best exact-cost gain first.
fn prune_violations(problem: &CpLassoProblem, beta: &mut [f64]) -> Result<usize> {
    let gamma = &problem.gamma;
    let (atoms, positions, nmin) = (gamma.atoms(), gamma.positions(), gamma.nmin());
    if nmin == 0 || gamma.weight() == 0.0 {
        return Ok(0);
    }
    let n = problem.target.len() as f64;
    let kappa = problem.kappa();
    let mut r = residual(problem, beta)?;
    let mut r2: f64 = r.iter().map(|v| v * v).sum();
    let mut counts = vec![0usize; positions];
    for (k, b) in beta.iter().enumerate() {
        if *b != 0.0 {
            counts[k / atoms] += 1;
        }
    }
    let mut removed = 0;
    loop {
        let mut best: Option<(f64, usize, f64)> = None;
        for k in 0..beta.len() {
            let b = beta[k];
            if b == 0.0 {
                continue;
            }
            let p = k / atoms;
            let lo = p.saturating_sub(nmin);
            let hi = (p + nmin).min(positions - 1);
            let neighbours: usize = counts[lo..=hi].iter().sum::<usize>() - counts[p];
            if neighbours == 0 {
                continue;
            }
            let new_r2 = r2
                + 2.0 * b * column_residual_dot(problem, k, &r)
                + b * b * problem.op.column_dot(k, k);
            let data_change = match problem.formulation {
                Formulation::Penalized { .. } => (new_r2 - r2) / (2.0 * n),
                Formulation::Constrained { xi } => {
                    if new_r2.max(0.0).sqrt() > xi {
                        continue;
                    }
                    0.0
                }
            };
            let gain = 2.0 * gamma.weight() * neighbours as f64 + kappa * b.abs() - data_change;
            if gain > 0.0 && best.is_none_or(|(g, _, _)| gain > g) {
                best = Some((gain, k, new_r2));
            }
        }
        let Some((_, k, new_r2)) = best else { break };
        add_column(problem, k, beta[k], &mut r);
        r2 = new_r2;
        counts[k / atoms] -= 1;
        beta[k] = 0.0;
        removed += 1;
    }
    Ok(removed)
}

/// Coordinate descent for the plain LASSO restricted to the current support.
/// Each sweep lowers the data and `ℓ1` terms and the pair count can only
/// fall, so the exact cost never rises.
fn refit_support(problem: &CpLassoProblem, lambda: f64, beta: &mut [f64]) -> Result<()> {
    let support: Vec<usize> = (0..beta.len()).filter(|&k| beta[k] != 0.0).collect();
    if support.is_empty() {
        return Ok(());
    }
    let threshold = problem.target.len() as f64 * lambda;
    let norms: Vec<f64> = support
        .iter()
        .map(|&k| problem.op.column_dot(k, k))
        .collect();
    let scale = beta.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut r = residual(problem, beta)?;
    for _ in 0..1000 {
        let mut change = 0.0f64;
        for (&k, &nrm) in support.iter().zip(&norms) {
            if nrm == 0.0 {
                continue;
            }
            let old = beta[k];
            let z = column_residual_dot(problem, k, &r) + nrm * old;
            let new = if z > threshold {
                (z - threshold) / nrm
            } else if z < -threshold {
                (z + threshold) / nrm
            } else {
                0.0
            };
            if new != old {
                add_column(problem, k, old - new, &mut r);
                beta[k] = new;
                change = change.max((new - old).abs());
            }
        }
        if change <= 1e-12 * scale.max(1e-300) {
            break;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cp_lasso::{build_gamma, Formulation};
    use crate::dictionary::{BoundaryMode, DictionaryOperator};

    #[test]
    fn zero_penalty_finishes_in_one_step() {
        let op = DictionaryOperator::from_kernels(
            vec![vec![0.5, 1.0, 0.5]],
            12,
            1,
            BoundaryMode::Interior,
        )
        .unwrap();
        let mut b = vec![0.0; 12];
        b[4] = 1.0;
        let y = op.apply(&b).unwrap();
        let g = build_gamma(1, 12, 2, 0.0).unwrap();
        let p = CpLassoProblem::new(&op, &y, Formulation::Penalized { lambda: 0.01 }, g).unwrap();
        let (_, r) = solve_sca(&p, &ScaOptions::default()).unwrap();
        assert_eq!(r.outer_iterations, 1);
        assert!(r.converged);
    }

    #[test]
    fn trace_is_monotone_and_near_pairs_vanish() {
        let op = DictionaryOperator::from_kernels(
            vec![vec![0.4, 1.0, 0.4]],
            14,
            1,
            BoundaryMode::Interior,
        )
        .unwrap();
        let mut b = vec![0.0; 14];
        b[3] = 1.0;
        b[4] = 0.3;
        b[10] = 0.8;
        let y = op.apply(&b).unwrap();
        let g = build_gamma(1, 14, 3, 5.0).unwrap();
        let p = CpLassoProblem::new(&op, &y, Formulation::Penalized { lambda: 0.005 }, g).unwrap();
        let (beta, r) = solve_sca(&p, &ScaOptions::default()).unwrap();
        for w in r.cost_trace.windows(2) {
            assert!(w[1] <= w[0]);
        }
        assert_eq!(
            g.violating_pairs(beta.as_slice()),
            0,
            "{:?}",
            beta.as_slice()
        );
    }
}
