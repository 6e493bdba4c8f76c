//! ℓ₁-regularized least squares over a dictionary operator.
//!
//! Minimizes `(1/2N) ‖z - Φβ‖² + λ ‖β‖₁` with a monotone accelerated proximal
//! gradient method (backtracking, restart on objective increase). Once the
//! support settles, a least-squares solve on the support with fixed signs is
//! tried; it is kept only if it is sign consistent and improves the iterate.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::coefficients::CoefficientVector;
use crate::dictionary::DictionaryOperator;
use crate::error::{invalid, Error, Result};

pub const DEFAULT_MAX_ITER: usize = 5000;
pub const DEFAULT_TOL: f64 = 1e-6;
const CHECK_EVERY: usize = 10;
const POLISH_MAX_SUPPORT: usize = 600;

#[derive(Debug, Clone, Copy)]
pub struct LassoProblem<'a> {
    pub op: &'a DictionaryOperator,
    pub target: &'a [f64],
    pub lambda: f64,
    pub max_iter: usize,
    /// Relative KKT tolerance: stop once the residual is `<= tol * lambda`.
    pub tol: f64,
}

impl<'a> LassoProblem<'a> {
    pub fn new(op: &'a DictionaryOperator, target: &'a [f64], lambda: f64) -> Result<Self> {
        let p = LassoProblem {
            op,
            target,
            lambda,
            max_iter: DEFAULT_MAX_ITER,
            tol: DEFAULT_TOL,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_max_iter(mut self, max_iter: usize) -> Self {
        self.max_iter = max_iter;
        self
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(invalid(
                "lambda",
                format!("{} must be non-negative", self.lambda),
            ));
        }
        if !(self.tol > 0.0) {
            return Err(invalid("tol", "must be positive"));
        }
        if self.target.len() != self.op.n_samples() {
            return Err(Error::DimensionMismatch {
                expected: self.op.n_samples(),
                actual: self.target.len(),
                context: "target length vs operator",
            });
        }
        Ok(())
    }

    fn n(&self) -> f64 {
        self.target.len() as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverReport {
    pub iterations: usize,
    pub converged: bool,
    /// Objective after every iteration.
    pub objective_trace: Vec<f64>,
    pub kkt_residual: f64,
    /// Final step-size constant.
    pub lipschitz: f64,
}

/// `(1/2N) ‖z - Φβ‖² + λ ‖β‖₁`.
pub fn lasso_objective(beta: &[f64], p: &LassoProblem) -> Result<f64> {
    let fit = p.op.apply(beta)?;
    Ok(objective_from_fit(beta, &fit, p))
}

fn objective_from_fit(beta: &[f64], fit: &[f64], p: &LassoProblem) -> f64 {
    fidelity(fit, p) + p.lambda * l1(beta)
}

fn fidelity(fit: &[f64], p: &LassoProblem) -> f64 {
    p.target
        .iter()
        .zip(fit)
        .map(|(z, f)| (z - f) * (z - f))
        .sum::<f64>()
        / (2.0 * p.n())
}

fn l1(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).sum()
}

/// `‖Φᵀz / N‖∞`, the smallest penalty with an all-zero solution.
pub fn lambda_max(op: &DictionaryOperator, target: &[f64]) -> Result<f64> {
    let c = op.adjoint(target)?;
    Ok(c.iter().fold(0.0f64, |m, v| m.max(v.abs())) / target.len() as f64)
}

/// Largest violation of the optimality conditions at `beta`.
pub fn kkt_residual(beta: &[f64], p: &LassoProblem) -> Result<f64> {
    let fit = p.op.apply(beta)?;
    let mut corr = vec![0.0; p.op.len()];
    Ok(kkt_from_fit(beta, &fit, p, &mut corr))
}

fn kkt_from_fit(beta: &[f64], fit: &[f64], p: &LassoProblem, corr: &mut [f64]) -> f64 {
    let r: Vec<f64> = p.target.iter().zip(fit).map(|(z, f)| z - f).collect();
    p.op.adjoint_into(&r, corr);
    let n = p.n();
    beta.iter()
        .zip(corr.iter())
        .map(|(&b, &c)| {
            let g = c / n;
            if b == 0.0 {
                (g.abs() - p.lambda).max(0.0)
            } else {
                (g - p.lambda * b.signum()).abs()
            }
        })
        .fold(0.0, f64::max)
}

fn soft(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

fn support(beta: &[f64]) -> Vec<usize> {
    (0..beta.len()).filter(|&i| beta[i] != 0.0).collect()
}

/// Least-squares refit on `support` with the signs of `beta` held fixed.
fn polish(beta: &[f64], support: &[usize], p: &LassoProblem) -> Option<Vec<f64>> {
    let s = support.len();
    if s == 0 {
        return None;
    }
    let mut gram = DMatrix::zeros(s, s);
    for a in 0..s {
        for b in a..s {
            let v = p.op.column_dot(support[a], support[b]);
            gram[(a, b)] = v;
            gram[(b, a)] = v;
        }
    }
    let n = p.n();
    let rhs = DVector::from_iterator(
        s,
        support.iter().map(|&j| {
            let (start, col) = p.op.column(j);
            let zc: f64 = col.iter().zip(&p.target[start..]).map(|(a, b)| a * b).sum();
            zc - n * p.lambda * beta[j].signum()
        }),
    );
    let sol = gram.cholesky()?.solve(&rhs);
    let mut out = vec![0.0; beta.len()];
    for (k, &j) in support.iter().enumerate() {
        if sol[k].signum() != beta[j].signum() || !sol[k].is_finite() {
            return None;
        }
        out[j] = sol[k];
    }
    Some(out)
}

/// Solves the problem from zero or from `warm_start`.
///
/// Running out of iterations is not an error: the report is flagged
/// `converged = false` and the best iterate is returned.
pub fn solve_lasso(
    p: &LassoProblem,
    warm_start: Option<&[f64]>,
) -> Result<(CoefficientVector, SolverReport)> {
    p.validate()?;
    let op = p.op;
    let dim = op.len();
    let n = p.n();
    let mut x = match warm_start {
        Some(w) if w.len() != dim => {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: w.len(),
                context: "warm start",
            })
        }
        Some(w) => w.to_vec(),
        None => vec![0.0; dim],
    };
    let mut corr = vec![0.0; dim];
    let mut fit_x = op.apply(&x)?;
    let mut f_x = objective_from_fit(&x, &fit_x, p);
    let target_kkt = if p.lambda > 0.0 {
        p.tol * p.lambda
    } else {
        p.tol * lambda_max(op, p.target)?.max(f64::MIN_POSITIVE)
    };
    let mut kkt = kkt_from_fit(&x, &fit_x, p, &mut corr);
    let mut lip = (op.norm_squared(100) / n).max(f64::MIN_POSITIVE);
    let mut trace = Vec::new();
    let mut converged = kkt <= target_kkt;

    let mut y = x.clone();
    let mut fit_y = fit_x.clone();
    let mut t = 1.0f64;
    let mut cand = vec![0.0; dim];
    let mut fit_c = vec![0.0; op.n_samples()];
    let mut grad = vec![0.0; dim];
    let mut resid = vec![0.0; op.n_samples()];
    let mut last_support: Vec<usize> = Vec::new();
    let mut polished_support: Option<Vec<usize>> = None;
    let mut iterations = 0;

    while !converged && iterations < p.max_iter {
        iterations += 1;
        for ((r, z), f) in resid.iter_mut().zip(p.target).zip(&fit_y) {
            *r = z - f;
        }
        let f_y = resid.iter().map(|v| v * v).sum::<f64>() / (2.0 * n);
        op.adjoint_into(&resid, &mut grad);
        grad.iter_mut().for_each(|g| *g /= -n);
        let f_c = loop {
            let step = 1.0 / lip;
            for ((c, &yv), &g) in cand.iter_mut().zip(&y).zip(&grad) {
                *c = soft(yv - step * g, p.lambda * step);
            }
            op.apply_into(&cand, &mut fit_c);
            let f_c = fidelity(&fit_c, p);
            let mut lin = 0.0;
            let mut quad = 0.0;
            for ((&c, &yv), &g) in cand.iter().zip(&y).zip(&grad) {
                let d = c - yv;
                lin += g * d;
                quad += d * d;
            }
            let bound = f_y + lin + 0.5 * lip * quad;
            if f_c <= bound + 1e-12 * f_y.abs().max(f64::MIN_POSITIVE) {
                break f_c;
            }
            lip *= 2.0;
        };
        let obj_c = f_c + p.lambda * l1(&cand);
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let improved = obj_c <= f_x;
        // MFISTA: y = x_k + (t/t')(cand - x_k) + ((t-1)/t')(x_k - x_{k-1})
        let a = t / t_next;
        let b = (t - 1.0) / t_next;
        if improved {
            for i in 0..dim {
                let xn = cand[i];
                y[i] = xn + a * (cand[i] - xn) + b * (xn - x[i]);
                x[i] = xn;
            }
            for i in 0..fit_x.len() {
                let fx = fit_c[i];
                fit_y[i] = fx + b * (fx - fit_x[i]);
                fit_x[i] = fx;
            }
            f_x = obj_c;
            t = t_next;
        } else {
            // objective went up: restart momentum from the current iterate
            y.copy_from_slice(&x);
            fit_y.copy_from_slice(&fit_x);
            t = 1.0;
        }
        trace.push(f_x);

        if iterations % CHECK_EVERY == 0 || iterations == p.max_iter {
            kkt = kkt_from_fit(&x, &fit_x, p, &mut corr);
            if kkt <= target_kkt {
                converged = true;
                break;
            }
            let supp = support(&x);
            let stable = supp == last_support;
            let fresh = polished_support.as_ref() != Some(&supp);
            if stable && fresh && supp.len() <= POLISH_MAX_SUPPORT {
                if let Some(cand_x) = polish(&x, &supp, p) {
                    let fit = op.apply(&cand_x)?;
                    let obj = objective_from_fit(&cand_x, &fit, p);
                    if obj <= f_x {
                        x = cand_x;
                        fit_x = fit;
                        f_x = obj;
                        y.copy_from_slice(&x);
                        fit_y.copy_from_slice(&fit_x);
                        t = 1.0;
                        if let Some(last) = trace.last_mut() {
                            *last = f_x;
                        }
                        kkt = kkt_from_fit(&x, &fit_x, p, &mut corr);
                        if kkt <= target_kkt {
                            converged = true;
                            break;
                        }
                    }
                }
                polished_support = Some(supp.clone());
            }
            last_support = supp;
        }
    }
    if !converged || iterations == 0 {
        kkt = kkt_from_fit(&x, &fit_x, p, &mut corr);
        converged = kkt <= target_kkt;
    }
    let report = SolverReport {
        iterations,
        converged,
        objective_trace: trace,
        kkt_residual: kkt,
        lipschitz: lip,
    };
    Ok((CoefficientVector::new(op.n_atoms(), x)?, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dictionary::BoundaryMode;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_instance(seed: u64, n: usize, m: usize) -> (DictionaryOperator, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let kernels = (0..m)
            .map(|_| (0..5).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let op = DictionaryOperator::from_kernels(kernels, n, 2, BoundaryMode::Interior).unwrap();
        let z = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        (op, z)
    }

    #[test]
    fn zero_solution_above_lambda_max() {
        let (op, z) = random_instance(1, 40, 2);
        let lmax = lambda_max(&op, &z).unwrap();
        let p = LassoProblem::new(&op, &z, lmax * 1.0001).unwrap();
        let (b, r) = solve_lasso(&p, None).unwrap();
        assert!(b.as_slice().iter().all(|v| *v == 0.0));
        assert!(r.converged);
        assert_eq!(kkt_residual(b.as_slice(), &p).unwrap(), 0.0);
    }

    #[test]
    fn identity_atom_without_penalty_reproduces_target() {
        let op = DictionaryOperator::from_kernels(vec![vec![1.0]], 25, 0, BoundaryMode::Interior)
            .unwrap();
        let z: Vec<f64> = (0..25).map(|i| (i as f64 * 0.3).cos()).collect();
        let p = LassoProblem::new(&op, &z, 0.0).unwrap();
        let (b, r) = solve_lasso(&p, None).unwrap();
        assert!(r.converged);
        for (a, e) in b.as_slice().iter().zip(&z) {
            assert!((a - e).abs() < 1e-12);
        }
    }

    #[test]
    fn objective_of_zero_is_half_mean_square() {
        let (op, z) = random_instance(2, 30, 1);
        let p = LassoProblem::new(&op, &z, 0.1).unwrap();
        let expected = z.iter().map(|v| v * v).sum::<f64>() / 60.0;
        assert!((lasso_objective(&vec![0.0; op.len()], &p).unwrap() - expected).abs() < 1e-15);
    }

    #[test]
    fn converges_with_monotone_trace() {
        for seed in 0..5 {
            let (op, z) = random_instance(seed, 60, 2);
            let lmax = lambda_max(&op, &z).unwrap();
            let p = LassoProblem::new(&op, &z, 0.05 * lmax).unwrap();
            let (b, r) = solve_lasso(&p, None).unwrap();
            assert!(r.converged, "seed {seed}: kkt {}", r.kkt_residual);
            assert!(r.kkt_residual <= 1e-6 * p.lambda);
            for w in r.objective_trace.windows(2) {
                assert!(w[1] <= w[0] + 1e-15 * w[0].abs());
            }
            let again = kkt_residual(b.as_slice(), &p).unwrap();
            assert!(again <= 1e-6 * p.lambda);
        }
    }

    #[test]
    fn warm_start_at_optimum_returns_immediately() {
        let (op, z) = random_instance(9, 50, 1);
        let lmax = lambda_max(&op, &z).unwrap();
        let p = LassoProblem::new(&op, &z, 0.1 * lmax).unwrap();
        let (b, _) = solve_lasso(&p, None).unwrap();
        let (b2, r2) = solve_lasso(&p, Some(b.as_slice())).unwrap();
        assert_eq!(r2.iterations, 0);
        assert_eq!(b, b2);
        assert!(solve_lasso(&p, Some(&[0.0; 3])).is_err());
    }

    #[test]
    fn exhausted_budget_is_flagged_not_raised() {
        let (op, z) = random_instance(4, 80, 3);
        let lmax = lambda_max(&op, &z).unwrap();
        let p = LassoProblem::new(&op, &z, 1e-4 * lmax)
            .unwrap()
            .with_max_iter(3);
        let (_, r) = solve_lasso(&p, None).unwrap();
        assert!(!r.converged);
        assert_eq!(r.iterations, 3);
    }

    #[test]
    fn rejects_bad_inputs() {
        let (op, z) = random_instance(0, 20, 1);
        assert!(LassoProblem::new(&op, &z, -1.0).is_err());
        assert!(LassoProblem::new(&op, &z[..10], 1.0).is_err());
    }
}
