//! Dense log-barrier interior-point solver for small surrogate problems.
//!
//! Slow and memory-hungry (`O(n³)` per Newton step on the `2n` lifted
//! variables) but independent of the splitting solver, so it serves as a
//! reference on tiny instances.

use nalgebra::{DMatrix, DVector};

use super::gamma::SplitPenalty;
use super::problem::{CpLassoProblem, Formulation, Surrogate};
use crate::error::{Error, Result};

/// Largest coefficient count accepted by [`solve_inner_barrier`].
pub const BARRIER_LIMIT: usize = 200;

struct Dense<'a> {
    phi: DMatrix<f64>,
    y: DVector<f64>,
    gamma: DMatrix<f64>,
    plus: DMatrix<f64>,
    lin: DVector<f64>,
    kappa: f64,
    form: Formulation,
    n: usize,
    surrogate: Surrogate<'a>,
}

impl Dense<'_> {
    fn objective(&self, x: &DVector<f64>) -> f64 {
        let n = self.n;
        let beta = x.rows(0, n);
        let c = x.rows(n, n);
        let mut f = self.kappa * c.sum() + c.dot(&(&self.plus * c)) + self.lin.dot(&c);
        if let Formulation::Penalized { .. } = self.form {
            let r = &self.y - &self.phi * beta;
            f += r.norm_squared() / (2.0 * self.y.len() as f64);
        }
        f
    }

    /// Barrier value, or `None` outside the strict interior.
    fn barrier(&self, x: &DVector<f64>) -> Option<f64> {
        let n = self.n;
        let beta = x.rows(0, n);
        let c = x.rows(n, n);
        let gc = &self.gamma * c;
        let mut phi = 0.0;
        for k in 0..n {
            let (a, b, m) = (c[k] - beta[k], c[k] + beta[k], self.kappa + 2.0 * gc[k]);
            if a <= 0.0 || b <= 0.0 || m <= 0.0 {
                return None;
            }
            phi -= a.ln() + b.ln() + m.ln();
        }
        if let Formulation::Constrained { xi } = self.form {
            let r = &self.y - &self.phi * beta;
            let slack = xi * xi - r.norm_squared();
            if slack <= 0.0 {
                return None;
            }
            phi -= slack.ln();
        }
        Some(phi)
    }

    fn constraint_count(&self) -> f64 {
        let extra = matches!(self.form, Formulation::Constrained { .. }) as usize;
        (3 * self.n + extra) as f64
    }

    fn newton_system(&self, x: &DVector<f64>, t: f64) -> (DVector<f64>, DMatrix<f64>) {
        let n = self.n;
        let beta = x.rows(0, n).into_owned();
        let c = x.rows(n, n).into_owned();
        let mut grad = DVector::zeros(2 * n);
        let mut hess = DMatrix::zeros(2 * n, 2 * n);

        // objective
        let gc_obj = &self.plus * &c * 2.0 + &self.lin + DVector::repeat(n, self.kappa);
        grad.rows_mut(n, n).axpy(t, &gc_obj, 1.0);
        {
            let mut v = hess.view_mut((n, n), (n, n));
            v += &self.plus * (2.0 * t);
        }
        let ptp = self.phi.tr_mul(&self.phi);
        let resid = &self.y - &self.phi * &beta;
        if let Formulation::Penalized { .. } = self.form {
            let nf = self.y.len() as f64;
            grad.rows_mut(0, n)
                .axpy(-t / nf, &self.phi.tr_mul(&resid), 1.0);
            let mut v = hess.view_mut((0, 0), (n, n));
            v += &ptp * (t / nf);
        }

        // cone constraints
        for k in 0..n {
            let a = c[k] - beta[k];
            let b = c[k] + beta[k];
            grad[k] += 1.0 / a - 1.0 / b;
            grad[n + k] += -1.0 / a - 1.0 / b;
            let (ia, ib) = (1.0 / (a * a), 1.0 / (b * b));
            hess[(k, k)] += ia + ib;
            hess[(n + k, n + k)] += ia + ib;
            hess[(k, n + k)] += -ia + ib;
            hess[(n + k, k)] += -ia + ib;
        }

        // κ + 2Γc >= 0
        let gcv = &self.gamma * &c;
        for k in 0..n {
            let m = self.kappa + 2.0 * gcv[k];
            let row = self.gamma.row(k).transpose();
            grad.rows_mut(n, n).axpy(-2.0 / m, &row, 1.0);
            hess.view_mut((n, n), (n, n))
                .ger(4.0 / (m * m), &row, &row, 1.0);
        }

        // ‖y - Φβ‖² <= ξ²
        if let Formulation::Constrained { xi } = self.form {
            let slack = xi * xi - resid.norm_squared();
            let dg = self.phi.tr_mul(&resid) * 2.0;
            grad.rows_mut(0, n).axpy(-1.0 / slack, &dg, 1.0);
            let mut hb = hess.view_mut((0, 0), (n, n));
            hb.ger(1.0 / (slack * slack), &dg, &dg, 1.0);
            hb += &ptp * (2.0 / slack);
        }
        (grad, hess)
    }
}

/// Interior-point solution of the surrogate around `c0`.
///
/// Returns `(β, c, objective)`, where the objective is the surrogate value
/// plus the data term in the penalized form.
pub fn solve_inner_barrier(
    problem: &CpLassoProblem,
    split: &SplitPenalty,
    c0: &[f64],
) -> Result<(Vec<f64>, Vec<f64>, f64)> {
    let n = problem.op.len();
    if n > BARRIER_LIMIT {
        return Err(Error::TooLarge(n, BARRIER_LIMIT));
    }
    let rows = problem.op.to_dense();
    let samples = problem.op.n_samples();
    let phi = DMatrix::from_fn(samples, n, |i, j| rows[i][j]);
    let y = DVector::from_column_slice(problem.target);
    let surrogate = Surrogate::new(split, problem.gamma, problem.kappa(), c0);
    let lin = DVector::from_column_slice(surrogate.minus_c0()) * 2.0;
    let d = Dense {
        phi,
        y,
        gamma: problem.gamma.to_dense()?,
        plus: split.plus(),
        lin,
        kappa: problem.kappa(),
        form: problem.formulation,
        n,
        surrogate,
    };

    let beta0 = match problem.formulation {
        Formulation::Penalized { .. } => DVector::zeros(n),
        Formulation::Constrained { xi } => {
            let svd = d.phi.clone().svd(true, true);
            let b = svd
                .solve(&d.y, 1e-12)
                .map_err(|e| Error::Numerical(e.to_string()))?;
            let r = (&d.y - &d.phi * &b).norm();
            if r >= xi {
                return Err(Error::Infeasible { xi, distance: r });
            }
            // shrink towards zero while keeping strict feasibility
            let mut s = 1.0;
            while s > 1e-3 && (&d.y - &d.phi * (&b * (s * 0.5))).norm() < xi {
                s *= 0.5;
            }
            b * s
        }
    };
    let mut x = DVector::zeros(2 * n);
    x.rows_mut(0, n).copy_from(&beta0);
    for k in 0..n {
        x[n + k] = beta0[k].abs() + 1.0;
    }

    let m = d.constraint_count();
    let mut t = 1.0;
    while m / t > 1e-12 {
        for _ in 0..200 {
            let (grad, hess) = d.newton_system(&x, t);
            let step = match hess.clone().cholesky() {
                Some(ch) => -ch.solve(&grad),
                None => -hess
                    .lu()
                    .solve(&grad)
                    .ok_or_else(|| Error::Numerical("singular Newton system".into()))?,
            };
            let decrement = -grad.dot(&step);
            if decrement / 2.0 <= 1e-14 {
                break;
            }
            let f0 = t * d.objective(&x) + d.barrier(&x).expect("iterate is interior");
            let mut s = 1.0;
            loop {
                let cand = &x + &step * s;
                if let Some(b) = d.barrier(&cand) {
                    if t * d.objective(&cand) + b <= f0 - 0.25 * s * decrement {
                        x = cand;
                        break;
                    }
                }
                s *= 0.5;
                if s < 1e-14 {
                    break;
                }
            }
            if s < 1e-14 {
                break;
            }
        }
        t *= 10.0;
    }
    let beta = x.rows(0, n).iter().copied().collect::<Vec<_>>();
    let c = x.rows(n, n).iter().copied().collect::<Vec<_>>();
    let objective = problem.data_term(&beta)? + d.surrogate.value(&c);
    Ok((beta, c, objective))
}
