//! Operator-splitting solver for one convex surrogate problem.
//!
//! The lifted problem is split with copies `β = β̃`, `c = c̃` (cone
//! `|β̃_k| <= c̃_k`), `u = Φ'β` (data block) and `w = Γ'c` (monotonicity
//! block `κ + 2Γc >= 0`), where `Φ' = Φ/‖Φ‖` and `Γ' = Γ/‖Γ‖`. The `β`
//! update is a banded solve with `I + Φ'ᵀΦ'`, factored once; the `c` update
//! is diagonal in the eigenbasis of `Γ`. Returned iterates are the cone
//! copies, so they are exactly feasible for `|β| <= c` and carry exact zeros.

use serde::{Deserialize, Serialize};

use super::gamma::SplitPenalty;
use super::problem::{CpLassoProblem, Formulation, Surrogate};
use crate::dictionary::DictionaryOperator;
use crate::error::{Error, Result};
use crate::linalg::{BandedCholesky, BandedSpd};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InnerOptions {
    pub max_iter: usize,
    pub abs_tol: f64,
    pub rel_tol: f64,
}

impl Default for InnerOptions {
    fn default() -> Self {
        InnerOptions {
            max_iter: 20_000,
            abs_tol: 1e-9,
            rel_tol: 1e-7,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InnerSolution {
    pub beta: Vec<f64>,
    pub c: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub primal_residual: f64,
    pub dual_residual: f64,
    /// Surrogate objective (plus data term when penalized) at the solution.
    pub objective: f64,
    pub residual_norm: f64,
}

/// Splitting variables and scaled duals, reusable as a warm start.
#[derive(Debug, Clone)]
pub struct AdmmState {
    beta_t: Vec<f64>,
    c_t: Vec<f64>,
    u: Vec<f64>,
    w: Vec<f64>,
    mu_beta: Vec<f64>,
    mu_c: Vec<f64>,
    mu_u: Vec<f64>,
    mu_w: Vec<f64>,
    rho: f64,
}

impl AdmmState {
    fn zeros(n: usize, samples: usize) -> Self {
        AdmmState {
            beta_t: vec![0.0; n],
            c_t: vec![0.0; n],
            u: vec![0.0; samples],
            w: vec![0.0; n],
            mu_beta: vec![0.0; n],
            mu_c: vec![0.0; n],
            mu_u: vec![0.0; samples],
            mu_w: vec![0.0; n],
            rho: 1.0,
        }
    }
}

/// `min ‖y - Φβ‖` estimated through a tiny-ridge least-squares solve.
pub fn distance_to_range(op: &DictionaryOperator, target: &[f64]) -> Result<f64> {
    let scale = op.norm_squared(100).max(f64::MIN_POSITIVE);
    let gram = gram_band(op, 1.0 / scale, 1e-12)?;
    let mut rhs = op.adjoint(target)?;
    rhs.iter_mut().for_each(|v| *v /= scale);
    gram.solve_in_place(&mut rhs);
    let fit = op.apply(&rhs)?;
    Ok(target
        .iter()
        .zip(&fit)
        .map(|(y, f)| (y - f) * (y - f))
        .sum::<f64>()
        .sqrt())
}

/// Factor of `diag * I + scale * ΦᵀΦ`.
fn gram_band(op: &DictionaryOperator, scale: f64, diag: f64) -> Result<BandedCholesky> {
    let n = op.len();
    let bw = op.gram_bandwidth();
    let mut band = BandedSpd::zeros(n, bw);
    let bw = band.bandwidth();
    for a in 0..n {
        band.add(a, a, diag);
        for b in a.saturating_sub(bw)..=a {
            let v = op.column_dot(a, b);
            if v != 0.0 {
                band.add(a, b, scale * v);
            }
        }
    }
    band.cholesky()
}

fn project_cone(b: f64, c: f64) -> (f64, f64) {
    if b.abs() <= c {
        (b, c)
    } else if b.abs() <= -c {
        (0.0, 0.0)
    } else {
        let t = 0.5 * (b.abs() + c);
        (t * b.signum(), t)
    }
}

/// Reusable solver for the surrogate problems of one [`CpLassoProblem`].
pub struct InnerSolver<'a> {
    problem: CpLassoProblem<'a>,
    split: &'a SplitPenalty,
    phi_scale: f64,
    gamma_scale: f64,
    chol: BandedCholesky,
}

impl<'a> InnerSolver<'a> {
    pub fn new(problem: CpLassoProblem<'a>, split: &'a SplitPenalty) -> Result<Self> {
        if split.dim() != problem.op.len() {
            return Err(Error::DimensionMismatch {
                expected: problem.op.len(),
                actual: split.dim(),
                context: "split penalty size",
            });
        }
        if let Formulation::Constrained { xi } = problem.formulation {
            let distance = distance_to_range(problem.op, problem.target)?;
            if xi < distance * (1.0 - 1e-9) {
                return Err(Error::Infeasible { xi, distance });
            }
        }
        let phi_sq = problem.op.norm_squared(100).max(f64::MIN_POSITIVE);
        let chol = gram_band(problem.op, 1.0 / phi_sq, 1.0)?;
        let gamma_scale = if problem.gamma.is_zero() {
            1.0
        } else {
            problem.gamma.norm_bound()
        };
        Ok(InnerSolver {
            problem,
            split,
            phi_scale: phi_sq.sqrt(),
            gamma_scale,
            chol,
        })
    }

    pub fn problem(&self) -> &CpLassoProblem<'a> {
        &self.problem
    }

    /// Solves the surrogate around `c0`, optionally continuing from `warm`.
    pub fn solve(
        &self,
        c0: &[f64],
        opts: &InnerOptions,
        warm: Option<AdmmState>,
    ) -> Result<(InnerSolution, AdmmState)> {
        let p = &self.problem;
        let op = p.op;
        let n = op.len();
        let samples = op.n_samples();
        if c0.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: c0.len(),
                context: "reference point c0",
            });
        }
        let kappa = p.kappa();
        let s = self.phi_scale;
        let g = self.gamma_scale;
        let surrogate = Surrogate::new(self.split, p.gamma, kappa, c0);
        let minus_c0 = surrogate.minus_c0().to_vec();
        let y_scaled: Vec<f64> = p.target.iter().map(|v| v / s).collect();
        let w_floor = -kappa / (2.0 * g);

        let mut st = warm.unwrap_or_else(|| AdmmState::zeros(n, samples));
        let mut beta = vec![0.0; n];
        let mut c = vec![0.0; n];
        let mut phi_beta = vec![0.0; samples];
        let mut gamma_c = vec![0.0; n];
        let mut tmp_n = vec![0.0; n];
        let mut tmp_s = vec![0.0; samples];
        let (mut r_norm, mut s_norm) = (f64::INFINITY, f64::INFINITY);
        let mut converged = false;
        let mut iterations = 0;

        while iterations < opts.max_iter {
            iterations += 1;
            let rho = st.rho;

            // β: (I + Φ'ᵀΦ') β = (β̃ - μβ) + Φ'ᵀ(u - μu)
            for i in 0..samples {
                tmp_s[i] = st.u[i] - st.mu_u[i];
            }
            op.adjoint_into(&tmp_s, &mut tmp_n);
            for i in 0..n {
                beta[i] = st.beta_t[i] - st.mu_beta[i] + tmp_n[i] / s;
            }
            self.chol.solve_in_place(&mut beta);

            // c: (2Γ₊ + ρI + ρΓ'²) c = ρ(c̃ - μc) + ρΓ'(w - μw) - κ1 - 2Γ₋c₀
            for i in 0..n {
                tmp_n[i] = st.w[i] - st.mu_w[i];
            }
            p.gamma.mul_into(&tmp_n, &mut gamma_c);
            for i in 0..n {
                tmp_n[i] = rho * (st.c_t[i] - st.mu_c[i]) + rho * gamma_c[i] / g
                    - kappa
                    - 2.0 * minus_c0[i];
            }
            c = self.split.apply_spectral(&tmp_n, |l| {
                1.0 / (2.0 * l.max(0.0) + rho + rho * l * l / (g * g))
            });

            op.apply_into(&beta, &mut phi_beta);
            phi_beta.iter_mut().for_each(|v| *v /= s);
            p.gamma.mul_into(&c, &mut gamma_c);
            gamma_c.iter_mut().for_each(|v| *v /= g);

            let old_beta_t = st.beta_t.clone();
            let old_c_t = st.c_t.clone();
            let old_u = st.u.clone();
            let old_w = st.w.clone();

            for i in 0..n {
                let (bt, ct) = project_cone(beta[i] + st.mu_beta[i], c[i] + st.mu_c[i]);
                st.beta_t[i] = bt;
                st.c_t[i] = ct;
                st.w[i] = (gamma_c[i] + st.mu_w[i]).max(w_floor);
            }
            match p.formulation {
                Formulation::Constrained { xi } => {
                    let radius = xi / s;
                    for i in 0..samples {
                        tmp_s[i] = phi_beta[i] + st.mu_u[i] - y_scaled[i];
                    }
                    let d = tmp_s.iter().map(|v| v * v).sum::<f64>().sqrt();
                    let shrink = if d > radius { radius / d } else { 1.0 };
                    for i in 0..samples {
                        st.u[i] = y_scaled[i] + shrink * tmp_s[i];
                    }
                }
                Formulation::Penalized { .. } => {
                    let nf = samples as f64;
                    let denom = s * s / nf + rho;
                    for i in 0..samples {
                        let v = phi_beta[i] + st.mu_u[i];
                        st.u[i] = (s * p.target[i] / nf + rho * v) / denom;
                    }
                }
            }

            let mut r2 = 0.0;
            let mut x_norm2 = 0.0;
            let mut z_norm2 = 0.0;
            for i in 0..n {
                let (db, dc, dw) = (
                    beta[i] - st.beta_t[i],
                    c[i] - st.c_t[i],
                    gamma_c[i] - st.w[i],
                );
                st.mu_beta[i] += db;
                st.mu_c[i] += dc;
                st.mu_w[i] += dw;
                r2 += db * db + dc * dc + dw * dw;
                x_norm2 += beta[i] * beta[i] + c[i] * c[i] + gamma_c[i] * gamma_c[i];
                z_norm2 += st.beta_t[i].powi(2) + st.c_t[i].powi(2) + st.w[i].powi(2);
            }
            for i in 0..samples {
                let du = phi_beta[i] - st.u[i];
                st.mu_u[i] += du;
                r2 += du * du;
                x_norm2 += phi_beta[i] * phi_beta[i];
                z_norm2 += st.u[i] * st.u[i];
            }

            // dual residual ρ Aᵀ(z - z_prev)
            for i in 0..samples {
                tmp_s[i] = st.u[i] - old_u[i];
            }
            op.adjoint_into(&tmp_s, &mut tmp_n);
            let mut s2 = 0.0;
            for i in 0..n {
                let v = st.beta_t[i] - old_beta_t[i] + tmp_n[i] / s;
                s2 += v * v;
            }
            for i in 0..n {
                tmp_n[i] = st.w[i] - old_w[i];
            }
            let gw = p.gamma.mul(&tmp_n);
            for i in 0..n {
                let v = st.c_t[i] - old_c_t[i] + gw[i] / g;
                s2 += v * v;
            }
            r_norm = r2.sqrt();
            s_norm = rho * s2.sqrt();

            let mut y_norm2 = 0.0;
            tmp_s[..samples].copy_from_slice(&st.mu_u[..samples]);
            op.adjoint_into(&tmp_s, &mut tmp_n);
            for i in 0..n {
                y_norm2 += (st.mu_beta[i] + tmp_n[i] / s).powi(2);
            }
            let gmu = p.gamma.mul(&st.mu_w);
            for i in 0..n {
                y_norm2 += (st.mu_c[i] + gmu[i] / g).powi(2);
            }
            let dims = (3 * n + samples) as f64;
            let eps_pri =
                opts.abs_tol * dims.sqrt() + opts.rel_tol * x_norm2.sqrt().max(z_norm2.sqrt());
            let eps_dual =
                opts.abs_tol * ((2 * n) as f64).sqrt() + opts.rel_tol * rho * y_norm2.sqrt();
            if r_norm <= eps_pri && s_norm <= eps_dual {
                converged = true;
                break;
            }

            if iterations % 25 == 0 {
                let factor = if r_norm > 10.0 * s_norm {
                    2.0
                } else if s_norm > 10.0 * r_norm {
                    0.5
                } else {
                    1.0
                };
                if factor != 1.0 {
                    st.rho *= factor;
                    for v in st
                        .mu_beta
                        .iter_mut()
                        .chain(st.mu_c.iter_mut())
                        .chain(st.mu_u.iter_mut())
                        .chain(st.mu_w.iter_mut())
                    {
                        *v /= factor;
                    }
                }
            }
        }

        let mut beta_out = st.beta_t.clone();
        let mut c_out = st.c_t.clone();
        if let Formulation::Constrained { xi } = p.formulation {
            restore_feasibility(op, p.target, xi, &mut beta_out, &mut c_out);
        }
        if beta_out.iter().chain(&c_out).any(|v| !v.is_finite()) {
            return Err(Error::Numerical("inner solver diverged".into()));
        }
        let objective = p.data_term(&beta_out)? + surrogate.value(&c_out);
        let residual_norm = p.residual_norm(&beta_out)?;
        Ok((
            InnerSolution {
                beta: beta_out,
                c: c_out,
                iterations,
                converged,
                primal_residual: r_norm,
                dual_residual: s_norm,
                objective,
                residual_norm,
            },
            st,
        ))
    }
}

/// Moves `β` along the residual gradient restricted to its support, by the
/// shortest steps that bring `‖y - Φβ‖` inside `ξ`. ADMM meets the data
/// constraint only to its tolerance; the bounds follow `|β|` on the support.
fn restore_feasibility(
    op: &DictionaryOperator,
    y: &[f64],
    xi: f64,
    beta: &mut [f64],
    c: &mut [f64],
) {
    let target = xi * xi * (1.0 - 1e-10);
    for _ in 0..50 {
        let fit = match op.apply(beta) {
            Ok(f) => f,
            Err(_) => return,
        };
        let r: Vec<f64> = y.iter().zip(&fit).map(|(a, b)| a - b).collect();
        let r2: f64 = r.iter().map(|v| v * v).sum();
        if r2 <= xi * xi {
            return;
        }
        let mut g = op.adjoint(&r).unwrap_or_default();
        for (gi, b) in g.iter_mut().zip(beta.iter()) {
            if *b == 0.0 {
                *gi = 0.0;
            }
        }
        let g2: f64 = g.iter().map(|v| v * v).sum();
        let pg = op.apply(&g).unwrap_or_default();
        let pg2: f64 = pg.iter().map(|v| v * v).sum();
        if g2 == 0.0 || pg2 == 0.0 {
            return;
        }
        // ‖r - tΦg‖² = r2 - 2t g2 + t² pg2
        let disc = g2 * g2 - pg2 * (r2 - target);
        let t = if disc >= 0.0 {
            (g2 - disc.sqrt()) / pg2
        } else {
            g2 / pg2
        };
        for i in 0..beta.len() {
            if g[i] != 0.0 {
                beta[i] += t * g[i];
                c[i] = beta[i].abs();
            }
        }
    }
}

/// One surrogate solve from a cold start.
pub fn solve_inner(
    problem: &CpLassoProblem,
    split: &SplitPenalty,
    c0: &[f64],
    opts: &InnerOptions,
) -> Result<InnerSolution> {
    let solver = InnerSolver::new(*problem, split)?;
    Ok(solver.solve(c0, opts, None)?.0)
}

/// Largest `|β_k| - c_k` gap over entries with `c_k > 0`.
pub fn equality_gap(beta: &[f64], c: &[f64]) -> f64 {
    beta.iter()
        .zip(c)
        .filter(|(_, c)| **c > 0.0)
        .map(|(b, c)| (c - b.abs()).abs())
        .fold(0.0, f64::max)
}
