//! Lazy convolutional synthesis operator.
//!
//! Coefficients are laid out as `P` blocks of `M` values, flat index
//! `p * M + m`. Position `p` of atom `m` contributes `K_m[i + offset - p]` to
//! output sample `i`, where `offset` is zero for the interior operator and
//! `support - 1` for the boundary-extended one.

use serde::{Deserialize, Serialize};

use super::wavelet::WaveletAtom;
use crate::error::{invalid, Error, Result};
use crate::signal_model::ChannelBank;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum BoundaryMode {
    /// One coefficient block per observed sample.
    #[default]
    Interior,
    /// `support - 1` extra leading blocks, so activations before the first
    /// observed sample (and atoms cut off at the start) are representable.
    Extended,
}

impl std::str::FromStr for BoundaryMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "interior" => Ok(BoundaryMode::Interior),
            "extended" => Ok(BoundaryMode::Extended),
            other => Err(invalid("boundary", format!("unknown mode `{other}`"))),
        }
    }
}

impl std::fmt::Display for BoundaryMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            BoundaryMode::Interior => "interior",
            BoundaryMode::Extended => "extended",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DictionaryOperator {
    kernels: Vec<Vec<f64>>,
    support: usize,
    n_samples: usize,
    shift: usize,
    mode: BoundaryMode,
}

impl DictionaryOperator {
    /// Operator over arbitrary finite kernels; shorter kernels are zero-padded at the end.
    ///
    /// `shift` is the sample within each kernel that marks the activation time.
    pub fn from_kernels(
        kernels: Vec<Vec<f64>>,
        n_samples: usize,
        shift: usize,
        mode: BoundaryMode,
    ) -> Result<Self> {
        if kernels.is_empty() {
            return Err(invalid("kernels", "at least one atom is required"));
        }
        if n_samples == 0 {
            return Err(invalid("n_samples", "signal length must be positive"));
        }
        let support = kernels.iter().map(Vec::len).max().unwrap_or(0);
        if support == 0 {
            return Err(invalid("kernels", "kernels must be non-empty"));
        }
        if shift >= support {
            return Err(invalid("shift", "must lie inside the kernel support"));
        }
        let kernels = kernels
            .into_iter()
            .map(|mut k| {
                k.resize(support, 0.0);
                k
            })
            .collect();
        Ok(DictionaryOperator {
            kernels,
            support,
            n_samples,
            shift,
            mode,
        })
    }

    /// Operator over sampled wavelet atoms sharing one center.
    pub fn from_atoms(atoms: &[WaveletAtom], n_samples: usize, mode: BoundaryMode) -> Result<Self> {
        let shift = atoms
            .first()
            .ok_or_else(|| invalid("atoms", "at least one atom is required"))?
            .shift;
        if atoms.iter().any(|a| a.shift != shift) {
            return Err(invalid("atoms", "atoms must share a common shift"));
        }
        let kernels = atoms.iter().map(|a| a.kernel.clone()).collect();
        DictionaryOperator::from_kernels(kernels, n_samples, shift, mode)
    }

    /// The same atoms over the boundary-extended coefficient range.
    pub fn extend_for_boundary(&self) -> DictionaryOperator {
        DictionaryOperator {
            mode: BoundaryMode::Extended,
            ..self.clone()
        }
    }

    pub fn with_mode(&self, mode: BoundaryMode) -> DictionaryOperator {
        DictionaryOperator {
            mode,
            ..self.clone()
        }
    }

    pub fn mode(&self) -> BoundaryMode {
        self.mode
    }

    /// Atom count `M`.
    pub fn n_atoms(&self) -> usize {
        self.kernels.len()
    }

    /// Signal length `N`.
    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    /// Kernel length (`2 N_M + 1` for wavelets).
    pub fn support(&self) -> usize {
        self.support
    }

    /// Activation delay `N_M` of each kernel.
    pub fn shift(&self) -> usize {
        self.shift
    }

    /// Index offset between coefficient position and output sample.
    pub fn offset(&self) -> usize {
        match self.mode {
            BoundaryMode::Interior => 0,
            BoundaryMode::Extended => self.support - 1,
        }
    }

    /// Number of coefficient blocks.
    pub fn n_positions(&self) -> usize {
        self.n_samples + self.offset()
    }

    /// Coefficient count `M * positions`.
    pub fn len(&self) -> usize {
        self.n_atoms() * self.n_positions()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn kernel(&self, m: usize) -> &[f64] {
        &self.kernels[m]
    }

    /// Signal-time sample of the activation represented by position `p`.
    pub fn activation_time(&self, p: usize) -> i64 {
        p as i64 - self.offset() as i64 + self.shift as i64
    }

    /// Position whose activation time is `t`, if representable.
    pub fn position_of(&self, t: i64) -> Option<usize> {
        let p = t + self.offset() as i64 - self.shift as i64;
        (0..self.n_positions() as i64)
            .contains(&p)
            .then_some(p as usize)
    }

    /// Positions `p` contributing to output `i`: `[max(0, i+off-(L-1)), min(i+off, P-1)]`.
    pub fn position_limits(&self, i: usize) -> (usize, usize) {
        let top = i + self.offset();
        let lo = top.saturating_sub(self.support - 1);
        let hi = top.min(self.n_positions() - 1);
        (lo, hi)
    }

    /// Kernel lags `j` contributing to output `i`: `[max(0, i+off-(P-1)), min(L-1, i+off)]`.
    pub fn lag_limits(&self, i: usize) -> (usize, usize) {
        let top = i + self.offset();
        let lo = top.saturating_sub(self.n_positions() - 1);
        let hi = top.min(self.support - 1);
        (lo, hi)
    }

    fn check_coefficients(&self, beta: &[f64]) -> Result<()> {
        if beta.len() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                actual: beta.len(),
                context: "coefficient vector",
            });
        }
        Ok(())
    }

    fn check_signal(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.n_samples {
            return Err(Error::DimensionMismatch {
                expected: self.n_samples,
                actual: v.len(),
                context: "signal length",
            });
        }
        Ok(())
    }

    /// `Φβ`, summing over coefficient positions for each output sample.
    pub fn apply(&self, beta: &[f64]) -> Result<Vec<f64>> {
        self.check_coefficients(beta)?;
        let mut out = vec![0.0; self.n_samples];
        self.apply_into(beta, &mut out);
        Ok(out)
    }

    /// Unchecked [`apply`](Self::apply) into a caller buffer.
    pub fn apply_into(&self, beta: &[f64], out: &mut [f64]) {
        let m_count = self.n_atoms();
        let off = self.offset();
        for (i, o) in out.iter_mut().enumerate() {
            let (lo, hi) = self.position_limits(i);
            let mut acc = 0.0;
            for p in lo..=hi {
                let lag = i + off - p;
                let block = &beta[p * m_count..(p + 1) * m_count];
                for (b, k) in block.iter().zip(&self.kernels) {
                    acc += b * k[lag];
                }
            }
            *o = acc;
        }
    }

    /// `Φβ`, summing over kernel lags for each output sample.
    pub fn apply_by_lag(&self, beta: &[f64]) -> Result<Vec<f64>> {
        self.check_coefficients(beta)?;
        let m_count = self.n_atoms();
        let off = self.offset();
        Ok((0..self.n_samples)
            .map(|i| {
                let (lo, hi) = self.lag_limits(i);
                (lo..=hi)
                    .map(|j| {
                        let p = i + off - j;
                        (0..m_count)
                            .map(|m| beta[p * m_count + m] * self.kernels[m][j])
                            .sum::<f64>()
                    })
                    .sum()
            })
            .collect())
    }

    /// `Φβ`, scattering each non-zero coefficient's kernel.
    pub fn apply_sparse(&self, beta: &[f64]) -> Result<Vec<f64>> {
        self.check_coefficients(beta)?;
        let mut out = vec![0.0; self.n_samples];
        for (idx, &b) in beta.iter().enumerate().filter(|(_, b)| **b != 0.0) {
            let (start, values) = self.column(idx);
            for (o, v) in out[start..].iter_mut().zip(values) {
                *o += b * v;
            }
        }
        Ok(out)
    }

    /// `Φᵀv`.
    pub fn adjoint(&self, v: &[f64]) -> Result<Vec<f64>> {
        self.check_signal(v)?;
        let mut out = vec![0.0; self.len()];
        self.adjoint_into(v, &mut out);
        Ok(out)
    }

    /// Unchecked [`adjoint`](Self::adjoint) into a caller buffer.
    pub fn adjoint_into(&self, v: &[f64], out: &mut [f64]) {
        let m_count = self.n_atoms();
        for (p, block) in out.chunks_exact_mut(m_count).enumerate() {
            let (start, j_lo, j_hi) = self.column_range(p);
            let seg = &v[start..start + (j_hi - j_lo)];
            for (o, k) in block.iter_mut().zip(&self.kernels) {
                *o = k[j_lo..j_hi].iter().zip(seg).map(|(a, b)| a * b).sum();
            }
        }
    }

    /// First row and lag range `[j_lo, j_hi)` of the columns at position `p`.
    fn column_range(&self, p: usize) -> (usize, usize, usize) {
        let off = self.offset();
        let j_lo = off.saturating_sub(p);
        let j_hi = self.support.min(self.n_samples + off - p);
        (p + j_lo - off, j_lo, j_hi.max(j_lo))
    }

    /// Non-zero rows of column `idx`: first row and the values from there on.
    pub fn column(&self, idx: usize) -> (usize, &[f64]) {
        let m_count = self.n_atoms();
        let (p, m) = (idx / m_count, idx % m_count);
        let (start, j_lo, j_hi) = self.column_range(p);
        (start, &self.kernels[m][j_lo..j_hi])
    }

    /// Inner product of two columns.
    pub fn column_dot(&self, a: usize, b: usize) -> f64 {
        let (sa, va) = self.column(a);
        let (sb, vb) = self.column(b);
        let lo = sa.max(sb);
        let hi = (sa + va.len()).min(sb + vb.len());
        (lo..hi).map(|r| va[r - sa] * vb[r - sb]).sum()
    }

    /// Half bandwidth of `ΦᵀΦ` in flat coefficient indexing.
    pub fn gram_bandwidth(&self) -> usize {
        self.n_atoms() * self.support - 1
    }

    /// Dense `N x len` matrix, for small-instance checks.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut rows = vec![vec![0.0; self.len()]; self.n_samples];
        for idx in 0..self.len() {
            let (start, values) = self.column(idx);
            for (r, v) in values.iter().enumerate() {
                rows[start + r][idx] = *v;
            }
        }
        rows
    }

    /// Power-iteration estimate of `‖Φ‖²` (largest eigenvalue of `ΦᵀΦ`).
    pub fn norm_squared(&self, iterations: usize) -> f64 {
        let mut x: Vec<f64> = (0..self.len())
            .map(|i| 1.0 + 0.5 * ((i as f64 * 0.618_033_988_75).fract() - 0.5))
            .collect();
        let mut y = vec![0.0; self.n_samples];
        let mut estimate = 0.0;
        for _ in 0..iterations.max(1) {
            let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm == 0.0 {
                return 0.0;
            }
            x.iter_mut().for_each(|v| *v /= norm);
            self.apply_into(&x, &mut y);
            let next = y.iter().map(|v| v * v).sum::<f64>();
            self.adjoint_into(&y, &mut x);
            if (next - estimate).abs() <= 1e-10 * next {
                return next;
            }
            estimate = next;
        }
        estimate
    }
}

/// Operator whose atoms are the true channel responses towards channel `q`.
///
/// With `differenced` set, each response is first differenced (matching a
/// first-differenced target). Responses include their delay, so the shift is 0.
pub fn build_ideal_dictionary(
    bank: &ChannelBank,
    q: usize,
    n_samples: usize,
    differenced: bool,
    mode: BoundaryMode,
) -> Result<DictionaryOperator> {
    if q >= bank.channels() {
        return Err(invalid(
            "channel",
            format!("index {q} out of range for {} channels", bank.channels()),
        ));
    }
    let kernels = (0..bank.foci())
        .map(|r| {
            let h = bank.effective_kernel(r, q);
            if differenced {
                let mut d = Vec::with_capacity(h.len() + 1);
                let mut prev = 0.0;
                for &v in h.iter().chain(std::iter::once(&0.0)) {
                    d.push(v - prev);
                    prev = v;
                }
                d
            } else {
                h
            }
        })
        .collect();
    DictionaryOperator::from_kernels(kernels, n_samples, 0, mode)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dictionary::DictionarySpec;

    fn small() -> DictionaryOperator {
        DictionaryOperator::from_kernels(
            vec![vec![1.0, 2.0, 3.0], vec![-1.0, 0.5, 0.25]],
            6,
            1,
            BoundaryMode::Interior,
        )
        .unwrap()
    }

    #[test]
    fn unit_coefficient_places_atom_after_shift() {
        let spec = DictionarySpec::grid(&[0, 2], &[0.01, 0.02], 977.0, 5.0).unwrap();
        let atoms = spec.build().unwrap();
        let op = DictionaryOperator::from_atoms(&atoms, 400, BoundaryMode::Interior).unwrap();
        let mut beta = vec![0.0; op.len()];
        beta[100 * 4 + 1] = 1.0;
        let y = op.apply(&beta).unwrap();
        let nm = op.shift();
        assert_eq!(op.activation_time(100), 100 + nm as i64);
        for (i, v) in y.iter().enumerate() {
            let lag = i as i64 - 100;
            let expected = if (0..op.support() as i64).contains(&lag) {
                atoms[1].kernel[lag as usize]
            } else {
                0.0
            };
            assert_eq!(*v, expected);
        }
        let peak = y.iter().cloned().fold(f64::MIN, f64::max);
        assert_eq!(y[100 + nm], peak);
    }

    #[test]
    fn zero_in_zero_out() {
        let op = small();
        assert!(op
            .apply(&vec![0.0; op.len()])
            .unwrap()
            .iter()
            .all(|v| *v == 0.0));
        assert!(op.adjoint(&[0.0; 6]).unwrap().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn lengths_are_checked() {
        let op = small();
        assert!(op.apply(&[1.0; 5]).is_err());
        assert!(op.adjoint(&[1.0; 7]).is_err());
    }

    #[test]
    fn adjoint_of_atom_peaks_at_its_energy() {
        let op = small();
        let mut beta = vec![0.0; op.len()];
        beta[2 * 2] = 1.0;
        let v = op.apply(&beta).unwrap();
        let back = op.adjoint(&v).unwrap();
        assert_eq!(back[4], 14.0);
        let max = back.iter().cloned().fold(f64::MIN, f64::max);
        assert_eq!(max, 14.0);
    }

    #[test]
    fn extended_layout() {
        let op = small().extend_for_boundary();
        assert_eq!(op.offset(), 2);
        assert_eq!(op.len(), 2 * (6 + 2));
        assert_eq!(op.position_of(0), Some(1));
        assert_eq!(op.activation_time(0), -1);
    }

    #[test]
    fn dense_matches_columns() {
        let op = small().extend_for_boundary();
        let dense = op.to_dense();
        let mut beta = vec![0.0; op.len()];
        beta[3] = 2.0;
        beta[9] = -1.0;
        let y = op.apply(&beta).unwrap();
        for (i, row) in dense.iter().enumerate() {
            let d: f64 = row.iter().zip(&beta).map(|(a, b)| a * b).sum();
            assert!((d - y[i]).abs() < 1e-14);
        }
    }

    #[test]
    fn ideal_dictionary_of_single_focus() {
        let bank = ChannelBank::uniform(vec![1.0, -0.5], 1, 2).unwrap();
        let op = build_ideal_dictionary(&bank, 1, 10, false, BoundaryMode::Interior).unwrap();
        let direct =
            DictionaryOperator::from_kernels(vec![vec![1.0, -0.5]], 10, 0, BoundaryMode::Interior)
                .unwrap();
        assert_eq!(op, direct);
        assert!(build_ideal_dictionary(&bank, 2, 10, false, BoundaryMode::Interior).is_err());
        let diff = build_ideal_dictionary(&bank, 0, 10, true, BoundaryMode::Interior).unwrap();
        assert_eq!(diff.kernel(0), &[1.0, -1.5, 0.5]);
    }

    #[test]
    fn power_iteration_matches_dense_gram() {
        let op = small();
        let dense = op.to_dense();
        let n = op.len();
        let mut g = nalgebra::DMatrix::zeros(n, n);
        for a in 0..n {
            for b in 0..n {
                g[(a, b)] = dense.iter().map(|r| r[a] * r[b]).sum::<f64>();
                assert!((g[(a, b)] - op.column_dot(a, b)).abs() < 1e-14);
            }
        }
        let top = g.symmetric_eigenvalues().max();
        assert!((op.norm_squared(500) - top).abs() < 1e-6 * top);
    }
}
