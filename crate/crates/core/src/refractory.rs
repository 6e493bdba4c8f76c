//! Refractory-period selection: turn coefficient magnitudes into a spike
//! train whose activations are more than `N_min` samples apart.

use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

use crate::coefficients::CoefficientVector;
use crate::dictionary::DictionaryOperator;
use crate::error::{invalid, Result};

/// Refractory period assumed by [`nmin_for`], seconds.
pub const REFRACTORY_PERIOD: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectionParams {
    /// Amplitude threshold `η`; only group norms strictly above it are kept.
    pub eta: f64,
    /// Minimum gap `N_min`; accepted spikes are more than this many samples apart.
    pub nmin: usize,
}

impl SelectionParams {
    pub fn new(eta: f64, nmin: usize) -> Result<Self> {
        if !(eta > 0.0) {
            return Err(invalid("eta", format!("{eta} must be positive")));
        }
        if nmin == 0 {
            return Err(invalid("nmin", "must be at least 1"));
        }
        Ok(SelectionParams { eta, nmin })
    }
}

/// `⌊fs / (10 L)⌋`: samples in one refractory period after decimation by `L`.
pub fn nmin_for(fs: f64, decimation: usize) -> usize {
    (fs * REFRACTORY_PERIOD / decimation as f64 + 1e-9).floor() as usize
}

/// `⌊N T_s / T_max⌋`: activations expected at the slowest in-band rhythm.
pub fn default_pmin(n_samples: usize, rate: f64, max_period: f64) -> usize {
    (n_samples as f64 / rate / max_period + 1e-9).floor() as usize
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActivationSequence {
    /// Ascending sample indices.
    pub indices: Vec<usize>,
    /// Group norm at each index.
    pub weights: Vec<f64>,
    /// Length of the underlying sequence.
    pub len: usize,
}

impl ActivationSequence {
    pub fn empty(len: usize) -> Self {
        ActivationSequence {
            indices: Vec::new(),
            weights: Vec::new(),
            len,
        }
    }

    pub fn count(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn min_gap(&self) -> Option<usize> {
        self.indices.windows(2).map(|w| w[1] - w[0]).min()
    }
}

/// `g[p] = Σ_m |β_m[p]|`.
pub fn group_norms(beta: &CoefficientVector) -> Vec<f64> {
    (0..beta.positions())
        .map(|p| beta.block(p).iter().map(|v| v.abs()).sum())
        .collect()
}

/// Greedy refractory selection.
///
/// Repeatedly takes the largest remaining `g[n] > η` (lowest index on ties)
/// and accepts it unless an accepted index lies within `N_min`; rejected
/// candidates are dropped and the scan continues.
pub fn greedy_select(g: &[f64], params: &SelectionParams) -> ActivationSequence {
    let mut order: Vec<usize> = (0..g.len()).filter(|&i| g[i] > params.eta).collect();
    order.sort_by(|&a, &b| g[b].total_cmp(&g[a]).then(a.cmp(&b)));
    let mut accepted = BTreeSet::new();
    for i in order {
        let lo = i.saturating_sub(params.nmin);
        let hi = i + params.nmin;
        if accepted.range(lo..=hi).next().is_none() {
            accepted.insert(i);
        }
    }
    let indices: Vec<usize> = accepted.into_iter().collect();
    let weights = indices.iter().map(|&i| g[i]).collect();
    ActivationSequence {
        indices,
        weights,
        len: g.len(),
    }
}

/// Maps a selection over coefficient positions to signal time, removing the
/// dictionary shift and dropping activations outside the observed samples.
pub fn to_signal_time(seq: &ActivationSequence, op: &DictionaryOperator) -> ActivationSequence {
    let n = op.n_samples() as i64;
    let (indices, weights) = seq
        .indices
        .iter()
        .zip(&seq.weights)
        .filter_map(|(&p, &w)| {
            let t = op.activation_time(p);
            (0..n).contains(&t).then_some((t as usize, w))
        })
        .unzip();
    ActivationSequence {
        indices,
        weights,
        len: op.n_samples(),
    }
}

/// A channel is usable when it shows at least `pmin` activations.
pub fn channel_validity(seq: &ActivationSequence, pmin: usize) -> bool {
    seq.count() >= pmin && seq.count() > 0
}

/// Binary train `π` and weighted train `π̃`.
pub fn build_sequences(seq: &ActivationSequence) -> (Vec<f64>, Vec<f64>) {
    let mut binary = vec![0.0; seq.len];
    let mut weighted = vec![0.0; seq.len];
    for (&i, &w) in seq.indices.iter().zip(&seq.weights) {
        binary[i] = 1.0;
        weighted[i] = w;
    }
    (binary, weighted)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_example() {
        let mut g = vec![0.0; 120];
        g[10] = 5.0;
        g[50] = 3.0;
        g[100] = 4.0;
        let s = greedy_select(&g, &SelectionParams::new(1.0, 48).unwrap());
        assert_eq!(s.indices, vec![10, 100]);
        assert_eq!(s.weights, vec![5.0, 4.0]);
    }

    #[test]
    fn below_threshold_is_empty() {
        let g = vec![0.5; 30];
        assert!(greedy_select(&g, &SelectionParams::new(1.0, 3).unwrap()).is_empty());
    }

    #[test]
    fn ties_prefer_lower_index() {
        let g = vec![0.0, 2.0, 2.0, 0.0];
        let s = greedy_select(&g, &SelectionParams::new(1.0, 1).unwrap());
        assert_eq!(s.indices, vec![1]);
    }

    #[test]
    fn gap_equal_to_nmin_is_rejected() {
        let mut g = vec![0.0; 20];
        g[0] = 3.0;
        g[5] = 2.0;
        g[6] = 1.5;
        let s = greedy_select(&g, &SelectionParams::new(1.0, 5).unwrap());
        assert_eq!(s.indices, vec![0, 6]);
    }

    #[test]
    fn refractory_defaults() {
        let got: Vec<usize> = (1..=4).map(|l| nmin_for(977.0, l)).collect();
        assert_eq!(got, vec![97, 48, 32, 24]);
        assert_eq!(default_pmin(4 * 977, 977.0, 2.0), 2);
        assert!(SelectionParams::new(0.0, 3).is_err());
        assert!(SelectionParams::new(1.0, 0).is_err());
    }

    #[test]
    fn validity_is_inclusive() {
        let s = ActivationSequence {
            indices: vec![3, 9],
            weights: vec![1.0, 1.0],
            len: 12,
        };
        assert!(channel_validity(&s, 2));
        assert!(!channel_validity(&s, 3));
        assert!(!channel_validity(&ActivationSequence::empty(5), 0));
    }

    #[test]
    fn group_norm_of_block() {
        let b = CoefficientVector::new(2, vec![0.0, 0.0, 3.0, -4.0]).unwrap();
        assert_eq!(group_norms(&b), vec![0.0, 7.0]);
    }

    #[test]
    fn sequences_carry_weights() {
        let s = ActivationSequence {
            indices: vec![1, 4],
            weights: vec![2.5, 0.5],
            len: 6,
        };
        let (pi, pw) = build_sequences(&s);
        assert_eq!(pi, vec![0.0, 1.0, 0.0, 0.0, 1.0, 0.0]);
        assert_eq!(pw[1], 2.5);
        assert_eq!(pi.iter().sum::<f64>(), 2.0);
        let (e, _) = build_sequences(&ActivationSequence::empty(3));
        assert_eq!(e, vec![0.0; 3]);
    }
}
