//! Pruning of repeated, harmonic and intermodulation peaks.

use serde::{Deserialize, Serialize};

use super::ssa::RawPeak;
use crate::signal_model::Band;

/// Largest `m + n` considered for intermodulation products `m f₁ ± n f₂`.
pub const MAX_INTERMOD_ORDER: u32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PruneRule {
    Repeated,
    TwoThirds,
    Harmonic,
    CrossModulation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pruned {
    /// Position of the removed peak in the raw list.
    pub raw_index: usize,
    pub frequency: f64,
    pub amplitude: f64,
    pub rule: PruneRule,
    /// Raw indices of the surviving peaks that explain the removal.
    pub because_of: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FociEstimate {
    /// Number of foci `R̂`.
    pub count: usize,
    /// Surviving frequencies in detection order.
    pub frequencies: Vec<f64>,
    pub amplitudes: Vec<f64>,
    /// Raw index of each survivor.
    pub raw_indices: Vec<usize>,
    pub pruned: Vec<Pruned>,
}

struct Work<'a> {
    raw: &'a [RawPeak],
    alive: Vec<bool>,
    pruned: Vec<Pruned>,
}

impl Work<'_> {
    fn kill(&mut self, i: usize, rule: PruneRule, because_of: Vec<usize>) {
        self.alive[i] = false;
        self.pruned.push(Pruned {
            raw_index: i,
            frequency: self.raw[i].frequency,
            amplitude: self.raw[i].amplitude,
            rule,
            because_of,
        });
    }

    fn live(&self) -> Vec<usize> {
        (0..self.raw.len()).filter(|&i| self.alive[i]).collect()
    }

    fn f(&self, i: usize) -> f64 {
        self.raw[i].frequency
    }

    fn a(&self, i: usize) -> f64 {
        self.raw[i].amplitude
    }
}

/// Prunes a raw detection list with four rules, applied in turn:
///
/// 1. peaks within `f_res` of each other are merged, keeping the larger;
/// 2. pairs with `f₁ ≈ 2/3 f₂` whose implied fundamental `f₀` lies below the
///    band are the second and third harmonics of one focus, so the smaller goes;
/// 3. integer multiples or submultiples of an earlier peak are removed;
/// 4. a peak matching `m f₁ ± n f₂` for two earlier survivors is removed.
///
/// Frequencies are carried through unchanged.
pub fn postprocess_harmonics(raw: &[RawPeak], f_res: f64, band: Band) -> FociEstimate {
    let mut w = Work {
        raw,
        alive: vec![true; raw.len()],
        pruned: Vec::new(),
    };

    for j in 0..raw.len() {
        for i in w.live() {
            if i >= j || !w.alive[j] {
                continue;
            }
            if (w.f(i) - w.f(j)).abs() <= f_res {
                if w.a(j) > w.a(i) {
                    w.kill(i, PruneRule::Repeated, vec![j]);
                } else {
                    w.kill(j, PruneRule::Repeated, vec![i]);
                }
            }
        }
    }

    let (lo, _) = band.range();
    let live = w.live();
    for (x, &i) in live.iter().enumerate() {
        for &j in &live[x + 1..] {
            if !w.alive[i] || !w.alive[j] {
                continue;
            }
            let (small, large) = if w.f(i) < w.f(j) { (i, j) } else { (j, i) };
            let (f1, f2) = (w.f(small), w.f(large));
            let f0 = (2.0 * f1 + 3.0 * f2) / 13.0;
            if (f1 - 2.0 / 3.0 * f2).abs() <= f_res && f0 < lo - f_res / 2.0 {
                if w.a(i) >= w.a(j) {
                    w.kill(j, PruneRule::TwoThirds, vec![i]);
                } else {
                    w.kill(i, PruneRule::TwoThirds, vec![j]);
                }
            }
        }
    }

    for j in 0..raw.len() {
        if !w.alive[j] {
            continue;
        }
        let hit = w.live().into_iter().take_while(|&i| i < j).find(|&i| {
            let (lo_f, hi_f) = if w.f(i) < w.f(j) {
                (w.f(i), w.f(j))
            } else {
                (w.f(j), w.f(i))
            };
            let k = (hi_f / lo_f).round();
            k >= 2.0 && (hi_f - k * lo_f).abs() <= f_res
        });
        if let Some(i) = hit {
            w.kill(j, PruneRule::Harmonic, vec![i]);
        }
    }

    for j in 0..raw.len() {
        if !w.alive[j] {
            continue;
        }
        let earlier: Vec<usize> = w.live().into_iter().take_while(|&i| i < j).collect();
        let mut hit = None;
        'pairs: for (x, &a) in earlier.iter().enumerate() {
            for &b in &earlier[x + 1..] {
                for m in 1..MAX_INTERMOD_ORDER {
                    for n in 1..=MAX_INTERMOD_ORDER - m {
                        let (m, n) = (m as f64, n as f64);
                        let sum = m * w.f(a) + n * w.f(b);
                        let diff = (m * w.f(a) - n * w.f(b)).abs();
                        if (sum - w.f(j)).abs() <= f_res || (diff - w.f(j)).abs() <= f_res {
                            hit = Some((a, b));
                            break 'pairs;
                        }
                    }
                }
            }
        }
        if let Some((a, b)) = hit {
            w.kill(j, PruneRule::CrossModulation, vec![a, b]);
        }
    }

    let raw_indices = w.live();
    FociEstimate {
        count: raw_indices.len(),
        frequencies: raw_indices.iter().map(|&i| w.f(i)).collect(),
        amplitudes: raw_indices.iter().map(|&i| w.a(i)).collect(),
        raw_indices,
        pruned: w.pruned,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn peaks(f: &[f64]) -> Vec<RawPeak> {
        f.iter()
            .enumerate()
            .map(|(i, &frequency)| RawPeak {
                frequency,
                amplitude: 1.0 - 0.1 * i as f64,
            })
            .collect()
    }

    #[test]
    fn reference_example() {
        let est = postprocess_harmonics(&peaks(&[6.98, 5.96, 4.0, 7.99]), 0.25, Band::Af);
        assert_eq!(est.count, 3);
        assert_eq!(est.frequencies, vec![6.98, 5.96, 4.0]);
        assert_eq!(est.pruned.len(), 1);
        assert_eq!(est.pruned[0].rule, PruneRule::Harmonic);
        assert_eq!(est.pruned[0].because_of, vec![2]);
    }

    #[test]
    fn later_harmonic_removed() {
        let est = postprocess_harmonics(&peaks(&[4.0, 8.01]), 0.25, Band::Af);
        assert_eq!(est.frequencies, vec![4.0]);
        let est = postprocess_harmonics(&peaks(&[8.01, 4.0]), 0.25, Band::Af);
        assert_eq!(est.frequencies, vec![8.01]);
    }

    #[test]
    fn intermodulation_removed() {
        let est = postprocess_harmonics(&peaks(&[4.0, 6.0, 10.0]), 0.25, Band::Af);
        assert_eq!(est.frequencies, vec![4.0, 6.0]);
        assert_eq!(est.pruned[0].rule, PruneRule::CrossModulation);
        assert_eq!(est.pruned[0].because_of, vec![0, 1]);
    }

    #[test]
    fn repeated_keeps_larger() {
        let raw = vec![
            RawPeak {
                frequency: 5.0,
                amplitude: 0.2,
            },
            RawPeak {
                frequency: 5.1,
                amplitude: 0.9,
            },
        ];
        let est = postprocess_harmonics(&raw, 0.25, Band::Af);
        assert_eq!(est.frequencies, vec![5.1]);
        assert_eq!(est.pruned[0].rule, PruneRule::Repeated);
    }

    #[test]
    fn two_thirds_needs_sub_band_fundamental() {
        // 2.4 and 3.6 are harmonics 2 and 3 of 1.2 Hz, below the AF band.
        let raw = vec![
            RawPeak {
                frequency: 3.6,
                amplitude: 0.5,
            },
            RawPeak {
                frequency: 2.4,
                amplitude: 0.8,
            },
        ];
        let est = postprocess_harmonics(&raw, 0.25, Band::Af);
        assert_eq!(est.frequencies, vec![2.4]);
        assert_eq!(est.pruned[0].rule, PruneRule::TwoThirds);
        // 4 and 6 would imply 2 Hz, which is in band: both kept.
        let est = postprocess_harmonics(&peaks(&[4.0, 6.0]), 0.25, Band::Af);
        assert_eq!(est.count, 2);
    }

    #[test]
    fn empty_input() {
        let est = postprocess_harmonics(&[], 0.25, Band::Af);
        assert_eq!(est.count, 0);
    }
}
