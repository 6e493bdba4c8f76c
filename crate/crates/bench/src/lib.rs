//! Shared fixtures for the benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sparse_egm::dictionary::{BoundaryMode, DictionaryOperator, DictionarySpec};
use sparse_egm::refractory::ActivationSequence;
use sparse_egm::signal_model::{generate_spike_trains, merge_trains};
use sparse_egm::{Band, FociSpec};

/// Decimated sampling rate used throughout.
pub const RATE: f64 = 977.0 / 4.0;

/// Hermite dictionary over `seconds` of signal with a sparse target.
///
/// The target holds one spike every ~150 ms per atom plus uniform noise.
pub fn hermite_instance(
    orders: &[usize],
    sigmas: &[f64],
    seconds: f64,
    seed: u64,
) -> (DictionaryOperator, Vec<f64>) {
    let atoms = DictionarySpec::grid(orders, sigmas, RATE, 5.0)
        .unwrap()
        .build()
        .unwrap();
    let n = (seconds * RATE) as usize;
    let op = DictionaryOperator::from_atoms(&atoms, n, BoundaryMode::Interior).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut truth = vec![0.0; op.len()];
    let m = op.n_atoms();
    let mut p = rng.random_range(0..20);
    while p < op.n_positions() {
        truth[p * m + rng.random_range(0..m)] = rng.random_range(0.5..1.5);
        p += rng.random_range(30..45);
    }
    let y = op
        .apply(&truth)
        .unwrap()
        .into_iter()
        .map(|v| v + 0.01 * rng.random_range(-1.0..1.0))
        .collect();
    (op, y)
}

/// Binary activation sequence of `foci` over `seconds`.
pub fn activation_sequence(foci: &[f64], seconds: f64, seed: u64) -> ActivationSequence {
    let spec = FociSpec::with_random_offsets(foci.to_vec(), Band::Af, seed).unwrap();
    let merged = merge_trains(&generate_spike_trains(&spec, seconds, RATE, seed).unwrap());
    let indices: Vec<usize> = (0..merged.len()).filter(|&i| merged[i] != 0.0).collect();
    ActivationSequence {
        weights: vec![1.0; indices.len()],
        indices,
        len: merged.len(),
    }
}
