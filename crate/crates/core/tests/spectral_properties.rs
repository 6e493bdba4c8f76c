use proptest::prelude::*;

use sparse_egm::refractory::ActivationSequence;
use sparse_egm::signal_model::{
    generate_dfa_signal, generate_spike_trains, merge_trains, DfaSignalSpec,
};
use sparse_egm::spectral::{
    analyze_sequence, dfa_channel, postprocess_harmonics, ssa_deflation, ssa_signal, DfaOptions,
    RawPeak, SsaParams,
};
use sparse_egm::{Band, FociSpec};

const RATE: f64 = 977.0 / 4.0;

fn merged_sequence(freqs: &[f64], seed: u64, duration: f64) -> ActivationSequence {
    let spec = FociSpec::with_random_offsets(freqs.to_vec(), Band::Af, seed).unwrap();
    let merged = merge_trains(&generate_spike_trains(&spec, duration, RATE, seed).unwrap());
    let indices: Vec<usize> = (0..merged.len()).filter(|&i| merged[i] != 0.0).collect();
    ActivationSequence {
        weights: indices.iter().map(|i| 1.0 + (*i % 7) as f64).collect(),
        indices,
        len: merged.len(),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn notch_removes_a_stationary_tone(f in 2.2f64..9.8, phase in 0.0f64..6.3, amp in 0.1f64..10.0) {
        let x: Vec<f64> = (0..(12.0 * RATE) as usize)
            .map(|i| amp * (2.0 * std::f64::consts::PI * f * i as f64 / RATE + phase).cos())
            .collect();
        let segments = ssa_signal(&x, RATE, &SsaParams::default()).unwrap();
        // the middle window is free of edge transients
        let (before, after) = segments[1].attenuation[0];
        let db = 20.0 * (before / after.max(1e-300)).log10();
        prop_assert!(db >= 40.0, "{} Hz: {} dB", f, db);
        prop_assert!((segments[1].peaks[0].frequency - f).abs() <= 0.25);
    }

    #[test]
    fn detections_stay_in_band(
        freqs in prop::collection::vec(2.0f64..10.0, 1..5),
        seed in any::<u64>(),
        sinus in any::<bool>(),
    ) {
        let seq = merged_sequence(&freqs, seed, 8.0);
        let band = if sinus { Band::Sinus } else { Band::Af };
        let params = SsaParams { band, ..SsaParams::default() };
        for a in analyze_sequence(&seq, RATE, &params).unwrap() {
            prop_assert!(a.segment.peaks.len() <= params.max_peaks);
            for f in a.segment.frequencies().iter().chain(&a.estimate.frequencies) {
                prop_assert!(band.contains(*f), "{} Hz outside {:?}", f, band);
            }
        }
    }

    #[test]
    fn survivors_are_separated(
        raw in prop::collection::vec((2.0f64..10.0, 0.01f64..1.0), 0..12),
        window in 2.0f64..8.0,
    ) {
        let raw: Vec<RawPeak> = raw.into_iter().map(|(frequency, amplitude)| RawPeak { frequency, amplitude }).collect();
        let f_res = 1.0 / window;
        let est = postprocess_harmonics(&raw, f_res, Band::Af);
        prop_assert_eq!(est.count, est.frequencies.len());
        prop_assert_eq!(est.count + est.pruned.len(), raw.len());
        for (i, a) in est.frequencies.iter().enumerate() {
            for b in &est.frequencies[i + 1..] {
                prop_assert!((a - b).abs() > f_res, "{} and {} within {}", a, b, f_res);
            }
        }
    }

    #[test]
    fn binary_analysis_ignores_weights(freqs in prop::collection::vec(2.0f64..10.0, 1..4), seed in any::<u64>(), scale in 0.001f64..1000.0) {
        let seq = merged_sequence(&freqs, seed, 8.0);
        let scaled = ActivationSequence {
            weights: seq.weights.iter().map(|w| w * scale).collect(),
            ..seq.clone()
        };
        let params = SsaParams::default();
        prop_assert_eq!(ssa_deflation(&seq, RATE, &params).unwrap(), ssa_deflation(&scaled, RATE, &params).unwrap());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn dfa_agrees_with_deflation_on_one_focus(f in 2.5f64..9.5, seed in any::<u64>()) {
        let fs = 977.0;
        let duration = 12.0;
        let sigma = 0.004;
        let half = (5.0 * sigma * fs) as i64;
        let pulse: Vec<f64> = (-half..=half)
            .map(|i| {
                let t = i as f64 / fs;
                -t / sigma * (-t * t / (2.0 * sigma * sigma)).exp()
            })
            .collect();
        let delay = (seed % 1000) as f64 / 1000.0 / f;
        let spec = DfaSignalSpec { period: 1.0 / f, delay, pulse, noise_sigma: 0.05, rate: fs, duration };
        let rec = generate_dfa_signal(&spec, seed).unwrap();
        let dfa = dfa_channel(&rec.channels[0], fs, &DfaOptions::default()).unwrap();

        let foci = FociSpec::new(vec![f], vec![delay], Band::Af).unwrap();
        let seq = merged_sequence_from(&foci, duration, seed);
        let analyses = analyze_sequence(&seq, RATE, &SsaParams::default()).unwrap();
        let first = analyses[0].estimate.frequencies[0];
        prop_assert!((dfa.mean - first).abs() <= 0.25, "DFA {} vs deflation {} at {} Hz", dfa.mean, first, f);
    }
}

fn merged_sequence_from(foci: &FociSpec, duration: f64, seed: u64) -> ActivationSequence {
    let merged = merge_trains(&generate_spike_trains(foci, duration, RATE, seed).unwrap());
    let indices: Vec<usize> = (0..merged.len()).filter(|&i| merged[i] != 0.0).collect();
    ActivationSequence {
        weights: vec![1.0; indices.len()],
        indices,
        len: merged.len(),
    }
}
