//! Foci count and frequency estimation from activation sequences, plus the
//! dominant-frequency baseline.

pub mod dfa;
pub mod harmonics;
pub mod notch;
pub mod spectrum;
pub mod ssa;

pub use dfa::{dfa, dfa_channel, DfaOptions, DfaResult};
pub use harmonics::{postprocess_harmonics, FociEstimate, PruneRule, Pruned};
pub use notch::{notch_design, NotchFilter};
pub use spectrum::{
    amplitude_spectrum, segment, Peak, Spectrum, SpectrumAnalyzer, SpectrumOptions, Window,
};
pub use ssa::{
    analyze_sequence, ssa_deflation, ssa_signal, RawPeak, SegmentAnalysis, SsaParams, SsaSegment,
};
