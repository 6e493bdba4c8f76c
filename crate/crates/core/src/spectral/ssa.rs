//! Iterative spectral deflation of activation sequences.

use serde::{Deserialize, Serialize};

use super::harmonics::{postprocess_harmonics, FociEstimate};
use super::notch::notch_design;
use super::spectrum::{segment, SpectrumAnalyzer, SpectrumOptions};
use crate::dsp::{filtfilt_padded, Biquad};
use crate::error::{invalid, Result};
use crate::refractory::ActivationSequence;
use crate::signal_model::Band;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SsaParams {
    /// Fraction `γ` of the initial in-band maximum below which deflation stops.
    pub gamma: f64,
    pub band: Band,
    /// Notch −3 dB bandwidth, Hz.
    pub notch_bandwidth: f64,
    pub max_peaks: usize,
    /// Segment length `Λ`, seconds.
    pub window: f64,
    /// Use the weighted sequence instead of the binary one.
    pub weighted: bool,
    /// Band-limit the sequence before the first spectrum: zero-phase
    /// Butterworth high-pass at a quarter of the lower band edge and
    /// low-pass at the upper edge.
    pub prefilter: bool,
}

impl Default for SsaParams {
    fn default() -> Self {
        SsaParams {
            gamma: 0.3,
            band: Band::Af,
            notch_bandwidth: 0.5,
            max_peaks: 12,
            window: 4.0,
            weighted: false,
            prefilter: true,
        }
    }
}

impl SsaParams {
    pub fn validate(&self, rate: f64) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(invalid("gamma", format!("{} not in (0, 1)", self.gamma)));
        }
        self.band.validate(rate)?;
        let (lo, hi) = self.band.range();
        if !(self.notch_bandwidth > 0.0) {
            return Err(invalid("notch_bw", "must be positive"));
        }
        if lo - self.notch_bandwidth / 2.0 <= 0.0 || hi + self.notch_bandwidth / 2.0 >= rate / 2.0 {
            return Err(invalid(
                "notch_bw",
                format!(
                    "{} Hz notch does not fit around the band",
                    self.notch_bandwidth
                ),
            ));
        }
        if self.max_peaks == 0 {
            return Err(invalid("max_peaks", "must be at least 1"));
        }
        if !(self.window > 0.0) {
            return Err(invalid("window", "must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RawPeak {
    pub frequency: f64,
    pub amplitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SsaSegment {
    pub index: usize,
    pub start: usize,
    pub len: usize,
    /// `γ` times the initial in-band maximum.
    pub threshold: f64,
    /// Peaks in detection order.
    pub peaks: Vec<RawPeak>,
    /// In-band magnitude at each detected bin, before and after its notch.
    pub attenuation: Vec<(f64, f64)>,
}

impl SsaSegment {
    pub fn frequencies(&self) -> Vec<f64> {
        self.peaks.iter().map(|p| p.frequency).collect()
    }
}

/// Deflation result and foci estimate for one segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentAnalysis {
    pub segment: SsaSegment,
    pub estimate: FociEstimate,
}

/// Dense sequence fed to the spectrum: unit spikes, or group norms when weighted.
pub fn sequence_signal(seq: &ActivationSequence, weighted: bool) -> Vec<f64> {
    let mut x = vec![0.0; seq.len];
    for (&i, &w) in seq.indices.iter().zip(&seq.weights) {
        x[i] = if weighted { w } else { 1.0 };
    }
    x
}

/// Deflation on every segment of `π`. An empty sequence gives no segments.
pub fn ssa_deflation(
    seq: &ActivationSequence,
    rate: f64,
    params: &SsaParams,
) -> Result<Vec<SsaSegment>> {
    params.validate(rate)?;
    if seq.is_empty() {
        return Ok(Vec::new());
    }
    ssa_signal(&sequence_signal(seq, params.weighted), rate, params)
}

/// Deflation on an arbitrary sampled signal.
///
/// Each notch is run over the whole signal before the segment is cut out, so
/// interior segments see no filter start-up transients.
pub fn ssa_signal(x: &[f64], rate: f64, params: &SsaParams) -> Result<Vec<SsaSegment>> {
    params.validate(rate)?;
    let windows = segment(x, params.window, rate)?;
    let ns = windows[0].len();
    let (lo, hi) = params.band.range();
    let mut analyzer = SpectrumAnalyzer::new(SpectrumOptions::default())?;
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    let mut centred: Vec<f64> = x.iter().map(|v| v - mean).collect();
    if params.prefilter {
        centred = band_limit(&centred, lo, hi, rate);
    }
    let mut out = Vec::with_capacity(windows.len());
    for j in 0..windows.len() {
        let start = j * ns;
        let mut work = centred.clone();
        let mut spec = analyzer.compute(&work[start..start + ns], rate)?;
        let threshold = params.gamma * spec.band_max(lo, hi);
        let mut peaks = Vec::new();
        let mut attenuation = Vec::new();
        while peaks.len() < params.max_peaks && threshold > 0.0 {
            if spec.band_max(lo, hi) < threshold {
                break;
            }
            let Some(peak) = spec.peak_in_band(lo, hi) else {
                break;
            };
            peaks.push(RawPeak {
                frequency: peak.frequency,
                amplitude: peak.amplitude,
            });
            let before = spec.values[peak.bin].norm();
            let notch = notch_design(peak.frequency, params.notch_bandwidth, rate)?;
            work = notch.filter_zero_phase(&work);
            spec = analyzer.compute(&work[start..start + ns], rate)?;
            attenuation.push((before, spec.values[peak.bin].norm()));
        }
        out.push(SsaSegment {
            index: j,
            start,
            len: ns,
            threshold,
            peaks,
            attenuation,
        });
    }
    Ok(out)
}

fn band_limit(x: &[f64], lo: f64, hi: f64, rate: f64) -> Vec<f64> {
    let corner = lo / 4.0;
    let sections = [Biquad::highpass(corner, rate), Biquad::lowpass(hi, rate)];
    let pad = (3.0 * rate / corner).ceil() as usize;
    filtfilt_padded(&sections, x, pad)
}

/// Deflation followed by harmonic pruning on each segment.
pub fn analyze_sequence(
    seq: &ActivationSequence,
    rate: f64,
    params: &SsaParams,
) -> Result<Vec<SegmentAnalysis>> {
    let segments = ssa_deflation(seq, rate, params)?;
    Ok(segments
        .into_iter()
        .map(|segment| {
            let estimate = postprocess_harmonics(&segment.peaks, 1.0 / params.window, params.band);
            SegmentAnalysis { segment, estimate }
        })
        .collect())
}
