//! Dominant-frequency baseline.

use serde::{Deserialize, Serialize};

use super::spectrum::{segment, Spectrum, SpectrumAnalyzer, SpectrumOptions};
use crate::dsp::{filtfilt, Biquad};
use crate::error::{invalid, Result};
use crate::signal_model::EgmRecord;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DfaOptions {
    /// Segment length `Λ`, seconds.
    pub window: f64,
    pub bandpass: (f64, f64),
    pub lowpass: f64,
    /// Range searched for the dominant peak, Hz.
    pub search: (f64, f64),
    /// Minimum peak to median ratio for a reliable estimate.
    pub reliability: f64,
}

impl Default for DfaOptions {
    fn default() -> Self {
        DfaOptions {
            window: 4.0,
            bandpass: (30.0, 400.0),
            lowpass: 15.0,
            search: (0.5, 15.0),
            reliability: 3.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DfaResult {
    /// Dominant frequency of each segment, Hz.
    pub segments: Vec<f64>,
    /// Dominant frequency of the segment-averaged magnitude spectrum.
    pub mean: f64,
    /// Peak over median magnitude in the search range of the averaged spectrum.
    pub peak_ratio: f64,
    pub reliable: bool,
    /// Whether the band-pass stage ran.
    pub bandpassed: bool,
}

/// Band-pass, rectification and low-pass envelope of one channel.
pub fn dfa_envelope(x: &[f64], rate: f64, opts: &DfaOptions) -> (Vec<f64>, bool) {
    let (lo, hi) = opts.bandpass;
    let nyq = rate / 2.0;
    let bandpassed = hi < nyq;
    let mut y = if bandpassed {
        let bp = [
            Biquad::highpass(lo, rate),
            Biquad::highpass(lo, rate),
            Biquad::lowpass(hi, rate),
            Biquad::lowpass(hi, rate),
        ];
        filtfilt(&bp, x)
    } else {
        x.to_vec()
    };
    for v in &mut y {
        *v = v.abs();
    }
    let lp = [
        Biquad::lowpass(opts.lowpass, rate),
        Biquad::lowpass(opts.lowpass, rate),
    ];
    (filtfilt(&lp, &y), bandpassed)
}

/// Dominant frequency of a single channel sampled at `rate`.
pub fn dfa_channel(x: &[f64], rate: f64, opts: &DfaOptions) -> Result<DfaResult> {
    let (s_lo, s_hi) = opts.search;
    if !(s_lo > 0.0 && s_hi > s_lo && s_hi < rate / 2.0) {
        return Err(invalid(
            "search",
            format!("[{s_lo}, {s_hi}] Hz must lie in (0, {}) Hz", rate / 2.0),
        ));
    }
    if !(opts.lowpass > 0.0 && opts.lowpass < rate / 2.0) {
        return Err(invalid("lowpass", "cutoff must lie below the Nyquist rate"));
    }
    // Reject short signals before filtering.
    segment(x, opts.window, rate)?;
    let (env, bandpassed) = dfa_envelope(x, rate, opts);
    let mut analyzer = SpectrumAnalyzer::new(SpectrumOptions::default())?;
    let spectra: Vec<Spectrum> = segment(&env, opts.window, rate)?
        .into_iter()
        .map(|w| analyzer.compute(w, rate))
        .collect::<Result<_>>()?;
    let segments = spectra
        .iter()
        .map(|s| s.peak_in_band(s_lo, s_hi).map_or(f64::NAN, |p| p.frequency))
        .collect();
    let mut avg = spectra[0].clone();
    for (k, v) in avg.values.iter_mut().enumerate() {
        let m = spectra.iter().map(|s| s.values[k].norm()).sum::<f64>() / spectra.len() as f64;
        *v = m.into();
    }
    let (mean, peak_amp) = avg
        .peak_in_band(s_lo, s_hi)
        .map_or((f64::NAN, 0.0), |p| (p.frequency, p.amplitude));
    let median = avg.band_median(s_lo, s_hi);
    let peak_ratio = if median > 0.0 { peak_amp / median } else { 0.0 };
    Ok(DfaResult {
        segments,
        mean,
        peak_ratio,
        reliable: peak_ratio >= opts.reliability,
        bandpassed,
    })
}

/// Dominant frequency of every channel of a record.
pub fn dfa(record: &EgmRecord, opts: &DfaOptions) -> Result<Vec<DfaResult>> {
    record
        .channels
        .iter()
        .map(|x| dfa_channel(x, record.rate(), opts))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;
    use crate::signal_model::{generate_dfa_signal, DfaSignalSpec};
    use rand::SeedableRng;
    use rand_distr::{Distribution, Normal};

    fn biphasic(rate: f64) -> Vec<f64> {
        let half = (0.02 * rate) as i64;
        (-half..=half)
            .map(|i| {
                let t = i as f64 / rate / 0.006;
                -t * (-0.5 * t * t).exp()
            })
            .collect()
    }

    #[test]
    fn periodic_train_dominant_frequency() {
        let spec = DfaSignalSpec {
            period: 0.5,
            delay: 0.1,
            pulse: biphasic(977.0),
            noise_sigma: 0.01,
            rate: 977.0,
            duration: 12.0,
        };
        let rec = generate_dfa_signal(&spec, 3).unwrap();
        let res = &dfa(&rec, &DfaOptions::default()).unwrap()[0];
        assert!(res.bandpassed);
        assert_eq!(res.segments.len(), 3);
        assert!((res.mean - 2.0).abs() <= 0.25, "{}", res.mean);
        assert!(res.reliable);
    }

    #[test]
    fn noise_is_unreliable() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let n = Normal::new(0.0, 1.0).unwrap();
        let x: Vec<f64> = (0..977 * 12).map(|_| n.sample(&mut rng)).collect();
        let res = dfa_channel(&x, 977.0, &DfaOptions::default()).unwrap();
        assert!(!res.reliable, "ratio {}", res.peak_ratio);
    }

    #[test]
    fn low_rate_skips_bandpass_and_short_signal_errors() {
        let x = vec![0.0; 100];
        assert!(matches!(
            dfa_channel(&x, 244.25, &DfaOptions::default()),
            Err(Error::TooShort { .. })
        ));
        let (_, bp) = dfa_envelope(&[0.0; 2000], 244.25, &DfaOptions::default());
        assert!(!bp);
    }
}
