//! Windowed, zero-padded amplitude spectra and peak picking.

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::dsp::hann;
use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Window {
    Hann,
    Rectangular,
}

impl std::str::FromStr for Window {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "hann" | "hanning" => Ok(Window::Hann),
            "rect" | "rectangular" | "none" => Ok(Window::Rectangular),
            other => Err(invalid("window", format!("unknown window `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumOptions {
    pub window: Window,
    /// FFT length as a multiple of the segment length.
    pub zero_pad: usize,
    pub remove_mean: bool,
}

impl Default for SpectrumOptions {
    fn default() -> Self {
        SpectrumOptions {
            window: Window::Hann,
            zero_pad: 4,
            remove_mean: true,
        }
    }
}

/// One-sided spectrum of a segment.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    /// Bin frequencies, Hz, from 0 to the Nyquist rate.
    pub freqs: Vec<f64>,
    /// Complex amplitudes normalized by the window sum.
    pub values: Vec<Complex64>,
    /// Segment duration `Λ`, seconds.
    pub window_len: f64,
}

impl Spectrum {
    /// `f_Λ = 1/Λ`.
    pub fn resolution(&self) -> f64 {
        1.0 / self.window_len
    }

    pub fn bin_spacing(&self) -> f64 {
        self.freqs.get(1).copied().unwrap_or(0.0)
    }

    pub fn magnitudes(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.norm()).collect()
    }

    fn band_bins(&self, lo: f64, hi: f64) -> std::ops::RangeInclusive<usize> {
        let df = self.bin_spacing();
        let first = (lo / df).ceil() as usize;
        let last = ((hi / df).floor() as usize).min(self.freqs.len() - 1);
        first..=last
    }

    /// Largest in-band magnitude without interpolation.
    pub fn band_max(&self, lo: f64, hi: f64) -> f64 {
        self.band_bins(lo, hi)
            .map(|k| self.values[k].norm())
            .fold(0.0, f64::max)
    }

    /// Median in-band magnitude.
    pub fn band_median(&self, lo: f64, hi: f64) -> f64 {
        let mut m: Vec<f64> = self
            .band_bins(lo, hi)
            .map(|k| self.values[k].norm())
            .collect();
        if m.is_empty() {
            return 0.0;
        }
        m.sort_by(f64::total_cmp);
        m[m.len() / 2]
    }

    /// Highest in-band peak, refined by a parabola through the neighbouring
    /// bins; the refined frequency is clamped to the band.
    pub fn peak_in_band(&self, lo: f64, hi: f64) -> Option<Peak> {
        let mags = self.magnitudes();
        let bins = self.band_bins(lo, hi);
        let k = bins
            .clone()
            .fold(None, |best: Option<usize>, k| match best {
                Some(b) if mags[b] >= mags[k] => Some(b),
                _ => Some(k),
            })?;
        if mags[k] == 0.0 {
            return None;
        }
        let df = self.bin_spacing();
        let (mut freq, mut amp) = (self.freqs[k], mags[k]);
        if k > 0 && k + 1 < mags.len() {
            let (a, b, c) = (mags[k - 1], mags[k], mags[k + 1]);
            let denom = a - 2.0 * b + c;
            if denom < 0.0 {
                let delta = (0.5 * (a - c) / denom).clamp(-0.5, 0.5);
                freq = (k as f64 + delta) * df;
                amp = b - 0.25 * (a - c) * delta;
            }
        }
        Some(Peak {
            frequency: freq.clamp(lo, hi),
            amplitude: amp,
            bin: k,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    pub frequency: f64,
    pub amplitude: f64,
    pub bin: usize,
}

/// Spectrum calculator with a cached FFT plan.
pub struct SpectrumAnalyzer {
    planner: FftPlanner<f64>,
    opts: SpectrumOptions,
}

impl SpectrumAnalyzer {
    pub fn new(opts: SpectrumOptions) -> Result<Self> {
        if opts.zero_pad == 0 {
            return Err(invalid("zero_pad", "must be at least 1"));
        }
        Ok(SpectrumAnalyzer {
            planner: FftPlanner::new(),
            opts,
        })
    }

    pub fn compute(&mut self, x: &[f64], rate: f64) -> Result<Spectrum> {
        if x.is_empty() {
            return Err(invalid(
                "segment",
                "cannot take the spectrum of an empty segment",
            ));
        }
        let n = x.len();
        let nfft = n * self.opts.zero_pad;
        let w = match self.opts.window {
            Window::Hann => hann(n),
            Window::Rectangular => vec![1.0; n],
        };
        let mean = if self.opts.remove_mean {
            x.iter().sum::<f64>() / n as f64
        } else {
            0.0
        };
        let wsum: f64 = w.iter().sum();
        let mut buf: Vec<Complex64> = x
            .iter()
            .zip(&w)
            .map(|(v, w)| Complex64::new((v - mean) * w, 0.0))
            .chain(std::iter::repeat_n(Complex64::new(0.0, 0.0), nfft - n))
            .collect();
        self.planner.plan_fft_forward(nfft).process(&mut buf);
        let half = nfft / 2 + 1;
        let df = rate / nfft as f64;
        Ok(Spectrum {
            freqs: (0..half).map(|k| k as f64 * df).collect(),
            values: buf[..half].iter().map(|v| v / wsum).collect(),
            window_len: n as f64 / rate,
        })
    }
}

/// One-off spectrum with default options (Hann, 4x zero padding, mean removed).
pub fn amplitude_spectrum(x: &[f64], rate: f64) -> Result<Spectrum> {
    SpectrumAnalyzer::new(SpectrumOptions::default())?.compute(x, rate)
}

/// Non-overlapping windows of `⌊Λ rate⌋` samples; a trailing partial window is dropped.
pub fn segment(x: &[f64], window: f64, rate: f64) -> Result<Vec<&[f64]>> {
    if !(window > 0.0) || !(rate > 0.0) {
        return Err(invalid("window", "window length and rate must be positive"));
    }
    let ns = (window * rate + 1e-9).floor() as usize;
    if ns == 0 {
        return Err(invalid("window", "window shorter than one sample"));
    }
    if x.len() < ns {
        return Err(Error::TooShort {
            len: x.len(),
            window: ns,
        });
    }
    Ok(x.chunks_exact(ns).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn segmentation_counts() {
        let x = vec![0.0; (12.0 * 244.25) as usize];
        let s = segment(&x, 4.0, 244.25).unwrap();
        assert_eq!(s.len(), 3);
        assert!(s.iter().all(|w| w.len() == 977));
        let exact = vec![0.0; 400];
        assert_eq!(segment(&exact, 1.0, 100.0).unwrap().len(), 4);
        let five = vec![0.0; 500];
        assert_eq!(segment(&five, 4.0, 100.0).unwrap().len(), 1);
        assert!(matches!(
            segment(&five, 6.0, 100.0),
            Err(Error::TooShort { .. })
        ));
    }

    #[test]
    fn resolution_and_grid() {
        let x = vec![1.0; 400];
        let s = amplitude_spectrum(&x, 100.0).unwrap();
        assert_eq!(s.resolution(), 0.25);
        assert!(s.bin_spacing() <= s.resolution());
    }

    #[test]
    fn interpolated_peak_of_off_grid_tone() {
        let rate = 200.0;
        let f = 6.37;
        let x: Vec<f64> = (0..800)
            .map(|i| (2.0 * PI * f * i as f64 / rate).sin())
            .collect();
        let s = amplitude_spectrum(&x, rate).unwrap();
        let p = s.peak_in_band(2.0, 10.0).unwrap();
        assert!((p.frequency - f).abs() < 0.01, "{}", p.frequency);
        assert!((p.amplitude - 0.5).abs() < 0.02);
    }

    #[test]
    fn silent_segment_has_no_peak() {
        let s = amplitude_spectrum(&[0.0; 64], 64.0).unwrap();
        assert!(s.peak_in_band(1.0, 10.0).is_none());
    }
}
