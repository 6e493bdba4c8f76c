//! Small filtering toolbox: biquad sections, zero-phase application and
//! windowed-sinc FIR design.

use num_complex::Complex64;
use std::f64::consts::PI;

/// Second-order IIR section with `a0` normalized to one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 3],
}

impl Biquad {
    pub fn new(b: [f64; 3], a: [f64; 3]) -> Self {
        let a0 = a[0];
        Biquad {
            b: [b[0] / a0, b[1] / a0, b[2] / a0],
            a: [1.0, a[1] / a0, a[2] / a0],
        }
    }

    /// Butterworth-style low-pass section (RBJ cookbook, `q = 1/sqrt 2`).
    pub fn lowpass(cutoff: f64, rate: f64) -> Self {
        let w0 = 2.0 * PI * cutoff / rate;
        let alpha = w0.sin() / (2.0 * std::f64::consts::FRAC_1_SQRT_2);
        let c = w0.cos();
        Biquad::new(
            [(1.0 - c) / 2.0, 1.0 - c, (1.0 - c) / 2.0],
            [1.0 + alpha, -2.0 * c, 1.0 - alpha],
        )
    }

    pub fn highpass(cutoff: f64, rate: f64) -> Self {
        let w0 = 2.0 * PI * cutoff / rate;
        let alpha = w0.sin() / (2.0 * std::f64::consts::FRAC_1_SQRT_2);
        let c = w0.cos();
        Biquad::new(
            [(1.0 + c) / 2.0, -(1.0 + c), (1.0 + c) / 2.0],
            [1.0 + alpha, -2.0 * c, 1.0 - alpha],
        )
    }

    /// Frequency response at `f` Hz.
    pub fn response(&self, f: f64, rate: f64) -> Complex64 {
        let z1 = Complex64::from_polar(1.0, -2.0 * PI * f / rate);
        let z2 = z1 * z1;
        (self.b[0] + self.b[1] * z1 + self.b[2] * z2)
            / (self.a[0] + self.a[1] * z1 + self.a[2] * z2)
    }

    /// Causal single pass (transposed direct form II), zero initial state.
    pub fn filter(&self, x: &[f64]) -> Vec<f64> {
        let (mut s1, mut s2) = (0.0, 0.0);
        x.iter()
            .map(|&v| {
                let y = self.b[0] * v + s1;
                s1 = self.b[1] * v - self.a[1] * y + s2;
                s2 = self.b[2] * v - self.a[2] * y;
                y
            })
            .collect()
    }
}

/// Runs a cascade forward and then backward, giving zero phase and squared magnitude.
///
/// Edges are handled by odd reflection about the end samples.
pub fn filtfilt(sections: &[Biquad], x: &[f64]) -> Vec<f64> {
    filtfilt_padded(sections, x, 6 * sections.len() * 3)
}

/// [`filtfilt`] with an explicit reflection length, useful for narrow filters
/// whose transients outlast the default padding.
pub fn filtfilt_padded(sections: &[Biquad], x: &[f64], pad: usize) -> Vec<f64> {
    if x.is_empty() || sections.is_empty() {
        return x.to_vec();
    }
    let n = x.len();
    let pad = pad.min(n - 1);
    let mut ext = Vec::with_capacity(n + 2 * pad);
    ext.extend((1..=pad).rev().map(|i| 2.0 * x[0] - x[i]));
    ext.extend_from_slice(x);
    ext.extend((1..=pad).map(|i| 2.0 * x[n - 1] - x[n - 1 - i]));
    for s in sections {
        ext = s.filter(&ext);
    }
    ext.reverse();
    for s in sections {
        ext = s.filter(&ext);
    }
    ext.reverse();
    ext[pad..pad + n].to_vec()
}

/// Hamming-windowed sinc low-pass with unit DC gain.
///
/// `cutoff` is in cycles per sample (0.5 is Nyquist); `taps` should be odd.
pub fn fir_lowpass(cutoff: f64, taps: usize) -> Vec<f64> {
    let mid = (taps as f64 - 1.0) / 2.0;
    let mut h: Vec<f64> = (0..taps)
        .map(|i| {
            let t = i as f64 - mid;
            let sinc = if t == 0.0 {
                2.0 * cutoff
            } else {
                (2.0 * PI * cutoff * t).sin() / (PI * t)
            };
            let w = if taps > 1 {
                0.54 - 0.46 * (2.0 * PI * i as f64 / (taps as f64 - 1.0)).cos()
            } else {
                1.0
            };
            sinc * w
        })
        .collect();
    let dc: f64 = h.iter().sum();
    h.iter_mut().for_each(|v| *v /= dc);
    h
}

/// Centered convolution with an odd-length symmetric FIR, edges mirrored.
pub fn fir_zero_phase(taps: &[f64], x: &[f64]) -> Vec<f64> {
    let n = x.len() as i64;
    let half = (taps.len() / 2) as i64;
    let at = |i: i64| -> f64 {
        if n == 1 {
            return x[0];
        }
        let period = 2 * (n - 1);
        let mut j = i.rem_euclid(period);
        if j >= n {
            j = period - j;
        }
        x[j as usize]
    };
    (0..n)
        .map(|i| {
            taps.iter()
                .enumerate()
                .map(|(k, &h)| h * at(i + half - k as i64))
                .sum()
        })
        .collect()
}

/// Symmetric Hann window.
pub fn hann(n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![1.0];
    }
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / (n as f64 - 1.0)).cos())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lowpass_gain_at_dc_and_cutoff() {
        let s = Biquad::lowpass(15.0, 977.0);
        assert!((s.response(0.0, 977.0).norm() - 1.0).abs() < 1e-12);
        assert!((s.response(15.0, 977.0).norm() - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-9);
        let h = Biquad::highpass(30.0, 977.0);
        assert!(h.response(0.0, 977.0).norm() < 1e-12);
        assert!((h.response(488.5, 977.0).norm() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn filtfilt_has_no_delay() {
        let rate = 500.0;
        let x: Vec<f64> = (0..2000)
            .map(|i| (2.0 * PI * 3.0 * i as f64 / rate).sin())
            .collect();
        let y = filtfilt(&[Biquad::lowpass(40.0, rate)], &x);
        for i in 200..1800 {
            assert!((y[i] - x[i]).abs() < 1e-3);
        }
    }

    #[test]
    fn fir_is_symmetric_with_unit_dc() {
        let h = fir_lowpass(0.1, 33);
        assert!((h.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for i in 0..h.len() {
            assert!((h[i] - h[h.len() - 1 - i]).abs() < 1e-15);
        }
        let x = vec![2.0; 50];
        assert!(fir_zero_phase(&h, &x)
            .iter()
            .all(|v| (v - 2.0).abs() < 1e-12));
    }

    #[test]
    fn hann_endpoints() {
        let w = hann(5);
        assert_eq!(w[0], 0.0);
        assert!((w[2] - 1.0).abs() < 1e-15);
    }
}
