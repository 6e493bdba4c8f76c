//! Second-order IIR notch.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::dsp::{filtfilt_padded, Biquad};
use crate::error::{invalid, Result};

/// Notch with zeros on the unit circle at `±2π f₀ / rate` and −3 dB points at `f₀ ± B/2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NotchFilter {
    pub center: f64,
    pub bandwidth: f64,
    pub rate: f64,
    b: [f64; 3],
    a: [f64; 3],
}

impl NotchFilter {
    fn section(&self) -> Biquad {
        Biquad::new(self.b, self.a)
    }

    /// Pole radius.
    pub fn pole_radius(&self) -> f64 {
        self.a[2].sqrt()
    }

    pub fn response(&self, f: f64) -> Complex64 {
        self.section().response(f, self.rate)
    }

    pub fn gain(&self, f: f64) -> f64 {
        self.response(f).norm()
    }

    /// Single causal pass.
    pub fn filter(&self, x: &[f64]) -> Vec<f64> {
        self.section().filter(x)
    }

    /// Decay time of the pole pair, in samples.
    pub fn time_constant(&self) -> f64 {
        -1.0 / self.pole_radius().ln()
    }

    /// Forward-backward pass: zero phase, squared magnitude response. The
    /// edges are padded by six time constants.
    pub fn filter_zero_phase(&self, x: &[f64]) -> Vec<f64> {
        let pad = (6.0 * self.time_constant()).ceil() as usize;
        filtfilt_padded(&[self.section()], x, pad)
    }
}

/// Designs the notch by the bilinear transform of an analog notch, which puts
/// the −3 dB edges exactly at `f₀ ± B/2` on the warped axis.
pub fn notch_design(center: f64, bandwidth: f64, rate: f64) -> Result<NotchFilter> {
    if !(rate > 0.0) {
        return Err(invalid("rate", "must be positive"));
    }
    if !(center > 0.0 && center < rate / 2.0) {
        return Err(invalid(
            "notch",
            format!("center {center} Hz outside (0, {}) Hz", rate / 2.0),
        ));
    }
    if !(bandwidth > 0.0) {
        return Err(invalid("notch", "bandwidth must be positive"));
    }
    if center - bandwidth / 2.0 <= 0.0 || center + bandwidth / 2.0 >= rate / 2.0 {
        return Err(invalid(
            "notch",
            format!("bandwidth {bandwidth} Hz too wide for a notch at {center} Hz"),
        ));
    }
    let w0 = 2.0 * PI * center / rate;
    let beta = (PI * bandwidth / rate).tan();
    let gain = 1.0 / (1.0 + beta);
    let c = w0.cos();
    Ok(NotchFilter {
        center,
        bandwidth,
        rate,
        b: [gain, -2.0 * gain * c, gain],
        a: [1.0, -2.0 * gain * c, 2.0 * gain - 1.0],
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn notch_response() {
        let n = notch_design(6.0, 0.5, 244.25).unwrap();
        assert!(n.gain(6.0) <= 1e-6);
        assert!((n.gain(0.0) - 1.0).abs() <= 1e-6);
        assert!((n.gain(244.25 / 2.0) - 1.0).abs() <= 1e-6);
        let half = std::f64::consts::FRAC_1_SQRT_2;
        assert!((n.gain(5.75) - half).abs() < 0.05 * half);
        assert!((n.gain(6.25) - half).abs() < 0.05 * half);
        assert!(n.pole_radius() < 1.0);
    }

    #[test]
    fn rejects_bad_designs() {
        assert!(notch_design(0.0, 0.5, 100.0).is_err());
        assert!(notch_design(50.0, 0.5, 100.0).is_err());
        assert!(notch_design(0.2, 0.5, 100.0).is_err());
        assert!(notch_design(5.0, 0.0, 100.0).is_err());
    }

    #[test]
    fn removes_a_tone() {
        let rate = 244.25;
        let x: Vec<f64> = (0..4000)
            .map(|i| (2.0 * PI * 5.0 * i as f64 / rate).sin())
            .collect();
        let y = notch_design(5.0, 0.5, rate).unwrap().filter_zero_phase(&x);
        let tail: f64 = y[1500..2500].iter().map(|v| v.abs()).fold(0.0, f64::max);
        assert!(tail < 1e-3);
    }
}
