//! Hermite wavelets: energy-normalized negative derivatives of a Gaussian.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{invalid, Error, Result};

/// Continuous evaluator of the order-`ℓ` wavelet with width `sigma`.
///
/// Order 0 is the Gaussian, order 2 the Mexican hat. Every instance has unit
/// energy, `∫ φ(t)² dt = 1`, and positive value (order 0, 2) or positive
/// slope (odd orders) at the origin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HermiteWavelet {
    order: usize,
    sigma: f64,
    scale: f64,
}

impl HermiteWavelet {
    pub fn new(order: usize, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(invalid("sigma", format!("{sigma} must be positive")));
        }
        let sign = if order == 0 { 1.0 } else { -1.0 };
        Ok(HermiteWavelet {
            order,
            sigma,
            scale: sign / closed_form_energy(order, sigma).sqrt(),
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// ℓ-th derivative of the Gaussian density, by the three-term recursion
    /// `g⁽ˡ⁾ = -((ℓ-1) g⁽ˡ⁻²⁾ + t g⁽ˡ⁻¹⁾) / σ²`.
    pub fn unnormalized(&self, t: f64) -> f64 {
        let s2 = self.sigma * self.sigma;
        let g0 = (-t * t / (2.0 * s2)).exp() / ((2.0 * PI).sqrt() * self.sigma);
        let (mut prev, mut cur) = (0.0, g0);
        for l in 1..=self.order {
            let next = -((l as f64 - 1.0) * prev + t * cur) / s2;
            prev = cur;
            cur = next;
        }
        cur
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.scale * self.unnormalized(t)
    }
}

/// Convenience constructor matching [`HermiteWavelet::new`].
pub fn hermite_wavelet(order: usize, sigma: f64) -> Result<HermiteWavelet> {
    HermiteWavelet::new(order, sigma)
}

/// Energy of the unnormalized derivative: `(2ℓ-1)!! / (2^{ℓ+1} √π σ^{2ℓ+1})`.
pub fn closed_form_energy(order: usize, sigma: f64) -> f64 {
    let double_factorial: f64 = (1..=order).map(|k| (2 * k - 1) as f64).product();
    double_factorial / (2f64.powi(order as i32 + 1) * PI.sqrt() * sigma.powi(2 * order as i32 + 1))
}

/// Trapezoidal estimate of `∫ f(t)² dt` over `[-half_width, half_width]`.
pub fn quadrature_energy(f: impl Fn(f64) -> f64, half_width: f64, step: f64) -> f64 {
    let n = (half_width / step).ceil() as i64;
    let h = half_width / n as f64;
    let mut acc = 0.0;
    for i in -n..=n {
        let v = f(i as f64 * h);
        let w = if i.abs() == n { 0.5 } else { 1.0 };
        acc += w * v * v;
    }
    acc * h
}

/// Energy of the unnormalized order-`ℓ` derivative, by quadrature.
///
/// The integrand decays like a Gaussian, so the trapezoidal rule on a wide
/// interval is accurate to near machine precision.
pub fn atom_energy_unnormalized(order: usize, sigma: f64) -> Result<f64> {
    let w = HermiteWavelet::new(order, sigma)?;
    let half_width = (14.0 + 2.0 * (order as f64).sqrt()) * sigma;
    Ok(quadrature_energy(
        |t| w.unnormalized(t),
        half_width,
        sigma / 64.0,
    ))
}

/// A sampled, truncated and shifted wavelet kernel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveletAtom {
    pub order: usize,
    /// Width, seconds.
    pub sigma: f64,
    /// Truncation half-width, seconds.
    pub truncation: f64,
    pub rate: f64,
    /// Samples on each side of the center with non-zero support.
    pub half_width: usize,
    /// Shared center offset of the kernel, in samples.
    pub shift: usize,
    /// `2 * shift + 1` samples; zero where `|n - shift| > half_width`.
    pub kernel: Vec<f64>,
}

impl WaveletAtom {
    /// `Σ kernel²`.
    pub fn energy(&self) -> f64 {
        self.kernel.iter().map(|v| v * v).sum()
    }

    /// `T_s Σ kernel²`, the Riemann estimate of the continuous energy.
    pub fn normalized_energy(&self) -> f64 {
        self.energy() / self.rate
    }

    pub fn center_value(&self) -> f64 {
        self.kernel[self.shift]
    }
}

/// Number of samples `⌊truncation * rate⌋` inside the half support.
pub fn half_width(truncation: f64, rate: f64) -> usize {
    (truncation * rate + 1e-9).floor() as usize
}

/// Samples `wavelet` on `[-truncation, truncation]` at `rate`.
///
/// `shift` sets the common center (the largest half-width in the dictionary);
/// it defaults to this atom's own half-width.
pub fn sample_atom(
    wavelet: &HermiteWavelet,
    truncation: f64,
    rate: f64,
    shift: Option<usize>,
) -> Result<WaveletAtom> {
    if !(rate > 0.0) {
        return Err(invalid("rate", "must be positive"));
    }
    if rate * wavelet.sigma() < 4.0 {
        return Err(Error::Undersampled(rate * wavelet.sigma()));
    }
    if !(truncation > 0.0) {
        return Err(invalid("truncation", "must be positive"));
    }
    let nm = half_width(truncation, rate);
    let shift = shift.unwrap_or(nm);
    if shift < nm {
        return Err(invalid(
            "shift",
            format!("shared shift {shift} is smaller than the atom half-width {nm}"),
        ));
    }
    let kernel = (0..=2 * shift)
        .map(|n| {
            let d = n as i64 - shift as i64;
            if d.unsigned_abs() as usize > nm {
                0.0
            } else {
                wavelet.eval(d as f64 / rate)
            }
        })
        .collect();
    Ok(WaveletAtom {
        order: wavelet.order(),
        sigma: wavelet.sigma(),
        truncation,
        rate,
        half_width: nm,
        shift,
        kernel,
    })
}

/// Atom orders, widths and sampling for a wavelet dictionary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DictionarySpec {
    /// `(order, sigma_seconds)` per atom.
    pub atoms: Vec<(usize, f64)>,
    pub rate: f64,
    /// Truncation half-width as a multiple of sigma.
    pub truncation: f64,
}

impl DictionarySpec {
    /// Every order in `orders` crossed with every width in `sigmas`.
    pub fn grid(orders: &[usize], sigmas: &[f64], rate: f64, truncation: f64) -> Result<Self> {
        let atoms = orders
            .iter()
            .flat_map(|&o| sigmas.iter().map(move |&s| (o, s)))
            .collect();
        let spec = DictionarySpec {
            atoms,
            rate,
            truncation,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.atoms.is_empty() {
            return Err(invalid("atoms", "dictionary needs at least one atom"));
        }
        if !(self.truncation > 0.0) {
            return Err(invalid("truncation", "must be positive"));
        }
        for (i, &(order, sigma)) in self.atoms.iter().enumerate() {
            if !(sigma > 0.0) {
                return Err(invalid("sigmas", format!("{sigma} must be positive")));
            }
            if self.rate * sigma < 4.0 {
                return Err(Error::Undersampled(self.rate * sigma));
            }
            let previous = self.atoms[..i].iter().rev().find(|a| a.0 == order);
            if let Some(&(_, s)) = previous {
                if sigma <= s {
                    return Err(invalid(
                        "sigmas",
                        "widths must be strictly increasing within each order",
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// Largest half-width, shared by every kernel.
    pub fn shift(&self) -> usize {
        self.atoms
            .iter()
            .map(|&(_, s)| half_width(self.truncation * s, self.rate))
            .max()
            .unwrap_or(0)
    }

    /// Samples every atom on the common support.
    pub fn build(&self) -> Result<Vec<WaveletAtom>> {
        self.validate()?;
        let shift = self.shift();
        self.atoms
            .iter()
            .map(|&(order, sigma)| {
                let w = HermiteWavelet::new(order, sigma)?;
                sample_atom(&w, self.truncation * sigma, self.rate, Some(shift))
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_peak_value() {
        let w = hermite_wavelet(0, 1.0).unwrap();
        assert!((w.eval(0.0) - PI.powf(-0.25)).abs() < 1e-12);
        assert!((w.eval(0.0) - 0.7511).abs() < 1e-4);
    }

    #[test]
    fn mexican_hat_crosses_zero_at_sigma() {
        let w = hermite_wavelet(2, 1.0).unwrap();
        assert!(w.eval(1.0).abs() < 1e-14);
        assert!(w.eval(-1.0).abs() < 1e-14);
        assert!(w.eval(0.0) > 0.0);
        assert!(w.eval(2.0) < 0.0);
    }

    #[test]
    fn low_orders_match_explicit_formulas() {
        let s: f64 = 0.7;
        let g = |t: f64| (-t * t / (2.0 * s * s)).exp() / ((2.0 * PI).sqrt() * s);
        let w1 = hermite_wavelet(1, s).unwrap();
        let w2 = hermite_wavelet(2, s).unwrap();
        for &t in &[-2.0, -0.3, 0.0, 0.4, 1.9] {
            assert!((w1.unnormalized(t) - (-t / (s * s)) * g(t)).abs() < 1e-12);
            let second = (t * t / s.powi(4) - 1.0 / (s * s)) * g(t);
            assert!((w2.unnormalized(t) - second).abs() < 1e-12);
        }
    }

    #[test]
    fn order_three_has_unit_energy() {
        let w = hermite_wavelet(3, 1.0).unwrap();
        let e = quadrature_energy(|t| w.eval(t), 10.0, 1e-3);
        assert!((e - 1.0).abs() < 1e-6);
    }

    #[test]
    fn closed_form_energies() {
        let sp = PI.sqrt();
        assert!((closed_form_energy(0, 1.0) - 1.0 / (2.0 * sp)).abs() < 1e-15);
        assert!((closed_form_energy(1, 1.0) - 1.0 / (4.0 * sp)).abs() < 1e-15);
        assert!((closed_form_energy(2, 1.0) - 3.0 / (8.0 * sp)).abs() < 1e-15);
        assert!((atom_energy_unnormalized(0, 1.0).unwrap() - 0.28209).abs() < 1e-5);
        assert!((atom_energy_unnormalized(1, 1.0).unwrap() - 0.14105).abs() < 1e-5);
        assert!((atom_energy_unnormalized(2, 1.0).unwrap() - 0.21157).abs() < 1e-5);
    }

    #[test]
    fn sampled_half_width() {
        let w = hermite_wavelet(0, 0.01).unwrap();
        let a = sample_atom(&w, 0.05, 977.0, None).unwrap();
        assert_eq!(a.half_width, 48);
        assert_eq!(a.kernel.len(), 97);
        assert_eq!(a.center_value(), w.eval(0.0));
        let peak = a.kernel.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(a.kernel[0].abs() <= 1e-5 * peak);
        assert!(a.kernel[96].abs() <= 1e-5 * peak);
    }

    #[test]
    fn undersampled_atoms_are_rejected() {
        let w = hermite_wavelet(0, 0.01).unwrap();
        assert!(matches!(
            sample_atom(&w, 0.05, 300.0, None),
            Err(Error::Undersampled(_))
        ));
    }

    #[test]
    fn shared_support_pads_narrow_atoms() {
        let spec = DictionarySpec::grid(&[0, 2], &[0.01, 0.02], 977.0, 5.0).unwrap();
        let atoms = spec.build().unwrap();
        assert_eq!(spec.shift(), 97);
        for a in &atoms {
            assert_eq!(a.kernel.len(), 195);
            assert_eq!(a.shift, 97);
        }
        let narrow = &atoms[0];
        assert_eq!(narrow.kernel[97 - 49], 0.0);
        assert!(narrow.kernel[97 - 48] != 0.0);
    }

    #[test]
    fn spec_requires_increasing_widths() {
        assert!(DictionarySpec::grid(&[0], &[0.02, 0.01], 977.0, 5.0).is_err());
        assert!(DictionarySpec::grid(&[0], &[], 977.0, 5.0).is_err());
        assert!(DictionarySpec::grid(&[0, 2], &[0.01, 0.02], 977.0, 5.0).is_ok());
    }
}
