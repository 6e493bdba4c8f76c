//! Synthetic multi-focus signal generation and the preprocessing steps that
//! feed the sparse inference stage (first difference, decimation).
//!
//! A record is generated as a sum of shifted channel kernels driven by
//! periodic spike trains, one per focus, plus white Gaussian noise:
//!
//! ```text
//! y_q[n] = sum_r sum_k A_r[k] h_{r,q}[n - n_{r,k}] + w_q[n]
//! ```
//!
//! Spike positions are rounded to the nearest sample, so individual spikes
//! jitter by at most half a sampling period around `k / f_r + tau_r`.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dsp;
use crate::error::{invalid, Error, Result};
use crate::rng::stream_rng;

/// Acquisition rate of the reference recordings, in Hz.
pub const DEFAULT_RATE: f64 = 977.0;

/// Physiological analysis band.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Band {
    /// Sinus rhythm, 0.5 to 2 Hz.
    Sinus,
    /// Atrial fibrillation, 2 to 10 Hz.
    Af,
    Custom(f64, f64),
}

impl Band {
    pub fn range(&self) -> (f64, f64) {
        match *self {
            Band::Sinus => (0.5, 2.0),
            Band::Af => (2.0, 10.0),
            Band::Custom(lo, hi) => (lo, hi),
        }
    }

    pub fn contains(&self, f: f64) -> bool {
        let (lo, hi) = self.range();
        f >= lo && f <= hi
    }

    /// Longest period that still lies in the band, in seconds.
    pub fn max_period(&self) -> f64 {
        1.0 / self.range().0
    }

    pub fn validate(&self, rate: f64) -> Result<()> {
        let (lo, hi) = self.range();
        if !(lo > 0.0 && hi > lo && hi < rate / 2.0) {
            return Err(invalid(
                "band",
                format!("[{lo}, {hi}] Hz must lie inside (0, {}) Hz", rate / 2.0),
            ));
        }
        Ok(())
    }
}

impl std::str::FromStr for Band {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "sinus" => Ok(Band::Sinus),
            "af" => Ok(Band::Af),
            other => {
                let spec = other
                    .strip_prefix("custom:")
                    .ok_or_else(|| invalid("band", format!("unknown band `{other}`")))?;
                let (lo, hi) = spec
                    .split_once(',')
                    .ok_or_else(|| invalid("band", "expected custom:lo,hi"))?;
                let parse = |v: &str| {
                    v.trim()
                        .parse::<f64>()
                        .map_err(|e| invalid("band", e.to_string()))
                };
                Ok(Band::Custom(parse(lo)?, parse(hi)?))
            }
        }
    }
}

impl std::fmt::Display for Band {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Band::Sinus => write!(f, "sinus"),
            Band::Af => write!(f, "af"),
            Band::Custom(lo, hi) => write!(f, "custom:{lo},{hi}"),
        }
    }
}

/// Gain applied to each activation of a focus.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum AmplitudeSchedule {
    Constant(f64),
    /// `mean * (1 + depth * sin(2 pi freq t))`, evaluated at the spike time.
    Sinusoidal {
        mean: f64,
        depth: f64,
        freq: f64,
    },
}

impl Default for AmplitudeSchedule {
    fn default() -> Self {
        AmplitudeSchedule::Constant(1.0)
    }
}

impl AmplitudeSchedule {
    fn gain(&self, t: f64) -> f64 {
        match *self {
            AmplitudeSchedule::Constant(a) => a,
            AmplitudeSchedule::Sinusoidal { mean, depth, freq } => {
                mean * (1.0 + depth * (2.0 * std::f64::consts::PI * freq * t).sin())
            }
        }
    }
}

/// Ground-truth description of the latent foci.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FociSpec {
    /// Firing frequency of each focus, Hz.
    pub frequencies: Vec<f64>,
    /// Offset of the first activation of each focus, seconds, in `[0, 1/f_r)`.
    pub offsets: Vec<f64>,
    #[serde(default)]
    pub amplitude: AmplitudeSchedule,
    /// Probability that an individual activation is not observed.
    #[serde(default)]
    pub dropout: f64,
}

impl FociSpec {
    /// Foci with unit amplitude and no dropout; frequencies must lie in `band`.
    pub fn new(frequencies: Vec<f64>, offsets: Vec<f64>, band: Band) -> Result<Self> {
        let spec = FociSpec {
            frequencies,
            offsets,
            amplitude: AmplitudeSchedule::default(),
            dropout: 0.0,
        };
        spec.validate()?;
        if let Some(f) = spec.frequencies.iter().find(|f| !band.contains(**f)) {
            return Err(invalid(
                "frequencies",
                format!("{f} Hz outside band {band}"),
            ));
        }
        Ok(spec)
    }

    /// Foci with uniformly random offsets drawn from a seeded generator.
    pub fn with_random_offsets(frequencies: Vec<f64>, band: Band, seed: u64) -> Result<Self> {
        let mut rng = stream_rng(seed, 0x0ff5e7);
        let offsets = frequencies
            .iter()
            .map(|f| rng.random::<f64>() / f)
            .collect();
        FociSpec::new(frequencies, offsets, band)
    }

    pub fn count(&self) -> usize {
        self.frequencies.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.frequencies.is_empty() {
            return Err(invalid("frequencies", "at least one focus is required"));
        }
        if self.offsets.len() != self.frequencies.len() {
            return Err(Error::DimensionMismatch {
                expected: self.frequencies.len(),
                actual: self.offsets.len(),
                context: "focus offsets",
            });
        }
        for (&f, &tau) in self.frequencies.iter().zip(&self.offsets) {
            if !(f > 0.0 && f.is_finite()) {
                return Err(invalid("frequencies", format!("{f} Hz is not positive")));
            }
            if !(0.0..1.0 / f).contains(&tau) {
                return Err(invalid(
                    "offsets",
                    format!("offset {tau} s outside [0, {}) s", 1.0 / f),
                ));
            }
        }
        if !(0.0..=1.0).contains(&self.dropout) {
            return Err(invalid("dropout", "must lie in [0, 1]"));
        }
        Ok(())
    }
}

/// Number of samples covering `duration` seconds at `rate` Hz.
pub fn sample_count(duration: f64, rate: f64) -> usize {
    (duration * rate + 1e-9).floor() as usize
}

/// One amplitude-weighted spike train per focus, each `floor(duration * rate)` samples long.
pub fn generate_spike_trains(
    spec: &FociSpec,
    duration: f64,
    rate: f64,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    spec.validate()?;
    if !(duration > 0.0) {
        return Err(invalid("duration", "must be positive"));
    }
    if !(rate > 0.0) {
        return Err(invalid("rate", "must be positive"));
    }
    if let Some(f) = spec.frequencies.iter().find(|&&f| f >= rate / 2.0) {
        return Err(invalid(
            "frequencies",
            format!("{f} Hz is not below the Nyquist rate {} Hz", rate / 2.0),
        ));
    }
    let n = sample_count(duration, rate);
    let trains = spec
        .frequencies
        .iter()
        .zip(&spec.offsets)
        .enumerate()
        .map(|(r, (&f, &tau))| {
            let mut rng = stream_rng(seed, r as u64 + 1);
            let mut train = vec![0.0; n];
            let period = 1.0 / f;
            let mut k = 0usize;
            loop {
                let t = k as f64 * period + tau;
                if t >= duration {
                    break;
                }
                let idx = (t * rate).round() as usize;
                let dropped = spec.dropout > 0.0 && rng.random::<f64>() < spec.dropout;
                if idx < n && !dropped {
                    train[idx] += spec.amplitude.gain(t);
                }
                k += 1;
            }
            train
        })
        .collect();
    Ok(trains)
}

/// Binary activation sequence obtained by merging all per-focus trains.
pub fn merge_trains(trains: &[Vec<f64>]) -> Vec<f64> {
    let n = trains.iter().map(Vec::len).max().unwrap_or(0);
    let mut out = vec![0.0; n];
    for train in trains {
        for (o, &v) in out.iter_mut().zip(train) {
            if v != 0.0 {
                *o = 1.0;
            }
        }
    }
    out
}

/// Causal impulse responses between every focus and every channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelBank {
    /// `kernels[r][q]`: response from focus `r` to channel `q`.
    kernels: Vec<Vec<Vec<f64>>>,
    /// Extra delay in samples before each kernel starts.
    delays: Vec<Vec<usize>>,
}

impl ChannelBank {
    pub fn new(kernels: Vec<Vec<Vec<f64>>>, delays: Vec<Vec<usize>>) -> Result<Self> {
        if kernels.is_empty() || kernels[0].is_empty() {
            return Err(invalid("kernels", "channel bank must be at least 1x1"));
        }
        let q = kernels[0].len();
        if kernels.iter().any(|row| row.len() != q) {
            return Err(invalid(
                "kernels",
                "every focus needs one kernel per channel",
            ));
        }
        if delays.len() != kernels.len() || delays.iter().any(|row| row.len() != q) {
            return Err(invalid("delays", "delay table must match the kernel table"));
        }
        if kernels.iter().flatten().any(|k| k.is_empty()) {
            return Err(invalid(
                "kernels",
                "kernels must have finite non-empty support",
            ));
        }
        Ok(ChannelBank { kernels, delays })
    }

    /// The same kernel between every focus and every channel, without delay.
    pub fn uniform(kernel: Vec<f64>, foci: usize, channels: usize) -> Result<Self> {
        ChannelBank::new(
            vec![vec![kernel; channels]; foci],
            vec![vec![0; channels]; foci],
        )
    }

    pub fn foci(&self) -> usize {
        self.kernels.len()
    }

    pub fn channels(&self) -> usize {
        self.kernels[0].len()
    }

    pub fn kernel(&self, r: usize, q: usize) -> &[f64] {
        &self.kernels[r][q]
    }

    pub fn delay(&self, r: usize, q: usize) -> usize {
        self.delays[r][q]
    }

    /// Kernel with its delay materialized as leading zeros.
    pub fn effective_kernel(&self, r: usize, q: usize) -> Vec<f64> {
        let mut k = vec![0.0; self.delays[r][q]];
        k.extend_from_slice(&self.kernels[r][q]);
        k
    }
}

/// A multi-channel sampled record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EgmRecord {
    /// `channels[q][n]`, all of equal length.
    pub channels: Vec<Vec<f64>>,
    /// Acquisition rate before decimation, Hz.
    pub fs: f64,
    /// Decimation factor applied so far.
    pub decimation: usize,
    /// Noise standard deviation per channel, when known.
    pub noise_sigma: Vec<f64>,
}

impl EgmRecord {
    pub fn new(
        channels: Vec<Vec<f64>>,
        fs: f64,
        decimation: usize,
        noise_sigma: Vec<f64>,
    ) -> Result<Self> {
        let rec = EgmRecord {
            channels,
            fs,
            decimation,
            noise_sigma,
        };
        rec.validate()?;
        Ok(rec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.channels.is_empty() {
            return Err(invalid("channels", "record has no channels"));
        }
        let len = self.channels[0].len();
        if let Some(c) = self.channels.iter().find(|c| c.len() != len) {
            return Err(Error::DimensionMismatch {
                expected: len,
                actual: c.len(),
                context: "channel length",
            });
        }
        if !(self.fs > 0.0) {
            return Err(invalid("fs", "sampling rate must be positive"));
        }
        if self.decimation == 0 {
            return Err(invalid("decimation", "must be at least 1"));
        }
        if !self.noise_sigma.is_empty() && self.noise_sigma.len() != self.channels.len() {
            return Err(Error::DimensionMismatch {
                expected: self.channels.len(),
                actual: self.noise_sigma.len(),
                context: "noise levels",
            });
        }
        Ok(())
    }

    /// Effective sampling rate `fs / L`.
    pub fn rate(&self) -> f64 {
        self.fs / self.decimation as f64
    }

    pub fn len(&self) -> usize {
        self.channels[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn channel_count(&self) -> usize {
        self.channels.len()
    }
}

/// Convolves each focus train with its channel kernel and adds seeded noise.
pub fn synthesize_egm(
    trains: &[Vec<f64>],
    bank: &ChannelBank,
    noise_sigma: &[f64],
    rate: f64,
    seed: u64,
) -> Result<EgmRecord> {
    if trains.len() != bank.foci() {
        return Err(Error::DimensionMismatch {
            expected: bank.foci(),
            actual: trains.len(),
            context: "spike trains vs channel bank foci",
        });
    }
    if noise_sigma.len() != bank.channels() {
        return Err(Error::DimensionMismatch {
            expected: bank.channels(),
            actual: noise_sigma.len(),
            context: "noise levels vs channels",
        });
    }
    if let Some(s) = noise_sigma.iter().find(|s| !(**s >= 0.0)) {
        return Err(invalid("noise_sigma", format!("{s} is negative")));
    }
    let n = trains.first().map_or(0, Vec::len);
    if trains.iter().any(|t| t.len() != n) {
        return Err(invalid("trains", "all spike trains must have equal length"));
    }
    let channels = (0..bank.channels())
        .map(|q| {
            let mut y = vec![0.0; n];
            for (r, train) in trains.iter().enumerate() {
                let kernel = bank.effective_kernel(r, q);
                for (j, &a) in train.iter().enumerate().filter(|(_, a)| **a != 0.0) {
                    for (d, &h) in kernel.iter().enumerate() {
                        match y.get_mut(j + d) {
                            Some(v) => *v += a * h,
                            None => break,
                        }
                    }
                }
            }
            add_noise(&mut y, noise_sigma[q], seed, q as u64);
            y
        })
        .collect();
    EgmRecord::new(channels, rate, 1, noise_sigma.to_vec())
}

fn add_noise(y: &mut [f64], sigma: f64, seed: u64, stream: u64) {
    if sigma == 0.0 {
        return;
    }
    let mut rng = stream_rng(seed, 0x5157_0000 + stream);
    let normal = Normal::new(0.0, sigma).expect("sigma validated as non-negative");
    for v in y.iter_mut() {
        *v += normal.sample(&mut rng);
    }
}

/// `z[n] = y[n] - y[n-1]` for one channel; the output is one sample shorter.
pub fn difference(y: &[f64]) -> Vec<f64> {
    y.windows(2).map(|w| w[1] - w[0]).collect()
}

/// First difference of every channel, removing the baseline.
pub fn first_difference(record: &EgmRecord) -> Result<Vec<Vec<f64>>> {
    if record.len() < 2 {
        return Err(invalid("record", "need at least two samples to difference"));
    }
    Ok(record.channels.iter().map(|y| difference(y)).collect())
}

/// Anti-alias filters each channel and keeps every `factor`-th sample.
///
/// The low-pass is a zero-phase windowed-sinc FIR with cutoff at 80% of the
/// new Nyquist frequency.
pub fn decimate(record: &EgmRecord, factor: usize) -> Result<EgmRecord> {
    if !(1..=4).contains(&factor) {
        return Err(invalid(
            "decimation",
            format!("factor {factor} not in 1..=4"),
        ));
    }
    let total = record.decimation * factor;
    if total > 4 {
        return Err(invalid(
            "decimation",
            format!("accumulated factor {total} exceeds 4"),
        ));
    }
    if factor == 1 {
        return Ok(record.clone());
    }
    let cutoff = 0.8 / (2.0 * factor as f64);
    let taps = dsp::fir_lowpass(cutoff, 16 * factor + 1);
    let channels = record
        .channels
        .iter()
        .map(|y| {
            dsp::fir_zero_phase(&taps, y)
                .into_iter()
                .step_by(factor)
                .collect()
        })
        .collect();
    EgmRecord::new(channels, record.fs, total, record.noise_sigma.clone())
}

/// Parameters of a single quasi-periodic component used by the DFA baseline.
#[derive(Debug, Clone, PartialEq)]
pub struct DfaSignalSpec {
    /// Repetition period, seconds.
    pub period: f64,
    /// Delay of the `k = 0` pulse, seconds.
    pub delay: f64,
    /// Sampled pulse, centered on its middle sample (odd length).
    pub pulse: Vec<f64>,
    pub noise_sigma: f64,
    pub rate: f64,
    pub duration: f64,
}

/// Single periodic pulse train plus white noise.
///
/// Pulses are placed at `floor((k T + tau) fs)` for every integer `k` whose
/// pulse overlaps the record, so the output is stationary from the first sample.
pub fn generate_dfa_signal(spec: &DfaSignalSpec, seed: u64) -> Result<EgmRecord> {
    if !(spec.period > 0.0) || !(spec.rate > 0.0) || !(spec.duration > 0.0) {
        return Err(invalid(
            "period",
            "period, rate and duration must be positive",
        ));
    }
    if spec.pulse.len().is_multiple_of(2) {
        return Err(invalid("pulse", "pulse must have odd length"));
    }
    let support = spec.pulse.len() as f64 / spec.rate;
    if support > spec.period {
        return Err(invalid(
            "pulse",
            format!("support {support} s exceeds the period {} s", spec.period),
        ));
    }
    if !(spec.noise_sigma >= 0.0) {
        return Err(invalid("noise_sigma", "must be non-negative"));
    }
    let n = sample_count(spec.duration, spec.rate);
    let half = (spec.pulse.len() / 2) as i64;
    let mut y = vec![0.0; n];
    let k_min = ((-spec.delay - support) / spec.period).floor() as i64 - 1;
    let k_max = ((spec.duration - spec.delay + support) / spec.period).ceil() as i64 + 1;
    for k in k_min..=k_max {
        let center = ((k as f64 * spec.period + spec.delay) * spec.rate + 1e-9).floor() as i64;
        for (j, &p) in spec.pulse.iter().enumerate() {
            let idx = center - half + j as i64;
            if (0..n as i64).contains(&idx) {
                y[idx as usize] += p;
            }
        }
    }
    add_noise(&mut y, spec.noise_sigma, seed, 0);
    EgmRecord::new(vec![y], spec.rate, 1, vec![spec.noise_sigma])
}
