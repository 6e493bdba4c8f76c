//! File formats.
//!
//! * Signal: CSV with header `n,ch0,ch1,...`, plus a JSON sidecar holding the
//!   sampling metadata (`<stem>.meta.json`).
//! * Coefficients: sparse triplets `m,k,value` preceded by a `#` line with the
//!   layout (`atoms`, `positions`, `samples`, `shift`, `offset`, `start`).
//! * Activations: `index,weight` preceded by `# len=..,rate=..`.
//! * Spectra and traces: plain two-column CSV.
//!
//! Floats are written with 17 significant digits so they read back exactly.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::coefficients::CoefficientVector;
use crate::dictionary::DictionaryOperator;
use crate::error::{Error, Result};
use crate::refractory::ActivationSequence;
use crate::signal_model::{EgmRecord, FociSpec};
use crate::spectral::Spectrum;

/// Formats a float so that parsing it gives back the same bits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn parse_err(path: &Path, reason: impl Into<String>) -> Error {
    Error::Parse {
        file: path.display().to_string(),
        reason: reason.into(),
    }
}

fn parse_f64(path: &Path, line: usize, s: &str) -> Result<f64> {
    s.trim()
        .parse()
        .map_err(|e| parse_err(path, format!("line {line}: `{s}`: {e}")))
}

fn parse_usize(path: &Path, line: usize, s: &str) -> Result<usize> {
    s.trim()
        .parse()
        .map_err(|e| parse_err(path, format!("line {line}: `{s}`: {e}")))
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, text)?;
    Ok(())
}

/// Sampling metadata stored beside a signal CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalMeta {
    /// Acquisition rate before decimation, Hz.
    pub fs: f64,
    /// Decimation factor already applied.
    #[serde(rename = "L")]
    pub decimation: usize,
    /// Noise standard deviation per channel.
    pub sigma_q: Vec<f64>,
    /// Ground truth for synthetic records.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub foci: Option<FociSpec>,
}

/// `signal.csv` → `signal.meta.json`.
pub fn sidecar_path(csv: &Path) -> PathBuf {
    csv.with_extension("meta.json")
}

pub fn write_signal(path: &Path, record: &EgmRecord, foci: Option<&FociSpec>) -> Result<()> {
    let mut s = String::from("n");
    for q in 0..record.channel_count() {
        write!(s, ",ch{q}").unwrap();
    }
    s.push('\n');
    for i in 0..record.len() {
        write!(s, "{i}").unwrap();
        for ch in &record.channels {
            write!(s, ",{}", fmt_f64(ch[i])).unwrap();
        }
        s.push('\n');
    }
    write_file(path, &s)?;
    let meta = SignalMeta {
        fs: record.fs,
        decimation: record.decimation,
        sigma_q: record.noise_sigma.clone(),
        foci: foci.cloned(),
    };
    write_file(&sidecar_path(path), &serde_json::to_string_pretty(&meta)?)
}

pub fn read_signal(path: &Path) -> Result<(EgmRecord, SignalMeta)> {
    let text = fs::read_to_string(path)?;
    let meta_path = sidecar_path(path);
    let meta: SignalMeta = serde_json::from_str(&fs::read_to_string(&meta_path)?)
        .map_err(|e| parse_err(&meta_path, e.to_string()))?;
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or_else(|| parse_err(path, "empty file"))?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    if cols.first() != Some(&"n") || cols.len() < 2 {
        return Err(parse_err(path, "header must be `n,ch0,...`"));
    }
    let nch = cols.len() - 1;
    let mut channels = vec![Vec::new(); nch];
    for (i, (ln, line)) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != nch + 1 {
            return Err(parse_err(
                path,
                format!("line {}: expected {} fields", ln + 1, nch + 1),
            ));
        }
        if parse_usize(path, ln + 1, fields[0])? != i {
            return Err(parse_err(
                path,
                format!("line {}: sample index out of order", ln + 1),
            ));
        }
        for (ch, f) in channels.iter_mut().zip(&fields[1..]) {
            ch.push(parse_f64(path, ln + 1, f)?);
        }
    }
    let sigma = if meta.sigma_q.len() == nch {
        meta.sigma_q.clone()
    } else {
        vec![0.0; nch]
    };
    let record = EgmRecord::new(channels, meta.fs, meta.decimation, sigma)?;
    Ok((record, meta))
}

/// Coefficients together with the map from positions to signal time.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientFile {
    pub beta: CoefficientVector,
    pub samples: usize,
    pub shift: usize,
    pub offset: usize,
    /// Signal sample of the first observed sample covered by the fit.
    pub start: usize,
}

impl CoefficientFile {
    pub fn from_operator(beta: CoefficientVector, op: &DictionaryOperator, start: usize) -> Self {
        CoefficientFile {
            beta,
            samples: op.n_samples(),
            shift: op.shift(),
            offset: op.offset(),
            start,
        }
    }

    /// Signal sample of position `p`.
    pub fn activation_time(&self, p: usize) -> i64 {
        p as i64 - self.offset as i64 + self.shift as i64 + self.start as i64
    }
}

pub fn write_coefficients(path: &Path, file: &CoefficientFile) -> Result<()> {
    let mut s = format!(
        "# atoms={},positions={},samples={},shift={},offset={},start={}\nm,k,value\n",
        file.beta.atoms(),
        file.beta.positions(),
        file.samples,
        file.shift,
        file.offset,
        file.start
    );
    for (m, k, v) in file.beta.triplets() {
        writeln!(s, "{m},{k},{}", fmt_f64(v)).unwrap();
    }
    write_file(path, &s)
}

fn header_fields(path: &Path, line: &str) -> Result<Vec<(String, String)>> {
    line.trim_start_matches('#')
        .split(',')
        .map(|kv| {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| parse_err(path, format!("malformed header entry `{kv}`")))?;
            Ok((k.trim().to_string(), v.trim().to_string()))
        })
        .collect()
}

fn header_value<'a>(path: &Path, fields: &'a [(String, String)], key: &str) -> Result<&'a str> {
    fields
        .iter()
        .find(|(k, _)| k == key)
        .map(|(_, v)| v.as_str())
        .ok_or_else(|| parse_err(path, format!("header lacks `{key}`")))
}

pub fn read_coefficients(path: &Path) -> Result<CoefficientFile> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate();
    let (_, first) = lines.next().ok_or_else(|| parse_err(path, "empty file"))?;
    if !first.starts_with('#') {
        return Err(parse_err(path, "missing `#` layout line"));
    }
    let h = header_fields(path, first)?;
    let get = |k: &str| -> Result<usize> { parse_usize(path, 1, header_value(path, &h, k)?) };
    let (atoms, positions) = (get("atoms")?, get("positions")?);
    let mut beta = CoefficientVector::zeros(atoms, positions);
    for (ln, line) in lines {
        let line = line.trim();
        if line.is_empty() || line == "m,k,value" {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 3 {
            return Err(parse_err(
                path,
                format!("line {}: expected m,k,value", ln + 1),
            ));
        }
        let (m, k) = (
            parse_usize(path, ln + 1, f[0])?,
            parse_usize(path, ln + 1, f[1])?,
        );
        if m >= atoms || k >= positions {
            return Err(parse_err(
                path,
                format!("line {}: ({m}, {k}) out of range", ln + 1),
            ));
        }
        beta.set(m, k, parse_f64(path, ln + 1, f[2])?);
    }
    Ok(CoefficientFile {
        beta,
        samples: get("samples")?,
        shift: get("shift")?,
        offset: get("offset")?,
        start: get("start")?,
    })
}

pub fn write_activations(path: &Path, seq: &ActivationSequence, rate: f64) -> Result<()> {
    let mut s = format!("# len={},rate={}\nindex,weight\n", seq.len, fmt_f64(rate));
    for (i, w) in seq.indices.iter().zip(&seq.weights) {
        writeln!(s, "{i},{}", fmt_f64(*w)).unwrap();
    }
    write_file(path, &s)
}

/// Returns the sequence and its sampling rate.
pub fn read_activations(path: &Path) -> Result<(ActivationSequence, f64)> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate();
    let (_, first) = lines.next().ok_or_else(|| parse_err(path, "empty file"))?;
    if !first.starts_with('#') {
        return Err(parse_err(path, "missing `# len=..,rate=..` line"));
    }
    let h = header_fields(path, first)?;
    let len = parse_usize(path, 1, header_value(path, &h, "len")?)?;
    let rate = parse_f64(path, 1, header_value(path, &h, "rate")?)?;
    let mut seq = ActivationSequence::empty(len);
    for (ln, line) in lines {
        let line = line.trim();
        if line.is_empty() || line == "index,weight" {
            continue;
        }
        let (i, w) = line
            .split_once(',')
            .ok_or_else(|| parse_err(path, format!("line {}: expected index,weight", ln + 1)))?;
        let i = parse_usize(path, ln + 1, i)?;
        if i >= len || seq.indices.last().is_some_and(|&p| p >= i) {
            return Err(parse_err(
                path,
                format!("line {}: index {i} out of range or order", ln + 1),
            ));
        }
        seq.indices.push(i);
        seq.weights.push(parse_f64(path, ln + 1, w)?);
    }
    Ok((seq, rate))
}

/// Magnitude spectrum restricted to `[0, f_max]`.
pub fn write_spectrum(path: &Path, spec: &Spectrum, f_max: f64) -> Result<()> {
    let mut s = String::from("freq_hz,magnitude\n");
    for (f, v) in spec.freqs.iter().zip(&spec.values) {
        if *f > f_max {
            break;
        }
        writeln!(s, "{},{}", fmt_f64(*f), fmt_f64(v.norm())).unwrap();
    }
    write_file(path, &s)
}

pub fn write_trace(path: &Path, trace: &[f64]) -> Result<()> {
    let mut s = String::from("iteration,cost\n");
    for (i, c) in trace.iter().enumerate() {
        writeln!(s, "{i},{}", fmt_f64(*c)).unwrap();
    }
    write_file(path, &s)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_file(path, &text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_text_round_trips() {
        for v in [
            0.1,
            1.0 / 3.0,
            -2.5e-300,
            6.02214076e23,
            0.0,
            f64::MIN_POSITIVE,
        ] {
            assert_eq!(fmt_f64(v).parse::<f64>().unwrap().to_bits(), v.to_bits());
        }
    }

    #[test]
    fn signal_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sig.csv");
        let rec = EgmRecord::new(
            vec![vec![0.1, -0.2, 0.3], vec![1.0, 2.0, 3.0]],
            977.0,
            4,
            vec![5e-4, 1e-3],
        )
        .unwrap();
        write_signal(&path, &rec, None).unwrap();
        let (back, meta) = read_signal(&path).unwrap();
        assert_eq!(back.channels, rec.channels);
        assert_eq!(meta.decimation, 4);
        assert_eq!(back.rate(), 244.25);
    }

    #[test]
    fn coefficient_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.csv");
        let mut beta = CoefficientVector::zeros(2, 5);
        beta.set(1, 3, 0.123456789);
        beta.set(0, 0, -7.0);
        let file = CoefficientFile {
            beta,
            samples: 9,
            shift: 2,
            offset: 0,
            start: 4,
        };
        write_coefficients(&path, &file).unwrap();
        assert_eq!(read_coefficients(&path).unwrap(), file);
        assert_eq!(file.activation_time(3), 9);
    }

    #[test]
    fn activation_round_trip_and_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.csv");
        let seq = ActivationSequence {
            indices: vec![3, 40],
            weights: vec![0.5, 1.0 / 7.0],
            len: 100,
        };
        write_activations(&path, &seq, 244.25).unwrap();
        assert_eq!(read_activations(&path).unwrap(), (seq, 244.25));
        fs::write(&path, "# len=10,rate=1\nindex,weight\n12,1\n").unwrap();
        assert!(matches!(read_activations(&path), Err(Error::Parse { .. })));
    }
}
