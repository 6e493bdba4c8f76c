//! Pipeline configuration: a flat `key = value` text format.
//!
//! Keys belong to sections, written either as `[section]` headers or as
//! dotted keys (`solver.lambda = 1e-6`). Lines starting with `#` or `;` are
//! comments. Lists are comma separated. `auto` selects the derived default.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dictionary::BoundaryMode;
use crate::error::{Error, Result};
use crate::signal_model::Band;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignalSource {
    Synthetic,
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalConfig {
    pub source: SignalSource,
    /// Seconds of synthetic signal.
    pub duration: f64,
    /// Acquisition rate, Hz.
    pub fs: f64,
    /// Total decimation factor `L` applied before inference.
    pub decimation: usize,
    pub channels: usize,
    pub foci: Vec<f64>,
    /// Focus offsets in seconds; random when absent.
    pub offsets: Option<Vec<f64>>,
    pub amplitude: f64,
    pub dropout: f64,
    /// Hermite order of the synthetic channel responses.
    pub kernel_order: usize,
    pub kernel_sigma: f64,
    pub kernel_gain: f64,
    /// Largest propagation delay of a focus to a channel, seconds.
    pub max_delay: f64,
    pub noise_sigma: f64,
    /// Infer on the first difference of the signal.
    pub difference: bool,
}

impl Default for SignalConfig {
    fn default() -> Self {
        SignalConfig {
            source: SignalSource::Synthetic,
            duration: 12.0,
            fs: 977.0,
            decimation: 4,
            channels: 1,
            foci: vec![4.0, 6.0, 7.0],
            offsets: None,
            amplitude: 1.0,
            dropout: 0.0,
            kernel_order: 1,
            kernel_sigma: 0.017,
            kernel_gain: 0.1,
            max_delay: 0.02,
            noise_sigma: 5e-4,
            difference: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DictionaryConfig {
    pub orders: Vec<usize>,
    /// Widths in seconds; a geometric grid from the sampling limit when absent.
    pub sigmas: Option<Vec<f64>>,
    /// Truncation half-width in units of sigma.
    pub truncation: f64,
    pub boundary: BoundaryMode,
}

impl Default for DictionaryConfig {
    fn default() -> Self {
        DictionaryConfig {
            orders: vec![0, 2],
            sigmas: None,
            truncation: 5.0,
            boundary: BoundaryMode::Interior,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    Lasso,
    Cplasso,
}

impl std::str::FromStr for SolverKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "lasso" => Ok(SolverKind::Lasso),
            "cplasso" | "cp-lasso" => Ok(SolverKind::Cplasso),
            other => Err(Error::Config(format!("unknown solver `{other}`"))),
        }
    }
}

impl std::fmt::Display for SolverKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SolverKind::Lasso => "lasso",
            SolverKind::Cplasso => "cplasso",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FormulationKind {
    Constrained,
    Penalized,
}

impl std::str::FromStr for FormulationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "constrained" => Ok(FormulationKind::Constrained),
            "penalized" => Ok(FormulationKind::Penalized),
            other => Err(Error::Config(format!("unknown formulation `{other}`"))),
        }
    }
}

impl std::fmt::Display for FormulationKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            FormulationKind::Constrained => "constrained",
            FormulationKind::Penalized => "penalized",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub kind: SolverKind,
    /// 1e-4 in the sinus band, 1e-6 otherwise, when absent.
    pub lambda: Option<f64>,
    pub max_iter: usize,
    pub tol: f64,
    pub formulation: FormulationKind,
    /// Residual bound; `σ √N` when absent.
    pub xi: Option<f64>,
    /// Cross-product weight; `10³ λ` when absent.
    pub rho: Option<f64>,
    pub sca_max_outer: usize,
    pub inner_tol: f64,
    /// Iteration cap per surrogate solve. Unconverged solves still return a
    /// feasible iterate and are flagged in the report.
    pub inner_max_iter: usize,
    /// Cross-products windows, seconds.
    pub chunk: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            kind: SolverKind::Lasso,
            lambda: None,
            max_iter: 5000,
            tol: 1e-6,
            formulation: FormulationKind::Constrained,
            xi: None,
            rho: None,
            sca_max_outer: 50,
            inner_tol: 1e-7,
            inner_max_iter: 2000,
            chunk: 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SelectionConfig {
    /// Noise level; 2e-3 in the sinus band, 5e-4 otherwise, when absent.
    pub sigma: Option<f64>,
    /// Threshold; `3σ` when absent.
    pub eta: Option<f64>,
    /// Minimum gap in samples; one refractory period when absent.
    pub nmin: Option<usize>,
    /// Minimum activations for a usable channel.
    pub pmin: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralConfig {
    pub band: Band,
    pub gamma: f64,
    /// Segment length, seconds.
    pub window: f64,
    pub notch_bw: f64,
    pub max_peaks: usize,
    pub weighted: bool,
    /// Band-limit the activation sequence before deflation.
    pub prefilter: bool,
    pub dfa: bool,
}

impl Default for SpectralConfig {
    fn default() -> Self {
        SpectralConfig {
            band: Band::Af,
            gamma: 0.3,
            window: 4.0,
            notch_bw: 0.5,
            max_peaks: 12,
            weighted: false,
            prefilter: true,
            dfa: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub seed: u64,
    /// Where artifacts go; not part of the echoed configuration.
    #[serde(skip_serializing, default)]
    pub output: PathBuf,
    pub signal: SignalConfig,
    pub dictionary: DictionaryConfig,
    pub solver: SolverConfig,
    pub selection: SelectionConfig,
    pub spectral: SpectralConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            seed: 0,
            output: PathBuf::from("out"),
            signal: SignalConfig::default(),
            dictionary: DictionaryConfig::default(),
            solver: SolverConfig::default(),
            selection: SelectionConfig::default(),
            spectral: SpectralConfig::default(),
        }
    }
}

fn cfg_err(key: &str, reason: impl std::fmt::Display) -> Error {
    Error::Config(format!("`{key}`: {reason}"))
}

fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    v.trim().parse().map_err(|e| cfg_err(key, e))
}

fn opt<T: std::str::FromStr>(key: &str, v: &str) -> Result<Option<T>>
where
    T::Err: std::fmt::Display,
{
    if v.trim() == "auto" {
        Ok(None)
    } else {
        num(key, v).map(Some)
    }
}

fn list<T: std::str::FromStr>(key: &str, v: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    v.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| num(key, s))
        .collect()
}

fn flag(key: &str, v: &str) -> Result<bool> {
    match v.trim() {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        other => Err(cfg_err(key, format!("`{other}` is not a boolean"))),
    }
}

fn show_list<T: std::fmt::Display>(v: &[T]) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

fn show_opt<T: std::fmt::Display>(v: &Option<T>) -> String {
    v.as_ref()
        .map_or_else(|| "auto".to_string(), |x| x.to_string())
}

impl PipelineConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = PipelineConfig::default();
        let mut section = String::new();
        for (ln, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                section = name.trim().to_string();
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", ln + 1)))?;
            let k = k.trim();
            let key = if section.is_empty() || k.contains('.') {
                k.to_string()
            } else {
                format!("{section}.{k}")
            };
            cfg.set(&key, v.trim())?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text)?;
        if let SignalSource::File(p) = &cfg.signal.source {
            if p.is_relative() {
                if let Some(dir) = path.parent() {
                    cfg.signal.source = SignalSource::File(dir.join(p));
                }
            }
        }
        Ok(cfg)
    }

    /// Sets one dotted key.
    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        let s = &mut self.signal;
        let d = &mut self.dictionary;
        let o = &mut self.solver;
        let l = &mut self.selection;
        let p = &mut self.spectral;
        match key {
            "seed" => self.seed = num(key, v)?,
            "output" => self.output = PathBuf::from(v),
            "signal.source" => {
                s.source = match v {
                    "synthetic" => SignalSource::Synthetic,
                    path => SignalSource::File(PathBuf::from(
                        path.strip_prefix("file:").unwrap_or(path),
                    )),
                }
            }
            "signal.duration" => s.duration = num(key, v)?,
            "signal.fs" => s.fs = num(key, v)?,
            "signal.decimation" => s.decimation = num(key, v)?,
            "signal.channels" => s.channels = num(key, v)?,
            "signal.foci" => s.foci = list(key, v)?,
            "signal.offsets" => {
                s.offsets = if v == "auto" {
                    None
                } else {
                    Some(list(key, v)?)
                }
            }
            "signal.amplitude" => s.amplitude = num(key, v)?,
            "signal.dropout" => s.dropout = num(key, v)?,
            "signal.kernel_order" => s.kernel_order = num(key, v)?,
            "signal.kernel_sigma" => s.kernel_sigma = num(key, v)?,
            "signal.kernel_gain" => s.kernel_gain = num(key, v)?,
            "signal.max_delay" => s.max_delay = num(key, v)?,
            "signal.noise_sigma" => s.noise_sigma = num(key, v)?,
            "signal.difference" => s.difference = flag(key, v)?,
            "dictionary.orders" => d.orders = list(key, v)?,
            "dictionary.sigmas" => {
                d.sigmas = if v == "auto" {
                    None
                } else {
                    Some(list(key, v)?)
                }
            }
            "dictionary.truncation" => d.truncation = num(key, v)?,
            "dictionary.boundary" => d.boundary = v.parse().map_err(|e| cfg_err(key, e))?,
            "solver.kind" => o.kind = v.parse()?,
            "solver.lambda" => o.lambda = opt(key, v)?,
            "solver.max_iter" => o.max_iter = num(key, v)?,
            "solver.tol" => o.tol = num(key, v)?,
            "solver.formulation" => o.formulation = v.parse()?,
            "solver.xi" => o.xi = opt(key, v)?,
            "solver.rho" => o.rho = opt(key, v)?,
            "solver.sca_max_outer" => o.sca_max_outer = num(key, v)?,
            "solver.inner_tol" => o.inner_tol = num(key, v)?,
            "solver.inner_max_iter" => o.inner_max_iter = num(key, v)?,
            "solver.chunk" => o.chunk = num(key, v)?,
            "selection.sigma" => l.sigma = opt(key, v)?,
            "selection.eta" => l.eta = opt(key, v)?,
            "selection.nmin" => l.nmin = opt(key, v)?,
            "selection.pmin" => l.pmin = opt(key, v)?,
            "spectral.band" => p.band = v.parse().map_err(|e| cfg_err(key, e))?,
            "spectral.gamma" => p.gamma = num(key, v)?,
            "spectral.window" => p.window = num(key, v)?,
            "spectral.notch_bw" => p.notch_bw = num(key, v)?,
            "spectral.max_peaks" => p.max_peaks = num(key, v)?,
            "spectral.weighted" => p.weighted = flag(key, v)?,
            "spectral.prefilter" => p.prefilter = flag(key, v)?,
            "spectral.dfa" => p.dfa = flag(key, v)?,
            other => return Err(Error::Config(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    /// Every key with its current value, in the format accepted by [`parse`](Self::parse).
    pub fn to_text(&self) -> String {
        let s = &self.signal;
        let d = &self.dictionary;
        let o = &self.solver;
        let l = &self.selection;
        let p = &self.spectral;
        let mut t = String::new();
        writeln!(t, "seed = {}", self.seed).unwrap();
        writeln!(t, "output = {}", self.output.display()).unwrap();
        writeln!(t, "\n[signal]").unwrap();
        let source = match &s.source {
            SignalSource::Synthetic => "synthetic".to_string(),
            SignalSource::File(f) => format!("file:{}", f.display()),
        };
        writeln!(t, "source = {source}").unwrap();
        writeln!(t, "duration = {}", s.duration).unwrap();
        writeln!(t, "fs = {}", s.fs).unwrap();
        writeln!(t, "decimation = {}", s.decimation).unwrap();
        writeln!(t, "channels = {}", s.channels).unwrap();
        writeln!(t, "foci = {}", show_list(&s.foci)).unwrap();
        writeln!(
            t,
            "offsets = {}",
            s.offsets.as_deref().map_or("auto".into(), show_list)
        )
        .unwrap();
        writeln!(t, "amplitude = {}", s.amplitude).unwrap();
        writeln!(t, "dropout = {}", s.dropout).unwrap();
        writeln!(t, "kernel_order = {}", s.kernel_order).unwrap();
        writeln!(t, "kernel_sigma = {}", s.kernel_sigma).unwrap();
        writeln!(t, "kernel_gain = {}", s.kernel_gain).unwrap();
        writeln!(t, "max_delay = {}", s.max_delay).unwrap();
        writeln!(t, "noise_sigma = {}", s.noise_sigma).unwrap();
        writeln!(t, "difference = {}", s.difference).unwrap();
        writeln!(t, "\n[dictionary]").unwrap();
        writeln!(t, "orders = {}", show_list(&d.orders)).unwrap();
        writeln!(
            t,
            "sigmas = {}",
            d.sigmas.as_deref().map_or("auto".into(), show_list)
        )
        .unwrap();
        writeln!(t, "truncation = {}", d.truncation).unwrap();
        writeln!(t, "boundary = {}", d.boundary).unwrap();
        writeln!(t, "\n[solver]").unwrap();
        writeln!(t, "kind = {}", o.kind).unwrap();
        writeln!(t, "lambda = {}", show_opt(&o.lambda)).unwrap();
        writeln!(t, "max_iter = {}", o.max_iter).unwrap();
        writeln!(t, "tol = {}", o.tol).unwrap();
        writeln!(t, "formulation = {}", o.formulation).unwrap();
        writeln!(t, "xi = {}", show_opt(&o.xi)).unwrap();
        writeln!(t, "rho = {}", show_opt(&o.rho)).unwrap();
        writeln!(t, "sca_max_outer = {}", o.sca_max_outer).unwrap();
        writeln!(t, "inner_tol = {}", o.inner_tol).unwrap();
        writeln!(t, "inner_max_iter = {}", o.inner_max_iter).unwrap();
        writeln!(t, "chunk = {}", o.chunk).unwrap();
        writeln!(t, "\n[selection]").unwrap();
        writeln!(t, "sigma = {}", show_opt(&l.sigma)).unwrap();
        writeln!(t, "eta = {}", show_opt(&l.eta)).unwrap();
        writeln!(t, "nmin = {}", show_opt(&l.nmin)).unwrap();
        writeln!(t, "pmin = {}", show_opt(&l.pmin)).unwrap();
        writeln!(t, "\n[spectral]").unwrap();
        writeln!(t, "band = {}", p.band).unwrap();
        writeln!(t, "gamma = {}", p.gamma).unwrap();
        writeln!(t, "window = {}", p.window).unwrap();
        writeln!(t, "notch_bw = {}", p.notch_bw).unwrap();
        writeln!(t, "max_peaks = {}", p.max_peaks).unwrap();
        writeln!(t, "weighted = {}", p.weighted).unwrap();
        writeln!(t, "prefilter = {}", p.prefilter).unwrap();
        writeln!(t, "dfa = {}", p.dfa).unwrap();
        t
    }

    /// Range checks that need no signal; run before any computation.
    pub fn validate(&self) -> Result<()> {
        let s = &self.signal;
        let bad = |k: &str, r: &str| Err(cfg_err(k, r));
        match &s.source {
            SignalSource::Synthetic => {
                if !(s.duration > 0.0) {
                    return bad("signal.duration", "must be positive");
                }
                if !(s.fs > 0.0) {
                    return bad("signal.fs", "must be positive");
                }
                if s.channels == 0 {
                    return bad("signal.channels", "must be at least 1");
                }
                if s.foci.is_empty() || s.foci.iter().any(|f| !(*f > 0.0)) {
                    return bad("signal.foci", "need at least one positive frequency");
                }
                if let Some(o) = &s.offsets {
                    if o.len() != s.foci.len() {
                        return bad("signal.offsets", "need one offset per focus");
                    }
                }
                if !(0.0..=1.0).contains(&s.dropout) {
                    return bad("signal.dropout", "must lie in [0, 1]");
                }
                if !(s.kernel_sigma > 0.0) || !(s.max_delay >= 0.0) || !(s.noise_sigma >= 0.0) {
                    return bad(
                        "signal",
                        "kernel_sigma > 0, max_delay >= 0 and noise_sigma >= 0 required",
                    );
                }
            }
            SignalSource::File(path) => {
                if !path.is_file() {
                    return Err(cfg_err(
                        "signal.source",
                        format!("{} does not exist", path.display()),
                    ));
                }
                let meta = crate::io::sidecar_path(path);
                if !meta.is_file() {
                    return Err(cfg_err(
                        "signal.source",
                        format!("sidecar {} does not exist", meta.display()),
                    ));
                }
            }
        }
        if !(1..=4).contains(&s.decimation) {
            return bad("signal.decimation", "must be between 1 and 4");
        }
        let d = &self.dictionary;
        if d.orders.is_empty() {
            return bad("dictionary.orders", "need at least one order");
        }
        if !(d.truncation > 0.0) {
            return bad("dictionary.truncation", "must be positive");
        }
        let o = &self.solver;
        if o.lambda.is_some_and(|l| !(l > 0.0)) {
            return bad("solver.lambda", "must be positive");
        }
        if o.rho.is_some_and(|r| !(r >= 0.0)) {
            return bad("solver.rho", "must be non-negative");
        }
        if o.xi.is_some_and(|x| !(x >= 0.0)) {
            return bad("solver.xi", "must be non-negative");
        }
        if o.max_iter == 0 || o.sca_max_outer == 0 || o.inner_max_iter == 0 {
            return bad("solver", "iteration limits must be at least 1");
        }
        if !(o.tol > 0.0) || !(o.inner_tol > 0.0) {
            return bad("solver", "tolerances must be positive");
        }
        if !(o.chunk > 0.0) {
            return bad("solver.chunk", "must be positive");
        }
        let l = &self.selection;
        if l.sigma.is_some_and(|v| !(v > 0.0)) || l.eta.is_some_and(|v| !(v > 0.0)) {
            return bad("selection", "sigma and eta must be positive");
        }
        if l.nmin == Some(0) {
            return bad("selection.nmin", "must be at least 1");
        }
        let p = &self.spectral;
        if !(p.gamma > 0.0 && p.gamma < 1.0) {
            return bad("spectral.gamma", "must lie in (0, 1)");
        }
        if !(p.window > 0.0) || !(p.notch_bw > 0.0) || p.max_peaks == 0 {
            return bad(
                "spectral",
                "window, notch_bw and max_peaks must be positive",
            );
        }
        let rate = s.fs / s.decimation as f64;
        if let SignalSource::Synthetic = s.source {
            p.band
                .validate(rate)
                .map_err(|e| cfg_err("spectral.band", e))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_text() {
        let cfg = PipelineConfig::default();
        assert_eq!(PipelineConfig::parse(&cfg.to_text()).unwrap(), cfg);
        cfg.validate().unwrap();
    }

    #[test]
    fn sections_and_dotted_keys() {
        let cfg = PipelineConfig::parse(
            "seed = 9\n# comment\n[solver]\nkind = cplasso\nlambda = 1e-5\n\nspectral.band = custom:1,12\n[selection]\nnmin = 20\n",
        )
        .unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.solver.kind, SolverKind::Cplasso);
        assert_eq!(cfg.solver.lambda, Some(1e-5));
        assert_eq!(cfg.spectral.band, Band::Custom(1.0, 12.0));
        assert_eq!(cfg.selection.nmin, Some(20));
        let mut edited = cfg.clone();
        edited.set("solver.lambda", "auto").unwrap();
        assert_eq!(edited.solver.lambda, None);
        assert_eq!(PipelineConfig::parse(&cfg.to_text()).unwrap(), cfg);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(
            PipelineConfig::parse("nonsense"),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            PipelineConfig::parse("solver.speed = 3"),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            PipelineConfig::parse("[solver]\nlambda = x"),
            Err(Error::Config(_))
        ));
        let mut cfg = PipelineConfig::default();
        cfg.spectral.gamma = 1.5;
        assert!(cfg.validate().is_err());
        cfg = PipelineConfig::default();
        cfg.signal.source = SignalSource::File(PathBuf::from("/definitely/missing.csv"));
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
    }
}
