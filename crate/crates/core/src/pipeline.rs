//! Configured end-to-end runs: synthesis or loading, pre-processing, sparse
//! inference, refractory selection and spectral analysis.

use std::path::Path;
use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coefficients::CoefficientVector;
use crate::config::{FormulationKind, PipelineConfig, SignalSource, SolverKind};
use crate::cp_lasso::{
    build_gamma, exact_cost, solve_sca, CpLassoProblem, Formulation, InnerOptions, ScaOptions,
};
use crate::dictionary::{DictionaryOperator, DictionarySpec, HermiteWavelet, WaveletAtom};
use crate::error::{Error, Result};
use crate::io::{self, CoefficientFile};
use crate::lasso::{solve_lasso, LassoProblem};
use crate::refractory::{
    channel_validity, default_pmin, greedy_select, nmin_for, ActivationSequence, SelectionParams,
};
use crate::rng::stream_rng;
use crate::signal_model::{
    decimate, difference, generate_spike_trains, synthesize_egm, Band, ChannelBank, EgmRecord,
    FociSpec,
};
use crate::spectral::{
    amplitude_spectrum, analyze_sequence, dfa_channel, ssa::sequence_signal, DfaOptions, DfaResult,
    SegmentAnalysis, SsaParams,
};

pub const VERSION: &str = concat!("sparse-egm ", env!("CARGO_PKG_VERSION"));

fn stage<T>(name: &'static str, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        e @ Error::Stage { .. } => e,
        e => Error::Stage {
            stage: name,
            source: Box::new(e),
        },
    })
}

/// Signal ready for inference.
#[derive(Debug, Clone)]
pub struct PreparedSignal {
    /// Record at the inference rate.
    pub record: EgmRecord,
    /// Inference targets, one per channel.
    pub targets: Vec<Vec<f64>>,
    pub truth: Option<FociSpec>,
}

/// Peak-normalized Hermite kernel sampled at `fs`.
pub fn synthetic_kernel(order: usize, sigma: f64, gain: f64, fs: f64) -> Result<Vec<f64>> {
    let w = HermiteWavelet::new(order, sigma)?;
    let half = (5.0 * sigma * fs).ceil() as i64;
    let k: Vec<f64> = (-half..=half).map(|i| w.eval(i as f64 / fs)).collect();
    let peak = k.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    Ok(k.into_iter().map(|v| gain * v / peak).collect())
}

/// Synthetic record at the acquisition rate and its ground truth.
pub fn synthesize(cfg: &PipelineConfig) -> Result<(EgmRecord, FociSpec)> {
    let s = &cfg.signal;
    let any = Band::Custom(0.0, f64::INFINITY);
    let mut foci = match &s.offsets {
        Some(o) => FociSpec::new(s.foci.clone(), o.clone(), any)?,
        None => FociSpec::with_random_offsets(s.foci.clone(), any, cfg.seed)?,
    };
    foci.amplitude = crate::signal_model::AmplitudeSchedule::Constant(s.amplitude);
    foci.dropout = s.dropout;
    let trains = generate_spike_trains(&foci, s.duration, s.fs, cfg.seed)?;
    let kernel = synthetic_kernel(s.kernel_order, s.kernel_sigma, s.kernel_gain, s.fs)?;
    let mut rng = stream_rng(cfg.seed, 0xde1a);
    let max_delay = (s.max_delay * s.fs).floor() as usize;
    let delays = (0..foci.count())
        .map(|_| {
            (0..s.channels)
                .map(|_| rng.random_range(0..=max_delay))
                .collect()
        })
        .collect();
    let bank = ChannelBank::new(vec![vec![kernel; s.channels]; foci.count()], delays)?;
    let record = synthesize_egm(
        &trains,
        &bank,
        &vec![s.noise_sigma; s.channels],
        s.fs,
        cfg.seed,
    )?;
    Ok((record, foci))
}

/// Loads or synthesizes the signal, decimates to the configured factor and
/// optionally differences it.
pub fn prepare_signal(cfg: &PipelineConfig) -> Result<PreparedSignal> {
    let (raw, truth) = match &cfg.signal.source {
        SignalSource::Synthetic => {
            let (r, f) = synthesize(cfg)?;
            (r, Some(f))
        }
        SignalSource::File(path) => {
            let (r, meta) = io::read_signal(path)?;
            (r, meta.foci)
        }
    };
    let target = cfg.signal.decimation;
    let record = if raw.decimation == target {
        raw
    } else if target.is_multiple_of(raw.decimation) {
        decimate(&raw, target / raw.decimation)?
    } else {
        return Err(Error::Config(format!(
            "signal is decimated by {}, which does not divide the requested factor {target}",
            raw.decimation
        )));
    };
    let targets = if cfg.signal.difference {
        record.channels.iter().map(|y| difference(y)).collect()
    } else {
        record.channels.clone()
    };
    Ok(PreparedSignal {
        record,
        targets,
        truth,
    })
}

/// Geometric width grid starting at the first millisecond with `σ rate >= 4`.
pub fn default_sigmas(rate: f64) -> Vec<f64> {
    let first = (4000.0 / rate).ceil() / 1000.0;
    vec![first, first * 1.5, first * 2.25]
}

/// Parameters after derived defaults are filled in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectiveParams {
    pub rate: f64,
    pub samples: usize,
    pub lambda: f64,
    pub sigma: f64,
    pub eta: f64,
    pub nmin: usize,
    pub pmin: usize,
    pub xi: f64,
    pub rho: f64,
    pub sigmas: Vec<f64>,
}

impl EffectiveParams {
    pub fn resolve(cfg: &PipelineConfig, record: &EgmRecord, samples: usize) -> Self {
        Self::for_rate(cfg, record.fs, record.decimation, samples)
    }

    /// Same as [`resolve`](Self::resolve) from the acquisition rate alone.
    pub fn for_rate(cfg: &PipelineConfig, fs: f64, decimation: usize, samples: usize) -> Self {
        let rate = fs / decimation as f64;
        let sinus = cfg.spectral.band == Band::Sinus;
        let lambda = cfg.solver.lambda.unwrap_or(if sinus { 1e-4 } else { 1e-6 });
        let sigma = cfg
            .selection
            .sigma
            .unwrap_or(if sinus { 2e-3 } else { 5e-4 });
        EffectiveParams {
            rate,
            samples,
            lambda,
            sigma,
            eta: cfg.selection.eta.unwrap_or(3.0 * sigma),
            nmin: cfg
                .selection
                .nmin
                .unwrap_or_else(|| nmin_for(fs, decimation)),
            pmin: cfg
                .selection
                .pmin
                .unwrap_or_else(|| default_pmin(samples, rate, cfg.spectral.band.max_period())),
            xi: cfg.solver.xi.unwrap_or(sigma * (samples as f64).sqrt()),
            rho: cfg.solver.rho.unwrap_or(1e3 * lambda),
            sigmas: cfg
                .dictionary
                .sigmas
                .clone()
                .unwrap_or_else(|| default_sigmas(rate)),
        }
    }

    pub fn selection(&self) -> Result<SelectionParams> {
        SelectionParams::new(self.eta, self.nmin.max(1))
    }
}

pub fn dictionary_atoms(cfg: &PipelineConfig, eff: &EffectiveParams) -> Result<Vec<WaveletAtom>> {
    let mut sigmas = eff.sigmas.clone();
    sigmas.sort_by(f64::total_cmp);
    DictionarySpec::grid(
        &cfg.dictionary.orders,
        &sigmas,
        eff.rate,
        cfg.dictionary.truncation,
    )?
    .build()
}

/// Adds the group norms of `file` into a signal-time buffer.
pub fn accumulate_norms(file: &CoefficientFile, g: &mut [f64]) {
    for p in 0..file.beta.positions() {
        let t = file.activation_time(p);
        if (0..g.len() as i64).contains(&t) {
            g[t as usize] += file.beta.block(p).iter().map(|v| v.abs()).sum::<f64>();
        }
    }
}

/// Greedy selection over the signal-time group norms of one or more fits.
pub fn select_activations(
    files: &[CoefficientFile],
    samples: usize,
    params: &SelectionParams,
) -> ActivationSequence {
    let mut g = vec![0.0; samples];
    for f in files {
        accumulate_norms(f, &mut g);
    }
    greedy_select(&g, params)
}

/// Window of a cross-products fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowSummary {
    pub start: usize,
    pub len: usize,
    pub outer_iterations: usize,
    pub inner_iterations: Vec<usize>,
    pub converged: bool,
    pub stalled: bool,
    pub cost_trace: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverSummary {
    pub kind: SolverKind,
    pub iterations: usize,
    pub converged: bool,
    /// Final value of the minimized objective, summed over windows.
    pub objective: f64,
    /// `(1/2N)‖z - Φβ‖² + λ‖β‖₁ + ρ·pairs`, summed over windows.
    pub exact_cost: f64,
    pub kkt_residual: Option<f64>,
    pub nonzeros: usize,
    pub windows: Vec<WindowSummary>,
}

/// Output of the inference stage for one channel.
#[derive(Debug, Clone)]
pub struct Inference {
    pub files: Vec<CoefficientFile>,
    pub summary: SolverSummary,
}

/// Sample ranges of the cross-products windows; a short tail joins the last window.
pub fn chunk_ranges(n: usize, chunk: usize) -> Vec<(usize, usize)> {
    let chunk = chunk.max(1);
    let mut out = Vec::new();
    let mut start = 0;
    while start < n {
        let mut end = (start + chunk).min(n);
        if n - end < chunk / 2 {
            end = n;
        }
        out.push((start, end - start));
        start = end;
    }
    out
}

pub fn fit_lasso(
    atoms: &[WaveletAtom],
    target: &[f64],
    start: usize,
    cfg: &PipelineConfig,
    eff: &EffectiveParams,
) -> Result<Inference> {
    fit_lasso_from(atoms, target, start, cfg, eff, None)
}

/// [`fit_lasso`] started from `warm` instead of zero.
pub fn fit_lasso_from(
    atoms: &[WaveletAtom],
    target: &[f64],
    start: usize,
    cfg: &PipelineConfig,
    eff: &EffectiveParams,
    warm: Option<&[f64]>,
) -> Result<Inference> {
    let op = DictionaryOperator::from_atoms(atoms, target.len(), cfg.dictionary.boundary)?;
    let p = LassoProblem::new(&op, target, eff.lambda)?
        .with_max_iter(cfg.solver.max_iter)
        .with_tol(cfg.solver.tol);
    let (beta, rep) = solve_lasso(&p, warm)?;
    let gamma = build_gamma(op.n_atoms(), op.n_positions(), eff.nmin, eff.rho)?;
    let exact = exact_cost(beta.as_slice(), &op, target, eff.lambda, &gamma)?;
    let summary = SolverSummary {
        kind: SolverKind::Lasso,
        iterations: rep.iterations,
        converged: rep.converged,
        objective: rep.objective_trace.last().copied().unwrap_or(f64::NAN),
        exact_cost: exact,
        kkt_residual: Some(rep.kkt_residual),
        nonzeros: beta.nonzeros(),
        windows: Vec::new(),
    };
    Ok(Inference {
        files: vec![CoefficientFile::from_operator(beta, &op, start)],
        summary,
    })
}

pub fn fit_cplasso(
    atoms: &[WaveletAtom],
    target: &[f64],
    cfg: &PipelineConfig,
    eff: &EffectiveParams,
) -> Result<Inference> {
    let chunk = (cfg.solver.chunk * eff.rate).round() as usize;
    let opts = ScaOptions {
        max_outer: cfg.solver.sca_max_outer,
        tol: 1e-6,
        inner: InnerOptions {
            max_iter: cfg.solver.inner_max_iter,
            rel_tol: cfg.solver.inner_tol,
            ..InnerOptions::default()
        },
        ..ScaOptions::default()
    };
    let mut files = Vec::new();
    let mut summary = SolverSummary {
        kind: SolverKind::Cplasso,
        iterations: 0,
        converged: true,
        objective: 0.0,
        exact_cost: 0.0,
        kkt_residual: None,
        nonzeros: 0,
        windows: Vec::new(),
    };
    for (start, len) in chunk_ranges(target.len(), chunk) {
        let z = &target[start..start + len];
        let op = DictionaryOperator::from_atoms(atoms, len, cfg.dictionary.boundary)?;
        let (formulation, weight) = match cfg.solver.formulation {
            FormulationKind::Constrained => (
                Formulation::Constrained {
                    xi: eff.xi * (len as f64 / target.len() as f64).sqrt(),
                },
                eff.rho / eff.lambda,
            ),
            FormulationKind::Penalized => (Formulation::Penalized { lambda: eff.lambda }, eff.rho),
        };
        let gamma = build_gamma(op.n_atoms(), op.n_positions(), eff.nmin, weight)?;
        let problem = CpLassoProblem::new(&op, z, formulation, gamma)?;
        let (beta, rep) = solve_sca(&problem, &opts)?;
        let exact = exact_cost(
            beta.as_slice(),
            &op,
            z,
            eff.lambda,
            &gamma.with_weight(eff.rho)?,
        )?;
        summary.iterations += rep.inner_iterations.iter().sum::<usize>();
        summary.converged &= rep.converged;
        summary.objective += rep.cost_trace.last().copied().unwrap_or(f64::NAN);
        summary.exact_cost += exact;
        summary.nonzeros += beta.nonzeros();
        summary.windows.push(WindowSummary {
            start,
            len,
            outer_iterations: rep.outer_iterations,
            inner_iterations: rep.inner_iterations,
            converged: rep.converged,
            stalled: rep.stalled,
            cost_trace: rep.cost_trace,
        });
        files.push(CoefficientFile::from_operator(beta, &op, start));
    }
    Ok(Inference { files, summary })
}

pub fn fit_channel(
    atoms: &[WaveletAtom],
    target: &[f64],
    cfg: &PipelineConfig,
    eff: &EffectiveParams,
) -> Result<Inference> {
    match cfg.solver.kind {
        SolverKind::Lasso => fit_lasso(atoms, target, 0, cfg, eff),
        SolverKind::Cplasso => fit_cplasso(atoms, target, cfg, eff),
    }
}

pub fn ssa_params(cfg: &PipelineConfig) -> SsaParams {
    let p = &cfg.spectral;
    SsaParams {
        gamma: p.gamma,
        band: p.band,
        notch_bandwidth: p.notch_bw,
        max_peaks: p.max_peaks,
        window: p.window,
        weighted: p.weighted,
        prefilter: p.prefilter,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelReport {
    pub channel: usize,
    pub valid: bool,
    pub activation_count: usize,
    /// Activation sample indices at the inference rate.
    pub spike_times: Vec<usize>,
    pub solver: SolverSummary,
    pub dfa: Option<DfaResult>,
    pub segments: Vec<SegmentAnalysis>,
    /// Most frequent per-segment count (smallest on ties).
    pub foci_count: usize,
    /// Frequencies of the first segment reporting `foci_count` foci.
    pub frequencies: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportDocument {
    pub version: String,
    pub config: PipelineConfig,
    pub effective: EffectiveParams,
    pub truth: Option<FociSpec>,
    pub channels: Vec<ChannelReport>,
}

impl ReportDocument {
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }
}

struct ChannelOutput {
    report: ChannelReport,
    inference: Inference,
    sequence: ActivationSequence,
}

/// Most frequent per-segment count (smallest on ties) and the frequencies of
/// the first segment reporting it.
pub fn consensus(segments: &[SegmentAnalysis]) -> (usize, Vec<f64>) {
    let counts: Vec<usize> = segments.iter().map(|s| s.estimate.count).collect();
    let best = counts.iter().copied().max_by_key(|&c| {
        (
            counts.iter().filter(|&&x| x == c).count(),
            std::cmp::Reverse(c),
        )
    });
    match best {
        Some(c) => {
            let seg = segments.iter().find(|s| s.estimate.count == c).unwrap();
            (c, seg.estimate.frequencies.clone())
        }
        None => (0, Vec::new()),
    }
}

fn run_channel(
    q: usize,
    prepared: &PreparedSignal,
    atoms: &[WaveletAtom],
    cfg: &PipelineConfig,
    eff: &EffectiveParams,
) -> Result<ChannelOutput> {
    let target = &prepared.targets[q];
    let inference = stage("fit", fit_channel(atoms, target, cfg, eff))?;
    let params = stage("select", eff.selection())?;
    let sequence = select_activations(&inference.files, target.len(), &params);
    let valid = channel_validity(&sequence, eff.pmin);
    let mut notes = Vec::new();
    let segments = if valid {
        match analyze_sequence(&sequence, eff.rate, &ssa_params(cfg)) {
            Ok(s) => s,
            Err(e @ Error::TooShort { .. }) => {
                notes.push(format!("spectrum skipped: {e}"));
                Vec::new()
            }
            Err(e) => {
                return Err(Error::Stage {
                    stage: "spectrum",
                    source: Box::new(e),
                })
            }
        }
    } else {
        notes.push(format!(
            "channel rejected: {} activations, at least {} required",
            sequence.count(),
            eff.pmin.max(1)
        ));
        Vec::new()
    };
    let dfa = if cfg.spectral.dfa {
        match dfa_channel(
            &prepared.record.channels[q],
            eff.rate,
            &DfaOptions {
                window: cfg.spectral.window,
                ..DfaOptions::default()
            },
        ) {
            Ok(r) => Some(r),
            Err(e) => {
                notes.push(format!("dominant frequency skipped: {e}"));
                None
            }
        }
    } else {
        None
    };
    let (foci_count, frequencies) = consensus(&segments);
    Ok(ChannelOutput {
        report: ChannelReport {
            channel: q,
            valid,
            activation_count: sequence.count(),
            spike_times: sequence.indices.clone(),
            solver: inference.summary.clone(),
            dfa,
            segments,
            foci_count,
            frequencies,
            notes,
        },
        inference,
        sequence,
    })
}

fn thread_pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Numerical(format!("cannot start worker threads: {e}")))
}

fn write_channel_artifacts(
    dir: &Path,
    out: &ChannelOutput,
    cfg: &PipelineConfig,
    eff: &EffectiveParams,
) -> Result<()> {
    let q = out.report.channel;
    match out.inference.files.as_slice() {
        [single] => io::write_coefficients(&dir.join(format!("ch{q}_coefficients.csv")), single)?,
        many => {
            for (w, f) in many.iter().enumerate() {
                io::write_coefficients(&dir.join(format!("ch{q}_w{w}_coefficients.csv")), f)?;
            }
        }
    }
    for (w, win) in out.report.solver.windows.iter().enumerate() {
        io::write_trace(&dir.join(format!("ch{q}_w{w}_cost.csv")), &win.cost_trace)?;
    }
    io::write_activations(
        &dir.join(format!("ch{q}_activations.csv")),
        &out.sequence,
        eff.rate,
    )?;
    if out.report.valid {
        write_segment_spectra(
            dir,
            &format!("ch{q}_"),
            &out.sequence,
            &out.report.segments,
            cfg,
            eff.rate,
        )?;
    }
    Ok(())
}

/// Writes `<prefix>seg<i>_spectrum.csv` for every analysed segment, up to
/// twice the top of the band.
pub fn write_segment_spectra(
    dir: &Path,
    prefix: &str,
    sequence: &ActivationSequence,
    segments: &[SegmentAnalysis],
    cfg: &PipelineConfig,
    rate: f64,
) -> Result<()> {
    let x = sequence_signal(sequence, cfg.spectral.weighted);
    for seg in segments {
        let s = &seg.segment;
        let spec = amplitude_spectrum(&x[s.start..s.start + s.len], rate)?;
        io::write_spectrum(
            &dir.join(format!("{prefix}seg{}_spectrum.csv", s.index)),
            &spec,
            2.0 * cfg.spectral.band.range().1,
        )?;
    }
    Ok(())
}

/// Runs every stage and writes the artifacts and `report.json` into the
/// configured output directory. Channels run on up to `jobs` threads; the
/// report does not depend on `jobs`.
pub fn run_pipeline(cfg: &PipelineConfig, jobs: usize) -> Result<ReportDocument> {
    stage("config", cfg.validate())?;
    let dir = cfg.output.clone();
    stage("output", std::fs::create_dir_all(&dir).map_err(Error::from))?;
    stage(
        "output",
        std::fs::write(dir.join("config.txt"), cfg.to_text()).map_err(Error::from),
    )?;
    let prepared = stage("signal", prepare_signal(cfg))?;
    if cfg.signal.source == SignalSource::Synthetic {
        stage(
            "signal",
            io::write_signal(
                &dir.join("signal.csv"),
                &prepared.record,
                prepared.truth.as_ref(),
            ),
        )?;
    }
    let samples = prepared.targets.first().map_or(0, Vec::len);
    let eff = EffectiveParams::resolve(cfg, &prepared.record, samples);
    stage("spectrum", ssa_params(cfg).validate(eff.rate))?;
    let atoms = stage("dictionary", dictionary_atoms(cfg, &eff))?;
    let pool = thread_pool(jobs.max(1))?;
    let outputs: Vec<Result<ChannelOutput>> = pool.install(|| {
        (0..prepared.targets.len())
            .into_par_iter()
            .map(|q| run_channel(q, &prepared, &atoms, cfg, &eff))
            .collect()
    });
    let mut channels = Vec::with_capacity(outputs.len());
    for out in outputs {
        let out = out?;
        stage("output", write_channel_artifacts(&dir, &out, cfg, &eff))?;
        channels.push(out.report);
    }
    let report = ReportDocument {
        version: VERSION.to_string(),
        config: cfg.clone(),
        effective: eff,
        truth: prepared.truth,
        channels,
    };
    stage(
        "output",
        std::fs::write(dir.join("report.json"), report.to_json()?).map_err(Error::from),
    )?;
    Ok(report)
}

/// One channel of a solver comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub channel: usize,
    pub lasso_spikes: Vec<usize>,
    pub cplasso_spikes: Vec<usize>,
    /// Spikes found only by the LASSO path.
    pub only_lasso: Vec<usize>,
    pub only_cplasso: Vec<usize>,
    pub lasso_exact_cost: f64,
    pub cplasso_exact_cost: f64,
    pub lasso_seconds: f64,
    pub cplasso_seconds: f64,
    pub error: Option<String>,
}

impl ComparisonRow {
    pub fn identical(&self) -> bool {
        self.error.is_none() && self.only_lasso.is_empty() && self.only_cplasso.is_empty()
    }
}

fn masked(beta: &CoefficientVector, keep: &[usize]) -> CoefficientVector {
    let mut out = CoefficientVector::zeros(beta.atoms(), beta.positions());
    for &p in keep {
        for m in 0..beta.atoms() {
            out.set(m, p, beta.get(m, p));
        }
    }
    out
}

/// LASSO with greedy selection versus cross-products LASSO on the same windows.
fn compare_channel(
    q: usize,
    target: &[f64],
    atoms: &[WaveletAtom],
    cfg: &PipelineConfig,
    eff: &EffectiveParams,
) -> Result<ComparisonRow> {
    let params = eff.selection()?;
    let chunk = (cfg.solver.chunk * eff.rate).round() as usize;
    let t0 = Instant::now();
    let mut lasso_files = Vec::new();
    let mut lasso_cost = 0.0;
    for (start, len) in chunk_ranges(target.len(), chunk) {
        let z = &target[start..start + len];
        let inf = fit_lasso(atoms, z, start, cfg, eff)?;
        let file = inf
            .files
            .into_iter()
            .next()
            .expect("one window per lasso fit");
        // the LASSO path's estimate keeps only the selected positions
        let g: Vec<f64> = (0..file.beta.positions())
            .map(|p| file.beta.block(p).iter().map(|v| v.abs()).sum())
            .collect();
        let keep = greedy_select(&g, &params).indices;
        let beta = masked(&file.beta, &keep);
        let op = DictionaryOperator::from_atoms(atoms, len, cfg.dictionary.boundary)?;
        let gamma = build_gamma(op.n_atoms(), op.n_positions(), eff.nmin, eff.rho)?;
        lasso_cost += exact_cost(beta.as_slice(), &op, z, eff.lambda, &gamma)?;
        lasso_files.push(CoefficientFile { beta, ..file });
    }
    let lasso_spikes = select_activations(&lasso_files, target.len(), &params).indices;
    let lasso_seconds = t0.elapsed().as_secs_f64();
    let t1 = Instant::now();
    let cp = fit_cplasso(atoms, target, cfg, eff)?;
    let cplasso_spikes = select_activations(&cp.files, target.len(), &params).indices;
    let cplasso_seconds = t1.elapsed().as_secs_f64();
    let only = |a: &[usize], b: &[usize]| {
        a.iter()
            .copied()
            .filter(|x| b.binary_search(x).is_err())
            .collect()
    };
    Ok(ComparisonRow {
        channel: q,
        only_lasso: only(&lasso_spikes, &cplasso_spikes),
        only_cplasso: only(&cplasso_spikes, &lasso_spikes),
        lasso_spikes,
        cplasso_spikes,
        lasso_exact_cost: lasso_cost,
        cplasso_exact_cost: cp.summary.exact_cost,
        lasso_seconds,
        cplasso_seconds,
        error: None,
    })
}

/// Runs both inference paths on every channel; a failing channel yields a
/// row with its error instead of aborting the table.
pub fn compare_solvers(cfg: &PipelineConfig, jobs: usize) -> Result<Vec<ComparisonRow>> {
    stage("config", cfg.validate())?;
    let prepared = stage("signal", prepare_signal(cfg))?;
    let samples = prepared.targets.first().map_or(0, Vec::len);
    let eff = EffectiveParams::resolve(cfg, &prepared.record, samples);
    let atoms = stage("dictionary", dictionary_atoms(cfg, &eff))?;
    let pool = thread_pool(jobs.max(1))?;
    Ok(pool.install(|| {
        prepared
            .targets
            .par_iter()
            .enumerate()
            .map(|(q, z)| {
                compare_channel(q, z, &atoms, cfg, &eff).unwrap_or_else(|e| ComparisonRow {
                    channel: q,
                    lasso_spikes: Vec::new(),
                    cplasso_spikes: Vec::new(),
                    only_lasso: Vec::new(),
                    only_cplasso: Vec::new(),
                    lasso_exact_cost: f64::NAN,
                    cplasso_exact_cost: f64::NAN,
                    lasso_seconds: 0.0,
                    cplasso_seconds: 0.0,
                    error: Some(e.to_string()),
                })
            })
            .collect()
    }))
}

/// Tab-separated rendering of a comparison.
pub fn comparison_table(rows: &[ComparisonRow]) -> String {
    let mut s = String::from(
        "channel\tlasso_spikes\tcplasso_spikes\tonly_lasso\tonly_cplasso\tlasso_j_exact\tcplasso_j_exact\tlasso_s\tcplasso_s\terror\n",
    );
    for r in rows {
        s.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{:.6e}\t{:.6e}\t{:.3}\t{:.3}\t{}\n",
            r.channel,
            r.lasso_spikes.len(),
            r.cplasso_spikes.len(),
            r.only_lasso.len(),
            r.only_cplasso.len(),
            r.lasso_exact_cost,
            r.cplasso_exact_cost,
            r.lasso_seconds,
            r.cplasso_seconds,
            r.error.as_deref().unwrap_or("-"),
        ));
    }
    s
}
