//! Command-line front end: each stage runs standalone on the files written by
//! the previous one, or all at once through `pipeline`.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand};

use sparse_egm::config::SignalSource;
use sparse_egm::io::{self, CoefficientFile};
use sparse_egm::pipeline::{
    comparison_table, consensus, dictionary_atoms, fit_channel, fit_lasso_from, prepare_signal,
    select_activations, ssa_params, synthesize, write_segment_spectra, EffectiveParams, Inference,
};
use sparse_egm::refractory::channel_validity;
use sparse_egm::spectral::{analyze_sequence, SegmentAnalysis};
use sparse_egm::{compare_solvers, run_pipeline, Error, PipelineConfig, Result};

#[derive(Parser)]
#[command(
    name = "sparse-egm",
    version,
    about = "Sparse inference and spectral analysis of electrogram-like signals"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic multi-focus signal into `<out>/signal.csv`.
    Synth {
        #[command(flatten)]
        params: Params,
    },
    /// Fit the sparse model to a signal CSV and write coefficient files.
    Fit {
        /// Signal CSV with its `.meta.json` sidecar.
        input: PathBuf,
        /// Coefficient CSV to start the LASSO iterations from.
        #[arg(long, value_name = "FILE")]
        warm_start: Option<PathBuf>,
        #[command(flatten)]
        params: Params,
    },
    /// Greedy refractory selection over one channel's coefficient files.
    Select {
        /// Coefficient CSVs of one channel (several for windowed fits).
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        /// Sampling rate of the coefficients, Hz [default: fs / decimation].
        #[arg(long)]
        rate: Option<f64>,
        #[command(flatten)]
        params: Params,
    },
    /// Spectral analysis of an activation CSV.
    Spectrum {
        /// Activation CSV as written by `select`.
        input: PathBuf,
        #[command(flatten)]
        params: Params,
    },
    /// Every stage in one run, with `report.json` and plot-ready CSVs.
    Pipeline {
        #[command(flatten)]
        params: Params,
    },
    /// LASSO with greedy selection against cross-products LASSO.
    Compare {
        #[command(flatten)]
        params: Params,
    },
}

/// Settings shared by all subcommands. Flags override the config file.
#[derive(Args)]
struct Params {
    /// Config file (`key = value`, `[section]` headers).
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, short)]
    out: Option<PathBuf>,
    /// Worker threads for channel-level parallelism.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Any config key, e.g. `--set signal.duration=8`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// RNG seed for synthesis [default: 0].
    #[arg(long)]
    seed: Option<String>,
    /// `lasso` or `cplasso` [default: lasso].
    #[arg(long)]
    solver: Option<String>,
    /// `constrained` or `penalized`, cross-products only [default: constrained].
    #[arg(long)]
    formulation: Option<String>,
    /// Sparsity weight [default: 1e-4 for the sinus band, 1e-6 otherwise].
    #[arg(long, allow_hyphen_values = true)]
    lambda: Option<String>,
    /// LASSO iteration budget [default: 5000].
    #[arg(long)]
    max_iter: Option<String>,
    /// LASSO stopping tolerance, relative to lambda [default: 1e-6].
    #[arg(long)]
    tol: Option<String>,
    /// Residual bound of the constrained form [default: sigma * sqrt(N)].
    #[arg(long, allow_hyphen_values = true)]
    xi: Option<String>,
    /// Cross-product weight [default: 1e3 * lambda].
    #[arg(long, allow_hyphen_values = true)]
    rho: Option<String>,
    /// Outer SCA iterations [default: 50].
    #[arg(long)]
    sca_max_outer: Option<String>,
    /// Inner solver relative tolerance [default: 1e-7].
    #[arg(long)]
    inner_tol: Option<String>,
    /// Selection threshold [default: 3 * sigma].
    #[arg(long, allow_hyphen_values = true)]
    eta: Option<String>,
    /// Minimum gap between activations, samples [default: one refractory period].
    #[arg(long)]
    nmin: Option<String>,
    /// Activations needed for a usable channel [default: one per slowest in-band period].
    #[arg(long)]
    pmin: Option<String>,
    /// `sinus`, `af` or `custom:lo,hi` [default: af].
    #[arg(long)]
    band: Option<String>,
    /// Peak threshold relative to the strongest peak, in (0, 1) [default: 0.3].
    #[arg(long, allow_hyphen_values = true)]
    gamma: Option<String>,
    /// Analysis segment length, seconds [default: 4].
    #[arg(long)]
    window_sec: Option<String>,
    /// Notch -3 dB bandwidth, Hz [default: 0.5].
    #[arg(long)]
    notch_bw: Option<String>,
}

impl Params {
    fn config(&self) -> Result<PipelineConfig> {
        let mut cfg = match &self.config {
            Some(path) => PipelineConfig::load(path)?,
            None => PipelineConfig::default(),
        };
        let flags = [
            ("seed", &self.seed),
            ("solver.kind", &self.solver),
            ("solver.formulation", &self.formulation),
            ("solver.lambda", &self.lambda),
            ("solver.max_iter", &self.max_iter),
            ("solver.tol", &self.tol),
            ("solver.xi", &self.xi),
            ("solver.rho", &self.rho),
            ("solver.sca_max_outer", &self.sca_max_outer),
            ("solver.inner_tol", &self.inner_tol),
            ("selection.eta", &self.eta),
            ("selection.nmin", &self.nmin),
            ("selection.pmin", &self.pmin),
            ("spectral.band", &self.band),
            ("spectral.gamma", &self.gamma),
            ("spectral.window", &self.window_sec),
            ("spectral.notch_bw", &self.notch_bw),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                cfg.set(key, v)?;
            }
        }
        for kv in &self.set {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("--set expects KEY=VALUE, got `{kv}`")))?;
            cfg.set(k.trim(), v.trim())?;
        }
        if let Some(out) = &self.out {
            cfg.output = out.clone();
        }
        Ok(cfg)
    }
}

fn exit_code(e: &Error) -> u8 {
    match e.root() {
        Error::Io(_) | Error::Parse { .. } | Error::Json(_) => 4,
        Error::Numerical(_) | Error::Eigen | Error::TooLarge(..) => 3,
        _ => 2,
    }
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    Ok(())
}

fn synth(params: &Params) -> Result<()> {
    let cfg = params.config()?;
    cfg.validate()?;
    let (record, foci) = synthesize(&cfg)?;
    ensure_dir(&cfg.output)?;
    let path = cfg.output.join("signal.csv");
    io::write_signal(&path, &record, Some(&foci))?;
    println!(
        "{}: {} channel(s), {} samples at {} Hz",
        path.display(),
        record.channel_count(),
        record.len(),
        record.fs
    );
    Ok(())
}

fn write_inference(dir: &Path, q: usize, inf: &Inference) -> Result<()> {
    match inf.files.as_slice() {
        [single] => io::write_coefficients(&dir.join(format!("ch{q}_coefficients.csv")), single)?,
        many => {
            for (w, f) in many.iter().enumerate() {
                io::write_coefficients(&dir.join(format!("ch{q}_w{w}_coefficients.csv")), f)?;
            }
        }
    }
    for (w, win) in inf.summary.windows.iter().enumerate() {
        io::write_trace(&dir.join(format!("ch{q}_w{w}_cost.csv")), &win.cost_trace)?;
    }
    Ok(())
}

fn fit(input: &Path, warm_start: Option<&Path>, params: &Params) -> Result<()> {
    let mut cfg = params.config()?;
    cfg.signal.source = SignalSource::File(input.to_path_buf());
    cfg.validate()?;
    let warm = warm_start.map(io::read_coefficients).transpose()?;
    let prepared = prepare_signal(&cfg)?;
    let samples = prepared.targets.first().map_or(0, Vec::len);
    let eff = EffectiveParams::resolve(&cfg, &prepared.record, samples);
    let atoms = dictionary_atoms(&cfg, &eff)?;
    ensure_dir(&cfg.output)?;
    let mut summaries = Vec::new();
    for (q, target) in prepared.targets.iter().enumerate() {
        let inf = match &warm {
            Some(w) if cfg.solver.kind == sparse_egm::config::SolverKind::Lasso => {
                fit_lasso_from(&atoms, target, 0, &cfg, &eff, Some(w.beta.as_slice()))?
            }
            Some(_) => {
                return Err(Error::Config(
                    "--warm-start applies to the lasso solver only".into(),
                ))
            }
            None => fit_channel(&atoms, target, &cfg, &eff)?,
        };
        write_inference(&cfg.output, q, &inf)?;
        println!(
            "channel {q}: {} non-zeros, {} iterations, converged {}",
            inf.summary.nonzeros, inf.summary.iterations, inf.summary.converged
        );
        summaries.push(inf.summary);
    }
    let doc = serde_json::json!({ "config": cfg, "effective": eff, "channels": summaries });
    io::write_json(&cfg.output.join("fit.json"), &doc)
}

fn select(inputs: &[PathBuf], rate: Option<f64>, params: &Params) -> Result<()> {
    let cfg = params.config()?;
    let files: Vec<CoefficientFile> = inputs
        .iter()
        .map(|p| io::read_coefficients(p))
        .collect::<Result<_>>()?;
    let samples = files.iter().map(|f| f.start + f.samples).max().unwrap_or(0);
    let eff = match rate {
        Some(r) => EffectiveParams::for_rate(&cfg, r, 1, samples),
        None => EffectiveParams::for_rate(&cfg, cfg.signal.fs, cfg.signal.decimation, samples),
    };
    let seq = select_activations(&files, samples, &eff.selection()?);
    ensure_dir(&cfg.output)?;
    let path = cfg.output.join("activations.csv");
    io::write_activations(&path, &seq, eff.rate)?;
    let valid = channel_validity(&seq, eff.pmin);
    println!(
        "{}: {} activations (η = {:e}, N_min = {}), channel {}",
        path.display(),
        seq.count(),
        eff.eta,
        eff.nmin,
        if valid { "valid" } else { "rejected" }
    );
    Ok(())
}

fn spectrum(input: &Path, params: &Params) -> Result<()> {
    let cfg = params.config()?;
    let (seq, rate) = io::read_activations(input)?;
    let segments: Vec<SegmentAnalysis> = analyze_sequence(&seq, rate, &ssa_params(&cfg))?;
    let (count, freqs) = consensus(&segments);
    ensure_dir(&cfg.output)?;
    write_segment_spectra(&cfg.output, "", &seq, &segments, &cfg, rate)?;
    let doc = serde_json::json!({
        "rate": rate,
        "foci_count": count,
        "frequencies": freqs,
        "segments": segments,
    });
    io::write_json(&cfg.output.join("spectrum.json"), &doc)?;
    for s in &segments {
        println!(
            "segment {}: R = {}, f = {:.3?} Hz",
            s.segment.index, s.estimate.count, s.estimate.frequencies
        );
    }
    println!("R = {count}, f = {freqs:.3?} Hz");
    Ok(())
}

fn pipeline(params: &Params) -> Result<()> {
    let cfg = params.config()?;
    let report = run_pipeline(&cfg, params.jobs)?;
    for ch in &report.channels {
        if ch.valid {
            println!(
                "channel {}: {} activations, R = {}, f = {:.3?} Hz",
                ch.channel, ch.activation_count, ch.foci_count, ch.frequencies
            );
        } else {
            println!(
                "channel {}: rejected ({} activations)",
                ch.channel, ch.activation_count
            );
        }
    }
    println!(
        "report written to {}",
        cfg.output.join("report.json").display()
    );
    Ok(())
}

fn compare(params: &Params) -> Result<()> {
    let cfg = params.config()?;
    let rows = compare_solvers(&cfg, params.jobs)?;
    let table = comparison_table(&rows);
    ensure_dir(&cfg.output)?;
    std::fs::write(cfg.output.join("comparison.tsv"), &table)?;
    io::write_json(&cfg.output.join("comparison.json"), &rows)?;
    print!("{table}");
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match &cli.command {
        Command::Synth { params } => synth(params),
        Command::Fit {
            input,
            warm_start,
            params,
        } => fit(input, warm_start.as_deref(), params),
        Command::Select {
            inputs,
            rate,
            params,
        } => select(inputs, *rate, params),
        Command::Spectrum { input, params } => spectrum(input, params),
        Command::Pipeline { params } => pipeline(params),
        Command::Compare { params } => compare(params),
    }
}

fn main() -> ExitCode {
    let defaults = format!(
        "Exit codes: 0 success, 2 configuration error, 3 numerical failure, 4 I/O error.\n\n\
         Config keys and their defaults (`auto` means derived from the signal):\n\n{}",
        PipelineConfig::default().to_text()
    );
    let matches = Cli::command()
        .after_long_help(defaults.clone())
        .mut_subcommands(|sub| sub.after_long_help(defaults.clone()))
        .get_matches();
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
