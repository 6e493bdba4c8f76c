use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sparse_egm::config::{FormulationKind, PipelineConfig, SignalSource, SolverKind};
use sparse_egm::dictionary::DictionarySpec;
use sparse_egm::io::write_signal;
use sparse_egm::pipeline::comparison_table;
use sparse_egm::{compare_solvers, run_pipeline, EgmRecord, Error};

const FS: f64 = 977.0;
const RATE: f64 = FS / 4.0;

fn example_config(out: &Path) -> PipelineConfig {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/three_foci.conf");
    let mut cfg = PipelineConfig::load(&path).unwrap();
    cfg.output = out.to_path_buf();
    cfg
}

/// Writes `Σ a_k φ(n - t_k)` for one order-2 atom of width `sigma` and
/// returns the config that fits it with exactly that atom.
fn atom_signal(
    dir: &Path,
    spikes: &[(usize, f64)],
    samples: usize,
    sigma: f64,
    noise: f64,
    seed: u64,
) -> PipelineConfig {
    let atom = &DictionarySpec::grid(&[2], &[sigma], RATE, 5.0)
        .unwrap()
        .build()
        .unwrap()[0];
    let mut y = vec![0.0; samples];
    for &(t, a) in spikes {
        for (j, k) in atom.kernel.iter().enumerate() {
            let i = t as i64 + j as i64 - atom.shift as i64;
            if (0..samples as i64).contains(&i) {
                y[i as usize] += a * k;
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for v in &mut y {
        *v += noise * rng.random_range(-1.0..1.0);
    }
    let path = dir.join(format!("input{seed}.csv"));
    write_signal(
        &path,
        &EgmRecord::new(vec![y], FS, 4, vec![noise]).unwrap(),
        None,
    )
    .unwrap();

    let mut cfg = PipelineConfig::default();
    cfg.output = dir.join(format!("out{seed}"));
    cfg.signal.source = SignalSource::File(path);
    cfg.signal.difference = false;
    cfg.dictionary.orders = vec![2];
    cfg.dictionary.sigmas = Some(vec![sigma]);
    cfg.spectral.dfa = false;
    cfg.selection.pmin = Some(1);
    cfg
}

#[test]
fn example_config_finds_three_foci() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = example_config(&dir.path().join("out"));
    let report = run_pipeline(&cfg, 2).unwrap();
    let ch = &report.channels[0];
    assert!(ch.valid);
    assert_eq!(ch.foci_count, 3, "{:?}", ch.frequencies);
    for f in [4.0, 6.0, 7.0] {
        assert!(
            ch.frequencies.iter().any(|g| (g - f).abs() <= 0.25),
            "{f} Hz missing from {:?}",
            ch.frequencies
        );
    }
    for name in [
        "report.json",
        "config.txt",
        "signal.csv",
        "signal.meta.json",
        "ch0_activations.csv",
        "ch0_seg0_spectrum.csv",
    ] {
        assert!(cfg.output.join(name).exists(), "{name} not written");
    }
}

#[test]
fn repeated_runs_give_identical_reports() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = PipelineConfig::default();
    cfg.signal.duration = 4.0;
    cfg.signal.channels = 2;
    cfg.solver.max_iter = 200;
    let mut outputs: Vec<Vec<u8>> = Vec::new();
    for run in 0..3 {
        cfg.output = dir.path().join(format!("r{run}"));
        run_pipeline(&cfg, run + 1).unwrap();
        outputs.push(std::fs::read(cfg.output.join("report.json")).unwrap());
    }
    assert!(outputs.windows(2).all(|w| w[0] == w[1]));
}

#[test]
fn echoed_config_reproduces_the_report() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = PipelineConfig::default();
    cfg.signal.duration = 4.0;
    cfg.solver.max_iter = 200;
    cfg.output = dir.path().join("a");
    let first = run_pipeline(&cfg, 1).unwrap();
    let mut again =
        PipelineConfig::parse(&std::fs::read_to_string(cfg.output.join("config.txt")).unwrap())
            .unwrap();
    again.output = dir.path().join("b");
    let second = run_pipeline(&again, 1).unwrap();
    assert_eq!(first.to_json().unwrap(), second.to_json().unwrap());
}

#[test]
fn cplasso_report_carries_a_monotone_trace() {
    let dir = tempfile::tempdir().unwrap();
    let samples = (2.0 * RATE) as usize;
    let mut cfg = atom_signal(
        dir.path(),
        &[(60, 1.0), (150, 0.8), (300, 1.2), (420, 0.9)],
        samples,
        0.02,
        1e-3,
        1,
    );
    cfg.solver.kind = SolverKind::Cplasso;
    let report = run_pipeline(&cfg, 1).unwrap();
    let solver = &report.channels[0].solver;
    assert_eq!(solver.windows.len(), 1);
    let trace = &solver.windows[0].cost_trace;
    assert!(!trace.is_empty());
    assert!(trace.windows(2).all(|w| w[1] <= w[0]), "{trace:?}");
    assert!(cfg.output.join("ch0_w0_cost.csv").exists());
}

#[test]
fn noiseless_separated_spikes_agree_across_solvers() {
    let dir = tempfile::tempdir().unwrap();
    let samples = (2.0 * RATE) as usize;
    let spikes = [(40, 1.0), (140, 0.7), (250, 1.1), (380, 0.9)];
    let mut cfg = atom_signal(dir.path(), &spikes, samples, 0.02, 0.0, 2);
    cfg.solver.formulation = FormulationKind::Penalized;
    cfg.solver.lambda = Some(1e-4);
    let rows = compare_solvers(&cfg, 1).unwrap();
    let row = &rows[0];
    assert!(row.error.is_none());
    let truth: Vec<usize> = spikes.iter().map(|s| s.0).collect();
    assert_eq!(row.lasso_spikes, truth);
    assert!(row.identical(), "{row:?}");
}

#[test]
fn empty_signal_gives_empty_rows() {
    let dir = tempfile::tempdir().unwrap();
    let samples = (2.0 * RATE) as usize;
    let cfg = atom_signal(dir.path(), &[], samples, 0.02, 0.0, 3);
    let rows = compare_solvers(&cfg, 1).unwrap();
    assert_eq!(rows.len(), 1);
    assert!(rows[0].lasso_spikes.is_empty() && rows[0].cplasso_spikes.is_empty());
    let table = comparison_table(&rows);
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines.len(), 2, "{table}");
    let width = lines[0].split('\t').count();
    assert!(
        lines.iter().all(|l| l.split('\t').count() == width),
        "{table}"
    );
}

#[test]
fn cross_products_beat_greedy_on_near_refractory_pairs() {
    use rayon::prelude::*;
    let dir = tempfile::tempdir().unwrap();
    let samples = (2.0 * RATE) as usize;
    let wins = (0..50u64)
        .into_par_iter()
        .filter(|&seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let first = rng.random_range(60..200usize);
            let gap = rng.random_range(4..20usize);
            let spikes = [
                (first, rng.random_range(0.8..1.2)),
                (first + gap, rng.random_range(0.3..0.7)),
                (first + 200, rng.random_range(0.8..1.2)),
            ];
            let mut cfg = atom_signal(dir.path(), &spikes, samples, 0.02, 0.01, 100 + seed);
            cfg.solver.formulation = FormulationKind::Penalized;
            cfg.solver.lambda = Some(1e-4);
            let row = compare_solvers(&cfg, 1).unwrap().remove(0);
            assert!(row.error.is_none(), "{row:?}");
            row.cplasso_exact_cost <= row.lasso_exact_cost
        })
        .count();
    assert!(
        wins >= 40,
        "cross-products cost no larger in only {wins}/50 runs"
    );
}

#[test]
fn input_files_are_left_untouched() {
    let dir = tempfile::tempdir().unwrap();
    let samples = (4.0 * RATE) as usize;
    let spikes: Vec<(usize, f64)> = (0..16).map(|k| (30 + 60 * k, 1.0)).collect();
    let cfg = atom_signal(dir.path(), &spikes, samples, 0.02, 1e-3, 4);
    let SignalSource::File(input) = &cfg.signal.source else {
        unreachable!()
    };
    let meta: PathBuf = input.with_extension("meta.json");
    let before = (std::fs::read(input).unwrap(), std::fs::read(&meta).unwrap());
    run_pipeline(&cfg, 1).unwrap();
    let after = (std::fs::read(input).unwrap(), std::fs::read(&meta).unwrap());
    assert!(before == after);
}

#[test]
fn failing_stage_is_named_and_output_kept() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("bad.csv");
    let good = EgmRecord::new(vec![vec![0.0; 64]], FS, 4, vec![0.1]).unwrap();
    write_signal(&input, &good, None).unwrap();
    std::fs::write(&input, "n,ch0\n0,not-a-number\n").unwrap();
    let mut cfg = PipelineConfig::default();
    cfg.signal.source = SignalSource::File(input);
    cfg.output = dir.path().join("out");
    let err = run_pipeline(&cfg, 1).unwrap_err();
    assert!(
        matches!(
            err,
            Error::Stage {
                stage: "signal",
                ..
            }
        ),
        "{err}"
    );
    assert!(err.to_string().contains("signal"));
    assert!(cfg.output.join("config.txt").exists());
}

#[test]
fn invalid_parameters_fail_before_any_output() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = PipelineConfig::default();
    cfg.spectral.gamma = 1.5;
    cfg.output = dir.path().join("out");
    let err = run_pipeline(&cfg, 1).unwrap_err();
    assert!(
        matches!(
            err.root(),
            Error::InvalidParameter { .. } | Error::Config(_)
        ),
        "{err}"
    );
    assert!(!cfg.output.exists());
}
