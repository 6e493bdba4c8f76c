use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sparse-egm"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

/// Short synthetic run so every test stays fast.
const QUICK: [&str; 8] = [
    "--set",
    "signal.duration=4",
    "--max-iter",
    "300",
    "--window-sec",
    "2",
    "--set",
    "spectral.dfa=false",
];

/// `args[0]` is the subcommand; later flags override the quick settings.
fn quick(args: &[&str]) -> Output {
    let all: Vec<&str> = args[..1]
        .iter()
        .chain(QUICK.iter())
        .chain(&args[1..])
        .copied()
        .collect();
    run(&all)
}

fn ok(out: &Output) {
    assert!(
        out.status.success(),
        "status {:?}\nstdout:\n{}\nstderr:\n{}",
        out.status,
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn help_lists_subcommands_and_defaults() {
    let out = run(&["--help"]);
    ok(&out);
    let text = String::from_utf8_lossy(&out.stdout);
    for cmd in ["synth", "fit", "select", "spectrum", "pipeline", "compare"] {
        assert!(text.contains(cmd), "{cmd} missing from help");
    }
    assert!(text.contains("gamma = 0.3") && text.contains("max_iter = 5000"));
    let sub = String::from_utf8_lossy(&run(&["fit", "--help"]).stdout).to_string();
    assert!(
        sub.contains("--warm-start") && sub.contains("--lambda") && sub.contains("notch_bw = 0.5")
    );
}

#[test]
fn staged_commands_match_the_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&quick(&["synth", "-o", s(&d.join("s"))]));
    let signal = d.join("s/signal.csv");
    assert!(d.join("s/signal.meta.json").exists());
    ok(&quick(&["fit", s(&signal), "-o", s(&d.join("f"))]));
    ok(&quick(&[
        "select",
        s(&d.join("f/ch0_coefficients.csv")),
        "-o",
        s(&d.join("sel")),
    ]));
    ok(&quick(&[
        "spectrum",
        s(&d.join("sel/activations.csv")),
        "-o",
        s(&d.join("sp")),
    ]));
    assert!(d.join("sp/spectrum.json").exists());

    ok(&quick(&["pipeline", "-o", s(&d.join("p"))]));
    let staged = std::fs::read(d.join("sel/activations.csv")).unwrap();
    let whole = std::fs::read(d.join("p/ch0_activations.csv")).unwrap();
    assert_eq!(staged, whole);
}

#[test]
fn warm_start_from_a_solution_needs_few_iterations() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&quick(&["synth", "-o", s(d)]));
    let signal = d.join("signal.csv");
    let fit = |name: &str, extra: &[&str]| {
        let mut args = vec![
            "fit",
            s(&signal),
            "--lambda",
            "1e-4",
            "--max-iter",
            "20000",
            "--set",
            "signal.duration=4",
        ];
        args.extend_from_slice(extra);
        let out_dir = d.join(name);
        args.extend_from_slice(&["-o", s(&out_dir)]);
        ok(&run(&args));
        let doc: serde_json::Value =
            serde_json::from_slice(&std::fs::read(out_dir.join("fit.json")).unwrap()).unwrap();
        let ch = &doc["channels"][0];
        (
            ch["iterations"].as_u64().unwrap(),
            ch["converged"].as_bool().unwrap(),
        )
    };
    let (cold, converged) = fit("a", &[]);
    assert!(converged);
    let coef = d.join("a/ch0_coefficients.csv");
    let (warm, converged) = fit("b", &["--warm-start", s(&coef)]);
    assert!(converged);
    assert!(warm * 10 <= cold, "{warm} iterations warm vs {cold} cold");
}

#[test]
fn job_count_does_not_change_the_report() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let mut reports = Vec::new();
    for jobs in ["1", "3"] {
        let out_dir = d.join(format!("j{jobs}"));
        ok(&quick(&[
            "pipeline",
            "--set",
            "signal.channels=3",
            "--jobs",
            jobs,
            "-o",
            s(&out_dir),
        ]));
        reports.push(std::fs::read(out_dir.join("report.json")).unwrap());
    }
    assert_eq!(reports[0], reports[1]);
}

#[test]
fn compare_writes_a_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = quick(&[
        "compare",
        "--set",
        "signal.duration=2",
        "--set",
        "dictionary.orders=2",
        "--set",
        "dictionary.sigmas=0.02",
        "--formulation",
        "penalized",
        "--lambda",
        "1e-4",
        "-o",
        s(dir.path()),
    ]);
    ok(&out);
    let table = std::fs::read_to_string(dir.path().join("comparison.tsv")).unwrap();
    assert!(table.starts_with("channel\t"));
    assert_eq!(table.lines().count(), 2);
    assert_eq!(String::from_utf8_lossy(&out.stdout), table);
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let o = s(dir.path());
    for args in [
        vec!["pipeline", "--gamma", "1.5", "-o", o],
        vec!["pipeline", "--set", "solver.bogus=1", "-o", o],
        vec!["pipeline", "--lambda", "-1", "-o", o],
        vec!["fit", "/no/such/signal.csv", "-o", o],
        vec!["pipeline", "--band", "custom:9,2", "-o", o],
    ] {
        let out = run(&args);
        assert_eq!(
            out.status.code(),
            Some(2),
            "{args:?}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        assert!(!out.stderr.is_empty());
    }
    assert!(!dir.path().join("report.json").exists());
}

#[test]
fn io_errors_exit_with_four() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "garbage\n").unwrap();
    let o = s(dir.path());
    for args in [
        vec!["spectrum", "/no/such/activations.csv", "-o", o],
        vec!["spectrum", s(&bad), "-o", o],
        vec!["select", s(&bad), "-o", o],
    ] {
        let out = run(&args);
        assert_eq!(
            out.status.code(),
            Some(4),
            "{args:?}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
}

#[test]
fn config_file_and_flags_combine() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.conf");
    std::fs::write(
        &cfg,
        "seed = 5\n[signal]\nduration = 3\nchannels = 2\n[spectral]\ndfa = false\n",
    )
    .unwrap();
    let out_dir = dir.path().join("out");
    ok(&run(&[
        "pipeline",
        "-c",
        s(&cfg),
        "--max-iter",
        "200",
        "--nmin",
        "20",
        "-o",
        s(&out_dir),
    ]));
    let echoed = std::fs::read_to_string(out_dir.join("config.txt")).unwrap();
    for line in [
        "seed = 5",
        "duration = 3",
        "channels = 2",
        "max_iter = 200",
        "nmin = 20",
    ] {
        assert!(
            echoed.lines().any(|l| l == line),
            "{line} not echoed:\n{echoed}"
        );
    }
}
