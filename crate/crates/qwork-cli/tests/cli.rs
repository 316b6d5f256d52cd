//! Integration tests of the run orchestration: artifact determinism, the
//! degenerate-fit reporting path, exit codes, and the oracle command.

use std::fs;
use std::path::Path;
use std::process::Command;

use qwork_cli::config::RunConfig;
use qwork_cli::oracle::run_oracle;
use qwork_cli::run::{execute, run_experiment, RunOptions};

fn small_config(extra: &str) -> RunConfig {
    // a cheap but nontrivial pipeline: short window, modest truncation
    let text = format!(
        r#"
[trap]
frequency_khz = 300.0
eta = 0.33
rabi_max_khz = 150.0
nbar = 1.0

[schedule_forward]
shape = "tanh"
switching_time_us = 1.0

[measurement]
du_us = 0.5
samples = 300
tau_us = 25.0
noise_sigma = 0.0
seed = 7

[numerics]
dim = 48

{extra}
"#
    );
    RunConfig::from_toml(&text).unwrap()
}

fn dir_contents(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut entries: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                fs::read(e.path()).unwrap(),
            )
        })
        .collect();
    entries.sort_by(|a, b| a.0.cmp(&b.0));
    entries
}

#[test]
fn identical_runs_are_byte_identical() {
    let cfg = small_config("");
    let tmp = tempfile::tempdir().unwrap();
    let dir_a = tmp.path().join("a");
    let dir_b = tmp.path().join("b");
    run_experiment(&cfg, &dir_a, &RunOptions::default()).unwrap();
    run_experiment(&cfg, &dir_b, &RunOptions::default()).unwrap();

    let a = dir_contents(&dir_a);
    let b = dir_contents(&dir_b);
    assert_eq!(
        a.iter().map(|(n, _)| n.clone()).collect::<Vec<_>>(),
        b.iter().map(|(n, _)| n.clone()).collect::<Vec<_>>()
    );
    for ((name, bytes_a), (_, bytes_b)) in a.iter().zip(b.iter()) {
        assert_eq!(bytes_a, bytes_b, "artifact {name} differs between runs");
    }
    // the expected artifact set is complete
    let names: Vec<&str> = a.iter().map(|(n, _)| n.as_str()).collect();
    for expected in [
        "config.toml",
        "report.json",
        "signal_forward.csv",
        "signal_forward.meta.json",
        "signal_backward.csv",
        "signal_backward.meta.json",
        "spectrum_forward.csv",
        "spectrum_backward.csv",
        "peaks_forward.json",
        "peaks_backward.json",
        "crooks_fit.json",
        "spectra.svg",
        "ratio.svg",
    ] {
        assert!(names.contains(&expected), "missing artifact {expected}");
    }
}

#[test]
fn different_seeds_differ_with_noise() {
    let cfg = small_config("");
    let tmp = tempfile::tempdir().unwrap();
    let mut opts = RunOptions {
        noise: Some(0.005),
        no_plots: true,
        ..Default::default()
    };
    opts.seed = Some(1);
    run_experiment(&cfg, &tmp.path().join("a"), &opts).unwrap();
    opts.seed = Some(2);
    run_experiment(&cfg, &tmp.path().join("b"), &opts).unwrap();
    let a = fs::read(tmp.path().join("a/signal_forward.csv")).unwrap();
    let b = fs::read(tmp.path().join("b/signal_forward.csv")).unwrap();
    assert_ne!(a, b);
}

#[test]
fn null_quench_reports_degenerate_fit() {
    // dark laser: χ ≡ 1, a single line at W = 0, no slope to fit
    let text = r#"
[trap]
frequency_khz = 300.0
eta = 0.33
rabi_max_khz = 0.0
nbar = 1.0

[schedule_forward]
shape = "tanh"
switching_time_us = 1.0

[measurement]
du_us = 0.5
samples = 300
tau_us = 25.0
noise_sigma = 0.0
seed = 1

[numerics]
dim = 48
"#;
    let cfg = RunConfig::from_toml(text).unwrap();
    let out = execute(&cfg).unwrap();
    assert!(out.fit.is_none());
    let err = out.report.fit_error.as_deref().unwrap();
    assert!(err.contains("degenerate"), "unexpected fit error: {err}");
    // the single peak sits at W = 0
    let peaks = out.peaks_forward.unwrap();
    assert_eq!(peaks.peaks.len(), 1);
    assert!(peaks.peaks[0].w.abs() < out.spectrum_forward.d_w);
    assert!((out.report.jarzynski.lhs - 1.0).abs() < 1e-10);
}

#[test]
fn oracle_satisfies_crooks_exactly() {
    let cfg = small_config("");
    let report = run_oracle(&cfg).unwrap();
    assert!(report.table.len() >= 3);
    assert!(
        report.max_relative_deviation < 1e-9,
        "max deviation {:.3e}",
        report.max_relative_deviation
    );
    // ΔF = ε − g²/ω = 66.83 kHz for the paper operating point
    assert!((report.delta_f_khz - 66.8325).abs() < 0.001);
}

#[test]
fn binary_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_qwork");
    let tmp = tempfile::tempdir().unwrap();

    // config error: malformed TOML
    let bad = tmp.path().join("bad.toml");
    fs::write(&bad, "[trap\nfrequency_khz = ").unwrap();
    let status = Command::new(bin)
        .args(["run", bad.to_str().unwrap(), "--out"])
        .arg(tmp.path().join("out"))
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));

    // config error: schema violation
    let schema = tmp.path().join("schema.toml");
    fs::write(
        &schema,
        "[trap]\nnbar = -1.0\n[schedule_forward]\nshape = \"tanh\"\nswitching_time_us = 1.0\n",
    )
    .unwrap();
    let status = Command::new(bin)
        .args(["run", schema.to_str().unwrap(), "--out"])
        .arg(tmp.path().join("out2"))
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));

    // numerical failure: a thermal state far too hot for the truncation
    let hot = tmp.path().join("hot.toml");
    fs::write(
        &hot,
        r#"
[trap]
nbar = 50.0

[schedule_forward]
shape = "tanh"
switching_time_us = 1.0

[measurement]
samples = 100

[numerics]
dim = 16
"#,
    )
    .unwrap();
    let out = Command::new(bin)
        .args(["run", hot.to_str().unwrap(), "--out"])
        .arg(tmp.path().join("out3"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("fockspace"), "missing stage label: {stderr}");
}

#[test]
fn run_command_writes_and_reports() {
    let bin = env!("CARGO_BIN_EXE_qwork");
    let tmp = tempfile::tempdir().unwrap();
    let cfg_path = tmp.path().join("run.toml");
    fs::write(&cfg_path, small_config("").to_toml()).unwrap();
    let out_dir = tmp.path().join("out");
    let output = Command::new(bin)
        .args(["run", cfg_path.to_str().unwrap(), "--out"])
        .arg(&out_dir)
        .arg("--no-plots")
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(0));
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.contains("beta_hat"), "summary missing: {stdout}");
    assert!(out_dir.join("report.json").exists());
    assert!(!out_dir.join("spectra.svg").exists());
}
