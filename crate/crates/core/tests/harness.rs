use std::fs;
use std::path::Path;
use std::process::Command;

use dnnqst::bench::{
    parse_csv, run_experiment, run_optical_generalization, sweep_purity, ExperimentConfig,
    ExperimentKind, ResultRow, CSV_HEADER,
};
use dnnqst::QstError;

fn config(kind: ExperimentKind, out: &Path) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::template(kind);
    cfg.experiment.output_dir = out.to_string_lossy().into_owned();
    cfg.experiment.test_size = 60;
    cfg.experiment.train_size = 200;
    cfg.train.epochs = 5;
    cfg
}

fn rows_for<'a>(rows: &'a [ResultRow], est: &str) -> Vec<&'a ResultRow> {
    rows.iter().filter(|r| r.estimator == est).collect()
}

#[test]
fn copies_sweep_rows_and_trend() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config(ExperimentKind::CopiesSweep, dir.path());
    cfg.experiment.estimators = vec!["mle".into(), "lre".into()];
    let report = run_experiment(&cfg).unwrap();
    assert_eq!(report.rows.len(), 6);
    for est in ["mle", "lre"] {
        let r = rows_for(&report.rows, est);
        assert_eq!(r.iter().map(|r| r.sweep_value).collect::<Vec<_>>(), vec![10.0, 100.0, 1000.0]);
        assert!(r.windows(2).all(|w| w[1].mean_infidelity <= w[0].mean_infidelity));
        assert!(r.iter().all(|r| r.n_samples == 60 && (0.0..=1.0).contains(&r.mean_infidelity)));
    }
    let csv = fs::read_to_string(dir.path().join("copies-smoke.csv")).unwrap();
    assert_eq!(csv.lines().count(), 7);
    assert_eq!(parse_csv(&csv).unwrap(), report.rows);
    let dat = fs::read_to_string(dir.path().join("copies-smoke.dat")).unwrap();
    assert_eq!(dat.matches("# estimator=").count(), 2);
}

#[test]
fn sets_sweep_reaches_exactness_at_complete_suite() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config(ExperimentKind::SetsSweep, dir.path());
    cfg.experiment.estimators = vec!["lre".into(), "mle".into()];
    cfg.experiment.test_size = 30;
    let report = run_experiment(&cfg).unwrap();
    assert_eq!(report.rows.len(), 18);
    let lre = rows_for(&report.rows, "lre");
    assert!(lre.last().unwrap().mean_infidelity < 1e-6);
    assert!(lre[0].mean_infidelity > 0.1);
}

#[test]
fn exactness_sentinel_fails_loudly() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config(ExperimentKind::SetsSweep, dir.path());
    cfg.experiment.estimators = vec!["mle".into()];
    cfg.experiment.grid = vec![9.0];
    cfg.experiment.test_size = 10;
    cfg.mle.max_iters = 1;
    cfg.mle.accelerate = false;
    match run_experiment(&cfg) {
        Err(QstError::Sentinel(msg)) => assert!(msg.contains("mle")),
        other => panic!("expected sentinel failure, got {other:?}"),
    }
}

#[test]
fn purity_sweep_reports_direct_purity() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config(ExperimentKind::PuritySweep, dir.path());
    cfg.experiment.estimators = vec!["lre".into(), "mle".into()];
    cfg.experiment.test_size = 20;
    cfg.experiment.grid.push(0.99);
    let report = sweep_purity(&cfg).unwrap();
    assert_eq!(report.rows.len(), 10 * 2);
    assert!(report.purity.windows(2).all(|w| w[1].purity > w[0].purity));
    let last = report.purity.last().unwrap();
    assert_eq!(last.p, 0.99);
    assert!(last.purity > 0.97);
    let side = fs::read_to_string(dir.path().join("purity-smoke_purity.csv")).unwrap();
    assert_eq!(side.lines().count(), 11);
    assert!(matches!(run_optical_generalization(&cfg), Err(QstError::Config { .. })));
}

#[test]
fn zero_noise_matches_noiseless_bit_for_bit() {
    let dir = tempfile::tempdir().unwrap();
    let mut noisy = config(ExperimentKind::NoiseSweep, &dir.path().join("noisy"));
    noisy.experiment.grid = vec![0.0, 0.1];
    noisy.experiment.name = "same".into();
    let mut clean = config(ExperimentKind::CopiesSweep, &dir.path().join("clean"));
    clean.experiment.grid = vec![100.0];
    clean.experiment.name = "same".into();
    let a = run_experiment(&noisy).unwrap();
    let b = run_experiment(&clean).unwrap();
    for est in ["dnn", "mle", "lre"] {
        let zero = rows_for(&a.rows, est)[0];
        let tenth = rows_for(&a.rows, est)[1];
        let base = rows_for(&b.rows, est)[0];
        assert_eq!(zero.mean_infidelity.to_bits(), base.mean_infidelity.to_bits(), "{est}");
        assert_eq!(zero.std_error.to_bits(), base.std_error.to_bits(), "{est}");
        if est != "dnn" {
            assert!(tenth.mean_infidelity > zero.mean_infidelity, "{est}");
        }
    }
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(ExperimentKind::CopiesSweep, &dir.path().join("a"));
    let mut again = cfg.clone();
    again.experiment.output_dir = dir.path().join("b").to_string_lossy().into_owned();
    run_experiment(&cfg).unwrap();
    run_experiment(&again).unwrap();
    // Third run hits the warm cache.
    run_experiment(&cfg).unwrap();
    let x = fs::read(dir.path().join("a/copies-smoke.csv")).unwrap();
    let y = fs::read(dir.path().join("b/copies-smoke.csv")).unwrap();
    assert_eq!(x, y);
    assert!(fs::read_dir(dir.path().join("a/cache")).unwrap().count() >= 2);
}

#[test]
fn optical_protocol_runs_at_desk_scale() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config(ExperimentKind::OpticalGeneralization, dir.path());
    cfg.experiment.shots = "exact".into();
    cfg.experiment.train_shots = "exact".into();
    cfg.experiment.grid = vec![0.0, 0.1];
    let report = run_optical_generalization(&cfg).unwrap();
    assert_eq!(report.rows.len(), 2 * 2 * 3);
    assert!(report.rows.iter().all(|r| r.n_samples == 105));
    for r in &report.rows {
        if r.sweep_value == 0.0 && r.estimator != "dnn" {
            assert!(r.mean_infidelity < 1e-3, "{r:?}");
        }
    }
    let params: Vec<&str> = report.rows.iter().map(|r| r.sweep_param.as_str()).collect();
    assert!(params.contains(&"xi:cube") && params.contains(&"xi:mub"));
}

#[test]
fn optical_with_missing_model_fails() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config(ExperimentKind::OpticalGeneralization, dir.path());
    cfg.optical.cube_model = dir.path().join("absent.dnnqst").to_string_lossy().into_owned();
    assert!(matches!(run_experiment(&cfg), Err(QstError::MissingModel(_))));
}

#[test]
fn config_errors_name_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config(ExperimentKind::NoiseSweep, dir.path());
    cfg.experiment.grid = vec![-0.1];
    match run_experiment(&cfg) {
        Err(QstError::Config { field, .. }) => assert_eq!(field, "experiment.grid"),
        other => panic!("{other:?}"),
    }
    cfg.experiment.grid = vec![0.1];
    cfg.experiment.shots = "many".into();
    match cfg.validate() {
        Err(QstError::Config { field, .. }) => assert_eq!(field, "experiment.shots"),
        other => panic!("{other:?}"),
    }
}

fn qstbench(args: &[&str], cwd: &Path) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_qstbench"))
        .args(args)
        .current_dir(cwd)
        .env_remove("QSTBENCH_CACHE_DIR")
        .output()
        .unwrap()
}

#[test]
fn cli_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();

    let out = qstbench(&["config", "init", "--kind", "purity_sweep"], d);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let cfg = ExperimentConfig::from_toml(&text).unwrap();
    assert_eq!(cfg.experiment.kind, ExperimentKind::PuritySweep);

    let gen = [
        "generate", "--family", "mixed:0.8", "--shots", "100", "--count", "40", "--seed", "3", "--out", "train.qstdata",
    ];
    assert!(qstbench(&gen, d).status.success());
    let out = qstbench(&["train", "--data", "train.qstdata", "--out", "m.dnnqst", "--epochs", "3"], d);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for est in ["lre", "mle"] {
        let out = qstbench(&["eval", "--data", "train.qstdata", "--estimator", est], d);
        let line = String::from_utf8(out.stdout).unwrap();
        assert!(line.starts_with(&format!("estimator={est} mean_infidelity=")), "{line}");
        assert!(line.contains("n_samples=40"));
    }
    let out = qstbench(&["eval", "--data", "train.qstdata", "--estimator", "dnn", "--model", "m.dnnqst"], d);
    assert!(out.status.success());

    let mut small = ExperimentConfig::template(ExperimentKind::CopiesSweep);
    small.experiment.estimators = vec!["lre".into()];
    small.experiment.grid = vec![10.0, 100.0];
    small.experiment.test_size = 10;
    fs::write(d.join("s.toml"), small.to_toml()).unwrap();
    let out = qstbench(&["sweep", "--config", "s.toml", "--output-dir", "out", "--seed", "4"], d);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(d.join("out/copies-smoke.csv")).unwrap();
    assert!(csv.starts_with(CSV_HEADER));
    assert_eq!(csv.lines().count(), 3);
}

#[test]
fn cli_failures_print_machine_parsable_line() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("bad.toml"), "[experiment]\ngrid = []\n").unwrap();
    let out = qstbench(&["sweep", "--config", "bad.toml"], d);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    let line = err.lines().last().unwrap();
    assert!(line.starts_with("error kind=Config message=\""), "{line}");

    let out = qstbench(&["eval", "--data", "missing.qstdata", "--estimator", "lre"], d);
    assert!(!out.status.success());
    assert!(String::from_utf8(out.stderr).unwrap().contains("error kind=IoError"));

    fs::write(d.join("o.toml"), ExperimentConfig::template(ExperimentKind::OpticalGeneralization).to_toml()).unwrap();
    let out = qstbench(&["optical", "--config", "o.toml", "--cube-model", "nope.dnnqst"], d);
    assert!(String::from_utf8(out.stderr).unwrap().contains("error kind=MissingModel"));
}
