mod common;

use std::fs;

use common::suites::{golden_check, paramint};

fn tmp() -> tempfile::TempDir {
    tempfile::tempdir().unwrap()
}

#[test]
fn gen_prints_resolved_config_and_writes_dataset() {
    let dir = tmp();
    let (code, out, err) = paramint(
        dir.path(),
        &["gen", "--problem", "chi2_cdf_2d", "--size", "64", "--seed", "7", "--out", "d.csv"],
    );
    assert_eq!(code, 0, "{err}");
    assert!(out.starts_with("# resolved configuration (gen)\n"));
    assert!(out.contains("problem = chi2_cdf_2d\n"));
    assert!(out.contains("size = 64\n"));
    assert!(out.contains("seed = 7\n"));
    let text = fs::read_to_string(dir.path().join("d.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "in_0,in_1,y_0,g_0_0,g_0_1");
    assert_eq!(lines.count(), 64);
}

#[test]
fn defaults_are_printed() {
    let dir = tmp();
    let (code, out, _) = paramint(dir.path(), &["gen", "--problem", "cos_toy", "--size", "4", "--out", "d.csv"]);
    assert_eq!(code, 0);
    assert!(out.contains("seed = 0\n"), "{out}");
}

#[test]
fn usage_errors_exit_two() {
    let dir = tmp();
    let (code, _, err) = paramint(dir.path(), &["train", "--mode", "dml"]);
    assert_eq!(code, 2);
    assert!(err.contains("--problem"), "{err}");

    let (code, _, err) = paramint(dir.path(), &["train", "--problem", "cos_toy", "--mode", "xyz"]);
    assert_eq!(code, 2);
    assert!(err.contains("ann") && err.contains("dml"), "{err}");

    let (code, _, _) = paramint(dir.path(), &["gen", "--problem", "cos_toy", "--bogus", "1"]);
    assert_eq!(code, 2);

    let (code, _, err) = paramint(dir.path(), &["gen", "--problem", "nope", "--size", "4", "--out", "d.csv"]);
    assert_eq!(code, 2, "{err}");

    let (code, _, _) = paramint(dir.path(), &["frobnicate"]);
    assert_eq!(code, 2);
}

#[test]
fn runtime_errors_exit_one() {
    let dir = tmp();
    let (code, _, err) = paramint(dir.path(), &["eval", "--model", "missing.txt"]);
    assert_eq!(code, 1, "{err}");
    fs::write(dir.path().join("m.csv"), "problem,mode,J,mean_mse\n").unwrap();
    let (code, _, _) = paramint(dir.path(), &["plot", "--means", "m.csv", "--out", "p.svg"]);
    assert_eq!(code, 1);
    assert!(!dir.path().join("p.svg").exists());
}

#[test]
fn config_file_values_yield_to_flags() {
    let dir = tmp();
    fs::write(
        dir.path().join("run.cfg"),
        "# dataset settings\nproblem = cos_toy\nsize = 8\nseed = 3\nout = from_file.csv\n",
    )
    .unwrap();
    let (code, out, err) = paramint(dir.path(), &["gen", "--config", "run.cfg", "--seed", "11"]);
    assert_eq!(code, 0, "{err}");
    assert!(out.contains("seed = 11\n"));
    assert!(out.contains("size = 8\n"));
    assert!(dir.path().join("from_file.csv").exists());

    fs::write(dir.path().join("bad.cfg"), "problem = cos_toy\ncolour = red\n").unwrap();
    let (code, _, err) = paramint(dir.path(), &["gen", "--config", "bad.cfg"]);
    assert_eq!(code, 2);
    assert!(err.contains("colour"), "{err}");
}

#[test]
fn train_then_eval_round_trip() {
    let dir = tmp();
    let (code, _, err) = paramint(
        dir.path(),
        &[
            "train", "--problem", "lognormal_moment_1d", "--size", "256", "--epochs", "4", "--batch", "64",
            "--hidden", "8,8", "--out", "m.txt",
        ],
    );
    assert_eq!(code, 0, "{err}");
    let (code, out, err) = paramint(dir.path(), &["eval", "--model", "m.txt", "--test-size", "128", "--out", "e.csv"]);
    assert_eq!(code, 0, "{err}");
    assert!(out.contains("mse = "), "{out}");
    assert!(dir.path().join("e.csv").exists());
}

#[test]
fn proptest_command_reports_checks() {
    let dir = tmp();
    let (code, out, err) = paramint(
        dir.path(),
        &["proptest", "--problem", "cos_toy", "--points", "2", "--samples", "20000"],
    );
    assert_eq!(code, 0, "{out}{err}");
    assert!(out.contains("4 checks, 0 failed"), "{out}");
}

#[test]
fn outputs_are_byte_stable() {
    if let Err(e) = golden_check() {
        panic!("{e}");
    }
}
