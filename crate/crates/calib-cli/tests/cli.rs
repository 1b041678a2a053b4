//! End-to-end tests of the `calib` binary: exit codes, file round trips, and
//! calibrate/apply pipelines.

mod common;

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use calib_cli::io;
use calib_core::estimate::apply_transform;
use calib_core::{DataMatrix, Matrix};

fn calib(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_calib"))
        .args(args)
        .env_remove("CALIB_SEED")
        .output()
        .unwrap()
}

fn run_ok(args: &[&str]) {
    let out = calib(args);
    assert!(
        out.status.success(),
        "exit {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn run_err(args: &[&str], want_code: i32) -> String {
    let out = calib(args);
    assert_eq!(
        out.status.code(),
        Some(want_code),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write_pair(dir: &Path, n: usize, sigma: f64, seed: u64) -> (PathBuf, PathBuf) {
    let samples = common::sensor_samples(n, sigma, seed);
    let x = dir.join("x.csv");
    let y = dir.join("y.csv");
    io::write_samples(&x, &samples[0]).unwrap();
    io::write_samples(&y, &samples[1]).unwrap();
    (x, y)
}

#[test]
fn usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out.json");

    // unknown flag (clap) and missing input file both count as usage errors
    run_err(&["simulate", "--bogus"], 2);
    run_err(
        &[
            "calibrate", "--x", "/nonexistent/x.csv", "--y", "/nonexistent/y.csv",
            "--out", path_str(&out),
        ],
        2,
    );

    // misaligned pair
    let (x, _) = write_pair(dir.path(), 20, 0.1, 1);
    let y_short = dir.path().join("short.csv");
    let samples = common::sensor_samples(15, 0.1, 2);
    io::write_samples(&y_short, &samples[1]).unwrap();
    let err = run_err(
        &[
            "calibrate", "--x", path_str(&x), "--y", path_str(&y_short),
            "--out", path_str(&out),
        ],
        2,
    );
    assert!(err.contains("aligned"), "{err}");

    // denoise rank on a non-hybrid method
    run_err(
        &[
            "calibrate", "--x", path_str(&x), "--y", path_str(&x),
            "--method", "least-squares", "--denoise-rank", "2",
            "--out", path_str(&out),
        ],
        2,
    );

    // bad sigma grid
    run_err(
        &["simulate", "--sigmas", "5..1", "--out", path_str(&out)],
        2,
    );
}

#[test]
fn singular_input_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let x = dir.path().join("x.csv");
    let y = dir.path().join("y.csv");
    // constant samples make every Gram matrix singular
    let flat = DataMatrix::for_apply(Matrix::from_fn(2, 10, |i, _| i as f64 + 1.0));
    io::write_samples(&x, &flat).unwrap();
    io::write_samples(&y, &flat).unwrap();
    run_err(
        &[
            "calibrate", "--x", path_str(&x), "--y", path_str(&y),
            "--method", "least-squares", "--out", path_str(&dir.path().join("t.json")),
        ],
        3,
    );
}

#[test]
fn calibrate_recovers_noiseless_map() {
    let dir = tempfile::tempdir().unwrap();
    let (x, y) = write_pair(dir.path(), 40, 0.0, 7);
    let truth = &common::sensor_maps()[1];

    for method in [
        "gleser-watson",
        "gleser-watson-denoised",
        "least-squares",
        "hybrid",
    ] {
        let out = dir.path().join(format!("{method}.json"));
        run_ok(&[
            "calibrate", "--x", path_str(&x), "--y", path_str(&y),
            "--method", method, "--out", path_str(&out),
        ]);
        let got = io::read_transform(&out).unwrap();
        let da = got.a().sub(truth.a()).max_abs();
        let db = got
            .b()
            .iter()
            .zip(truth.b())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(da <= 1e-8 && db <= 1e-8, "{method}: da {da:e}, db {db:e}");
    }
}

#[test]
fn full_rank_hybrid_matches_least_squares_output() {
    let dir = tempfile::tempdir().unwrap();
    let (x, y) = write_pair(dir.path(), 30, 0.2, 11);
    let ls = dir.path().join("ls.json");
    let hy = dir.path().join("hy.json");
    run_ok(&[
        "calibrate", "--x", path_str(&x), "--y", path_str(&y),
        "--method", "least-squares", "--out", path_str(&ls),
    ]);
    run_ok(&[
        "calibrate", "--x", path_str(&x), "--y", path_str(&y),
        "--method", "hybrid", "--denoise-rank", "30", "--out", path_str(&hy),
    ]);
    let tls = io::read_transform(&ls).unwrap();
    let thy = io::read_transform(&hy).unwrap();
    assert!(tls.a().sub(thy.a()).max_abs() <= 1e-9);
}

#[test]
fn apply_roundtrips() {
    let dir = tempfile::tempdir().unwrap();
    let data = common::base_signal(25);
    let input = dir.path().join("in.csv");
    io::write_samples(&input, &data).unwrap();

    // identity leaves the samples byte-identical
    let ident = dir.path().join("ident.json");
    io::write_transform(&ident, &calib_core::AffineTransform::identity(2), None, None).unwrap();
    let out1 = dir.path().join("out1.csv");
    run_ok(&[
        "apply", "--transform", path_str(&ident), "--data", path_str(&input),
        "--out", path_str(&out1),
    ]);
    assert_eq!(
        std::fs::read(&input).unwrap(),
        std::fs::read(&out1).unwrap()
    );

    // a map followed by its inverse recovers the input
    let t = &common::sensor_maps()[3];
    let fwd = dir.path().join("fwd.json");
    let bwd = dir.path().join("bwd.json");
    io::write_transform(&fwd, t, None, None).unwrap();
    io::write_transform(&bwd, &t.inverse().unwrap(), None, None).unwrap();
    let mid = dir.path().join("mid.csv");
    let back = dir.path().join("back.csv");
    run_ok(&[
        "apply", "--transform", path_str(&fwd), "--data", path_str(&input),
        "--out", path_str(&mid),
    ]);
    run_ok(&[
        "apply", "--transform", path_str(&bwd), "--data", path_str(&mid),
        "--out", path_str(&back),
    ]);
    let recovered = io::read_samples(&back).unwrap();
    assert!(recovered.values().sub(data.values()).max_abs() <= 1e-8);

    // dimension mismatch is a usage error
    let one = dir.path().join("one.csv");
    io::write_samples(
        &one,
        &DataMatrix::for_apply(Matrix::from_fn(1, 5, |_, j| j as f64)),
    )
    .unwrap();
    run_err(
        &[
            "apply", "--transform", path_str(&fwd), "--data", path_str(&one),
            "--out", path_str(&dir.path().join("no.csv")),
        ],
        2,
    );
}

#[test]
fn calibrate_then_apply_matches_target() {
    let dir = tempfile::tempdir().unwrap();
    let (x, y) = write_pair(dir.path(), 50, 0.0, 13);
    let t = dir.path().join("t.json");
    run_ok(&[
        "calibrate", "--x", path_str(&x), "--y", path_str(&y),
        "--method", "least-squares", "--out", path_str(&t),
    ]);
    let mapped = dir.path().join("mapped.csv");
    run_ok(&[
        "apply", "--transform", path_str(&t), "--data", path_str(&x),
        "--out", path_str(&mapped),
    ]);
    let got = io::read_samples(&mapped).unwrap();
    let want = io::read_samples(&y).unwrap();
    assert!(got.values().sub(want.values()).max_abs() <= 1e-8);
}

#[test]
fn simulate_zero_sigma_reports_zero_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("report.csv");
    run_ok(&[
        "simulate", "--runs", "3", "--samples", "50", "--sigmas", "0",
        "--seed", "1", "--out", path_str(&out),
    ]);
    let text = std::fs::read_to_string(&out).unwrap();
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 4);
    for row in rows {
        let fields: Vec<&str> = row.split(',').collect();
        let mean_ex: f64 = fields[2].parse().unwrap();
        let mean_ey: f64 = fields[3].parse().unwrap();
        assert!(mean_ex <= 1e-8 && mean_ey <= 1e-7, "{row}");
    }
}

#[test]
fn simulate_grid_shape() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("report.csv");
    run_ok(&[
        "simulate", "--runs", "2", "--samples", "40", "--sigmas", "1..15",
        "--seed", "1", "--out", path_str(&out),
    ]);
    let text = std::fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().count(), 1 + 15 * 4);
}

#[test]
fn board_commands_write_expected_files() {
    let dir = tempfile::tempdir().unwrap();
    let board = dir.path().join("board.csv");
    std::fs::write(&board, common::board_csv(25, 0.01, 42)).unwrap();

    let eval_dir = dir.path().join("eval");
    run_ok(&[
        "evaluate-board", "--input", path_str(&board),
        "--methods", "least-squares,hybrid", "--out-dir", path_str(&eval_dir),
    ]);
    for name in [
        "pairwise-least-squares.csv",
        "pairwise-hybrid.csv",
        "pairwise-feature-wise-normalized.csv",
        "summary.csv",
        "summary.json",
    ] {
        assert!(eval_dir.join(name).exists(), "missing {name}");
    }
    let summary = std::fs::read_to_string(eval_dir.join("summary.csv")).unwrap();
    assert!(summary.starts_with("method,sensor_1,sensor_2"));
    assert_eq!(summary.lines().count(), 1 + 3);

    let norm_dir = dir.path().join("norm");
    run_ok(&[
        "normalize", "--input", path_str(&board), "--out-dir", path_str(&norm_dir),
    ]);
    assert!(norm_dir.join("bounds.json").exists());
    for id in 1..=8 {
        let f = norm_dir.join(format!("sensor-{id}.csv"));
        let s = io::read_samples(&f).unwrap();
        assert_eq!((s.dim(), s.n_samples()), (2, 25));
        let (min, max) = (0..2)
            .flat_map(|i| (0..25).map(move |j| (i, j)))
            .map(|(i, j)| s.values()[(i, j)])
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                (lo.min(v), hi.max(v))
            });
        assert!(min >= 0.0 && max <= 1.0);
    }
}

#[test]
fn seed_env_fallback() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    let common_args = |out: &Path| {
        vec![
            "simulate".to_string(), "--runs".into(), "2".into(),
            "--samples".into(), "40".into(), "--sigmas".into(), "1".into(),
            "--out".into(), out.to_str().unwrap().to_string(),
        ]
    };
    let out1 = Command::new(env!("CARGO_BIN_EXE_calib"))
        .args(common_args(&a))
        .env("CALIB_SEED", "9")
        .output()
        .unwrap();
    assert!(out1.status.success());
    let out2 = Command::new(env!("CARGO_BIN_EXE_calib"))
        .args(common_args(&b))
        .arg("--seed")
        .arg("9")
        .env_remove("CALIB_SEED")
        .output()
        .unwrap();
    assert!(out2.status.success());
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());

    let out3 = Command::new(env!("CARGO_BIN_EXE_calib"))
        .args(common_args(&a))
        .env("CALIB_SEED", "not-a-number")
        .output()
        .unwrap();
    assert_eq!(out3.status.code(), Some(2));
}

// keeps the fixture helpers exercised even when only this target runs
#[test]
fn fixture_cycles_reconstruct() {
    let csv = common::board_csv(4, 0.0, 5);
    let maps = common::sensor_maps();
    assert_eq!(csv.lines().count(), 1 + 8 * 4 * 10);
    let base = common::base_signal(4);
    let clean = apply_transform(&maps[2], &base).unwrap();
    let noisy = &common::sensor_samples(4, 0.0, 5)[2];
    assert!(clean.values().sub(noisy.values()).max_abs() == 0.0);
}
