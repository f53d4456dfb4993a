use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use nalgebra::DMatrix;
use simapprox::evaluation::negativity_summary;
use simapprox::io::{read_matrix, write_matrix, MatrixFormat};

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_simapprox"));
    cmd.env_remove("SIMAPPROX_SEED");
    cmd
}

fn run(dir: &Path, args: &[&str]) -> Output {
    bin().current_dir(dir).args(args).output().expect("spawn simapprox")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = run(dir, args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn code(dir: &Path, args: &[&str]) -> i32 {
    run(dir, args).status.code().expect("exit code")
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path).unwrap().lines().map(|l| l.split(',').map(str::to_string).collect()).collect()
}

fn column(path: &Path, name: &str) -> Vec<f64> {
    let rows = csv_rows(path);
    let idx = rows[0].iter().position(|h| h == name).unwrap();
    rows[1..].iter().map(|r| r[idx].parse().unwrap()).collect()
}

fn numeric_rows(path: &Path) -> Vec<Vec<f64>> {
    csv_rows(path).iter().map(|r| r.iter().map(|v| v.parse().unwrap()).collect()).collect()
}

fn write_identity(dir: &Path, n: usize) -> PathBuf {
    let path = dir.join("id.csv");
    write_matrix(&path, &DMatrix::identity(n, n), MatrixFormat::Csv).unwrap();
    path
}

fn write_rank3(dir: &Path) -> PathBuf {
    let a = DMatrix::from_fn(30, 3, |i, j| ((i * 7 + j * 13) % 11) as f64 - 5.0 + 0.1 * j as f64);
    let d = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![2.0, 1.0, -1.5]));
    let k = &a * d * a.transpose();
    let k = (&k + k.transpose()) * 0.5;
    let path = dir.join("rank3.csv");
    write_matrix(&path, &k, MatrixFormat::Csv).unwrap();
    path
}

#[test]
fn gen_psd_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["gen", "psd", "--n", "100", "--seed", "1", "--out", "a.csv"]);
    ok(d, &["gen", "psd", "--n", "100", "--seed", "1", "--out", "b.csv"]);
    assert_eq!(fs::read(d.join("a.csv")).unwrap(), fs::read(d.join("b.csv")).unwrap());
    assert_eq!(read_matrix(&d.join("a.csv")).unwrap().shape(), (100, 100));
}

#[test]
fn gen_planted_profile_negativity() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let stdout =
        ok(d, &["gen", "planted", "--n", "50", "--profile", "45:0.5..1,5:-0.1..-0.001", "--seed", "2", "--out", "p.bin", "--analyze"]);
    assert!(stdout.contains("negative_count=5"));
    let k = read_matrix(&d.join("p.bin")).unwrap();
    assert_eq!(negativity_summary(&k).unwrap().0, 5);
    assert_eq!(code(d, &["gen", "planted", "--n", "40", "--profile", "45:0.5..1", "--out", "q.bin"]), 2);
}

#[test]
fn csv_and_binary_agree() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    for kind in ["psd", "planted", "expdist"] {
        ok(d, &["gen", kind, "--n", "40", "--seed", "5", "--out", "m.csv"]);
        ok(d, &["gen", kind, "--n", "40", "--seed", "5", "--out", "m.bin"]);
        assert_eq!(read_matrix(&d.join("m.csv")).unwrap(), read_matrix(&d.join("m.bin")).unwrap());
    }
}

#[test]
fn noisy_matrix_is_asymmetric() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let stdout = ok(d, &["gen", "expdist", "--n", "30", "--noise", "0.01", "--out", "x.bin", "--analyze"]);
    assert!(stdout.contains("symmetric=false"));
    let report = ok(d, &["approx", "--matrix", "x.bin", "--method", "skeleton-nested", "--s1", "30"]);
    let err: f64 = report.lines().nth(1).unwrap().split(',').nth(5).unwrap().parse().unwrap();
    assert!(err < 1e-6);
}

#[test]
fn spectrum_command() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write_identity(d, 8);
    ok(d, &["spectrum", "--matrix", "id.csv", "--out", "s.csv"]);
    let values = column(&d.join("s.csv"), "eigenvalue");
    assert_eq!(values.len(), 8);
    assert!(values.iter().all(|v| (v - 1.0).abs() < 1e-12));
    assert_eq!(column(&d.join("s.csv"), "rank"), (1..=8).map(|r| r as f64).collect::<Vec<_>>());

    ok(d, &["gen", "planted", "--eigenvalues", "3,-2,0.5,1", "--seed", "4", "--out", "p.csv"]);
    ok(d, &["spectrum", "--matrix", "p.csv", "--from", "2", "--to", "4", "--out", "p2.csv"]);
    let values = column(&d.join("p2.csv"), "eigenvalue");
    for (a, b) in values.iter().zip([-2.0, 1.0, 0.5]) {
        assert!((a - b).abs() < 1e-10);
    }
    assert_eq!(code(d, &["spectrum", "--matrix", "p.csv", "--from", "3", "--to", "2", "--out", "x.csv"]), 2);
}

#[test]
fn histogram_command() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write_identity(d, 12);
    ok(d, &["histogram", "--matrix", "id.csv", "--sample", "12", "--trials", "1", "--out", "h.csv"]);
    let values = column(&d.join("h.csv"), "eigenvalue");
    assert_eq!(values.len(), 12);
    assert!(values.iter().all(|v| (v - 1.0).abs() < 1e-12));
    assert!(d.join("h.bins.csv").exists());

    ok(d, &["gen", "psd", "--n", "40", "--seed", "3", "--out", "psd.bin"]);
    ok(d, &["histogram", "--matrix", "psd.bin", "--sample", "10", "--trials", "7", "--bins", "5", "--out", "g.csv", "--bins-out", "gb.csv"]);
    let values = column(&d.join("g.csv"), "eigenvalue");
    assert_eq!(values.len(), 70);
    let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    assert!(values.iter().all(|&v| v >= -1e-8 * scale));
    assert_eq!(column(&d.join("gb.csv"), "count").iter().sum::<f64>(), 70.0);
    assert_eq!(code(d, &["histogram", "--matrix", "psd.bin", "--sample", "41", "--out", "z.csv"]), 2);
}

#[test]
fn approx_command() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write_rank3(d);
    ok(d, &["approx", "--matrix", "rank3.csv", "--method", "sicur", "--s1", "3", "--seed", "1", "--report", "r.csv"]);
    assert!(column(&d.join("r.csv"), "rel_fro_error")[0] < 1e-6);
    assert_eq!(csv_rows(&d.join("r.csv"))[0].join(","), "method,s1,s2,alpha,seed,rel_fro_error,oracle_calls,wall_time");

    ok(d, &["approx", "--matrix", "rank3.csv", "--method", "optimal", "--s1", "30", "--report", "o.csv"]);
    assert!(column(&d.join("o.csv"), "rel_fro_error")[0] < 1e-12);

    let args = ["approx", "--matrix", "rank3.csv", "--method", "sms", "--s1", "4", "--seed", "7", "--factor-out", "f.json"];
    let first = ok(d, &args);
    let factor = fs::read(d.join("f.json")).unwrap();
    assert_eq!(first, ok(d, &args));
    assert_eq!(factor, fs::read(d.join("f.json")).unwrap());
    let timed = ok(d, &["approx", "--matrix", "rank3.csv", "--method", "sms", "--s1", "4", "--timing"]);
    assert!(!timed.trim_end().ends_with(','));
}

#[test]
fn approx_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write_rank3(d);
    assert_eq!(code(d, &["approx", "--matrix", "missing.csv", "--method", "sms", "--s1", "3"]), 3);
    assert_eq!(code(d, &["approx", "--matrix", "rank3.csv", "--method", "bogus", "--s1", "3"]), 2);
    assert_eq!(code(d, &["approx", "--matrix", "rank3.csv", "--method", "sms", "--s1", "5", "--s2", "3"]), 2);
    assert_eq!(code(d, &["approx", "--matrix", "rank3.csv", "--method", "sicur", "--s1", "3", "--alpha", "2"]), 2);
    assert_eq!(code(d, &["approx", "--matrix", "rank3.csv", "--method", "nystrom", "--s1", "0"]), 2);
    assert_eq!(code(d, &["approx", "--matrix", "rank3.csv"]), 2);
    fs::write(d.join("bad.csv"), "2\n1,2\n").unwrap();
    assert_eq!(code(d, &["approx", "--matrix", "bad.csv", "--method", "sms", "--s1", "1"]), 3);

    let out = run(d, &["approx", "--matrix", "rank3.csv", "--method", "nystrom", "--strict-psd", "--s1", "10"]);
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).contains("lambda_min"));
}

#[test]
fn sweep_command() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write_rank3(d);
    ok(d, &["sweep", "--matrix", "rank3.csv", "--methods", "skeleton", "--fractions", "1.0", "--trials", "2", "--out", "s.csv"]);
    assert!(column(&d.join("s.csv"), "mean_err")[0] < 1e-6);
    assert_eq!(
        csv_rows(&d.join("s.csv"))[0].join(","),
        "method,fraction,s1,s2,mean_err,std_err,mean_calls"
    );

    ok(d, &["gen", "psd", "--n", "60", "--seed", "2", "--out", "psd.bin"]);
    let args = ["sweep", "--matrix", "psd.bin", "--methods", "nystrom,sms", "--fractions", "0.1,0.3,0.5", "--trials", "3", "--out", "p.csv"];
    ok(d, &args);
    let errs = column(&d.join("p.csv"), "mean_err");
    assert_eq!(errs.len(), 6);
    for i in 0..3 {
        assert!((errs[i] - errs[i + 3]).abs() <= 1e-12);
    }
    let first = fs::read(d.join("p.csv")).unwrap();
    ok(d, &args);
    assert_eq!(first, fs::read(d.join("p.csv")).unwrap());
    assert_eq!(code(d, &["sweep", "--matrix", "psd.bin", "--methods", "nystrom", "--fractions", "0.001", "--out", "x.csv"]), 2);
}

#[test]
fn embed_identity_rows_are_orthonormal() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write_identity(d, 6);
    ok(d, &["embed", "--matrix", "id.csv", "--method", "nystrom", "--s1", "6", "--out", "e.csv", "--landmarks", "l.json"]);
    let rows = numeric_rows(&d.join("e.csv"));
    let e = DMatrix::from_fn(6, 6, |i, j| rows[i][j + 1]);
    assert!((&e * e.transpose() - DMatrix::identity(6, 6)).amax() < 1e-12);
}

#[test]
fn embed_and_extend_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["gen", "planted", "--n", "40", "--profile", "30:0.5..1,10:-0.8..-0.2", "--seed", "1", "--out", "k.csv"]);
    let k = read_matrix(&d.join("k.csv")).unwrap();
    for method in ["sms", "sms-rescaled", "sicur", "skeleton-nested", "stacur-s"] {
        ok(d, &["embed", "--matrix", "k.csv", "--method", method, "--s1", "8", "--seed", "3", "--out", "e.csv", "--landmarks", "l.json"]);
        let landmarks: serde_json::Value = serde_json::from_str(&fs::read_to_string(d.join("l.json")).unwrap()).unwrap();
        let idx: Vec<usize> = landmarks["landmarks"].as_array().unwrap().iter().map(|v| v.as_u64().unwrap() as usize).collect();
        let mut sims = String::new();
        for i in 0..40 {
            let row: Vec<String> = idx.iter().map(|&l| format!("{:.17e}", k[(i, l)])).collect();
            sims.push_str(&format!("{i},{}\n", row.join(",")));
        }
        fs::write(d.join("sims.csv"), sims).unwrap();
        ok(d, &["extend", "--landmarks", "l.json", "--similarities", "sims.csv", "--indexed", "--out", "x.csv"]);
        let embedded = numeric_rows(&d.join("e.csv"));
        let extended = numeric_rows(&d.join("x.csv"));
        assert_eq!(embedded.len(), extended.len());
        for (a, b) in embedded.iter().zip(&extended) {
            for (x, y) in a.iter().zip(b) {
                assert!((x - y).abs() <= 1e-12 * x.abs().max(1.0), "{method}: {x} vs {y}");
            }
        }
    }
}

#[test]
fn embedding_gram_matches_factor() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["gen", "planted", "--n", "30", "--profile", "24:0.5..1,6:-0.6..-0.1", "--seed", "8", "--out", "k.bin"]);
    ok(d, &["embed", "--matrix", "k.bin", "--method", "sms", "--s1", "6", "--seed", "2", "--out", "e.csv", "--landmarks", "l.json"]);
    ok(d, &["approx", "--matrix", "k.bin", "--method", "sms", "--s1", "6", "--seed", "2", "--factor-out", "f.json"]);
    let rows = numeric_rows(&d.join("e.csv"));
    let dim = rows[0].len() - 1;
    let e = DMatrix::from_fn(30, dim, |i, j| rows[i][j + 1]);
    let factor: serde_json::Value = serde_json::from_str(&fs::read_to_string(d.join("f.json")).unwrap()).unwrap();
    let z: Vec<Vec<f64>> = serde_json::from_value(factor["z"].clone()).unwrap();
    let z = DMatrix::from_fn(30, dim, |i, j| z[i][j]);
    assert!((&e * e.transpose() - &z * z.transpose()).amax() < 1e-12);
}

#[test]
fn embed_and_extend_errors() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["gen", "planted", "--n", "20", "--profile", "10:0.5..1,10:-1..-0.5", "--seed", "1", "--out", "k.csv"]);
    let out = run(d, &["embed", "--matrix", "k.csv", "--method", "nystrom", "--s1", "10", "--out", "e.csv", "--landmarks", "l.json"]);
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).contains("sms"));

    ok(d, &["embed", "--matrix", "k.csv", "--method", "sms", "--s1", "4", "--out", "e.csv", "--landmarks", "l.json"]);
    fs::write(d.join("empty.csv"), "").unwrap();
    ok(d, &["extend", "--landmarks", "l.json", "--similarities", "empty.csv", "--out", "x.csv"]);
    assert_eq!(fs::read_to_string(d.join("x.csv")).unwrap(), "");
    fs::write(d.join("short.csv"), "1,2,3\n").unwrap();
    assert_eq!(code(d, &["extend", "--landmarks", "l.json", "--similarities", "short.csv", "--out", "x.csv"]), 2);
    assert_eq!(code(d, &["extend", "--landmarks", "nope.json", "--similarities", "short.csv", "--out", "x.csv"]), 3);
}

#[test]
fn config_and_env_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write_rank3(d);
    fs::write(d.join("c.json"), r#"{"method": "sms", "s1": 4, "seed": 11, "matrix": "rank3.csv"}"#).unwrap();
    let from_config = ok(d, &["--config", "c.json", "approx"]);
    let explicit = ok(d, &["approx", "--matrix", "rank3.csv", "--method", "sms", "--s1", "4", "--seed", "11"]);
    assert_eq!(from_config, explicit);
    let overridden = ok(d, &["--config", "c.json", "approx", "--seed", "12"]);
    assert!(overridden.contains(",12,"));

    let out = bin()
        .current_dir(d)
        .env("SIMAPPROX_SEED", "12")
        .args(["approx", "--matrix", "rank3.csv", "--method", "sms", "--s1", "4"])
        .output()
        .unwrap();
    assert_eq!(String::from_utf8(out.stdout).unwrap(), overridden);
    fs::write(d.join("bad.json"), "[1, 2]").unwrap();
    assert_eq!(code(d, &["--config", "bad.json", "approx"]), 2);
}
