//! Black-box tests of the command-line binary: output formats, exit codes,
//! config fallback, and run-to-run determinism.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_polarkit"))
}

fn write_file(dir: &Path, name: &str, content: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, content).unwrap();
    path
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

#[test]
fn analyze_kernel_verdict() {
    let dir = TempDir::new().unwrap();
    let kernel = write_file(dir.path(), "g2.txt", "10\n11\n");
    let out = bin().arg("analyze-kernel").arg("--kernel").arg(&kernel).output().unwrap();
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("invertible: yes"));
    assert!(text.contains("polarizing: yes, i=2, k=2"));

    let identity = write_file(dir.path(), "id.txt", "100\n010\n001\n");
    let out = bin().arg("analyze-kernel").arg("--kernel").arg(&identity).output().unwrap();
    assert!(out.status.success());
    assert!(stdout(&out).contains("polarizing: no"));
}

#[test]
fn singular_kernel_exits_with_math_code() {
    let dir = TempDir::new().unwrap();
    let kernel = write_file(dir.path(), "bad.txt", "011\n101\n110\n");
    let out = bin().arg("analyze-kernel").arg("--kernel").arg(&kernel).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_required_value_exits_with_usage_code() {
    let dir = TempDir::new().unwrap();
    let kernel = write_file(dir.path(), "g2.txt", "10\n11\n");
    let out = bin().arg("polarize").arg("--kernel").arg(&kernel).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn polarize_is_deterministic_and_tagged() {
    let dir = TempDir::new().unwrap();
    let kernel = write_file(dir.path(), "g2.txt", "10\n11\n");
    let run = |name: &str| {
        let csv = dir.path().join(name);
        let out = bin()
            .arg("polarize")
            .arg("--kernel")
            .arg(&kernel)
            .args(["--bec", "0.5", "--levels", "6"])
            .arg("--out-csv")
            .arg(&csv)
            .env("POLARKIT_THREADS", "2")
            .output()
            .unwrap();
        assert!(out.status.success());
        fs::read_to_string(csv).unwrap()
    };
    let first = run("a.csv");
    let second = run("b.csv");
    assert_eq!(first, second);
    assert!(first.starts_with("# polarkit-csv v1\n"));
}

#[test]
fn config_file_fills_unset_flags() {
    let dir = TempDir::new().unwrap();
    let kernel = write_file(dir.path(), "g2.txt", "10\n11\n");
    let config = write_file(
        dir.path(),
        "cfg.json",
        r#"{"polarize": {"bec": 0.5, "levels": 4}}"#,
    );
    let out = bin()
        .arg("polarize")
        .arg("--kernel")
        .arg(&kernel)
        .arg("--config")
        .arg(&config)
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(stdout(&out).contains("levels=4 leaves=16"));
}

#[test]
fn construct_encode_decode_roundtrip() {
    let dir = TempDir::new().unwrap();
    let kernel = write_file(dir.path(), "g2.txt", "10\n11\n");
    let code = dir.path().join("code.json");
    let out = bin()
        .arg("construct")
        .arg("--kernel")
        .arg(&kernel)
        .args(["--levels", "3", "--bec", "0.5", "-k", "4"])
        .arg("--out")
        .arg(&code)
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(stdout(&out).contains("N=8 K=4"));

    let out = bin()
        .arg("encode")
        .arg("--code")
        .arg(&code)
        .args(["--message", "1010"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let codeword = stdout(&out).trim().to_string();
    assert_eq!(codeword.len(), 8);

    let out = bin()
        .arg("decode")
        .arg("--code")
        .arg(&code)
        .args(["--received", &codeword])
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(stdout(&out).contains("message=1010"));
}

#[test]
fn simulate_reports_bound_check() {
    let dir = TempDir::new().unwrap();
    let kernel = write_file(dir.path(), "g2.txt", "10\n11\n");
    let code = dir.path().join("code.json");
    let out = bin()
        .arg("construct")
        .arg("--kernel")
        .arg(&kernel)
        .args(["--levels", "5", "--bec", "0.5", "-k", "8"])
        .arg("--out")
        .arg(&code)
        .output()
        .unwrap();
    assert!(out.status.success());

    let csv = dir.path().join("sim.csv");
    let out = bin()
        .arg("simulate")
        .arg("--code")
        .arg(&code)
        .args(["--bec", "0.5", "--trials", "200", "--seed", "9"])
        .arg("--out-csv")
        .arg(&csv)
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(stdout(&out).contains("fer_le_union_bound_plus_3se: pass"));
    let sim = fs::read_to_string(csv).unwrap();
    assert!(sim.starts_with("# polarkit-csv v1\n"));
    assert_eq!(sim.lines().count(), 202); // tag + header + one row per trial
}

#[test]
fn report_writes_artifacts() {
    let dir = TempDir::new().unwrap();
    let kernel = write_file(dir.path(), "g2.txt", "10\n11\n");
    let out_dir = dir.path().join("report");
    let out = bin()
        .arg("report")
        .arg("--kernel")
        .arg(&kernel)
        .args(["--bec", "0.5", "--levels", "4"])
        .arg("--out-dir")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(out_dir.join("kernel.txt").exists());
    assert!(out_dir.join("polarize.csv").exists());
    assert!(fs::read_to_string(out_dir.join("polarize.svg")).unwrap().contains("<svg"));
}
