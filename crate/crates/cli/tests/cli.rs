use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_pluripot"));
    c.env_remove("PLURI_OUT").env_remove("PLURI_THREADS");
    c
}

fn write(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn closed_1d(dir: &Path, n: usize, a: f64) -> std::path::PathBuf {
    write(
        dir,
        "run.toml",
        &format!("[grid]\ndim = 1\nsizes = [{n}]\n\n[form]\nkind = \"closed\"\nA = [[{a}]]\n"),
    )
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn node_table(column: &str, values: impl IntoIterator<Item = f64>) -> String {
    let mut s = format!("node,{column}\n");
    for (i, v) in values.into_iter().enumerate() {
        s.push_str(&format!("{i},{v:e}\n"));
    }
    s
}

#[test]
fn solve_constant_density_gives_unit_constant() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = closed_1d(dir.path(), 32, 1.0);
    let out = dir.path().join("out");
    let o = bin().args(["solve", "--config"]).arg(&cfg).arg("--out").arg(&out).output().unwrap();
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let j = read_json(&out.join("solve.json"));
    assert!((j["c"].as_f64().unwrap() - 1.0).abs() < 1e-10, "{j}");
    assert_eq!(j["converged"], true);
    assert!(j.get("C_report").is_some() && j.get("seed").is_some());
    assert!(String::from_utf8_lossy(&o.stdout).starts_with("solve: converged"));
    let phi = std::fs::read_to_string(out.join("phi.csv")).unwrap();
    assert_eq!(phi.lines().count(), 33);
}

#[test]
fn volume_of_negative_class_is_zero_and_not_psef() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = closed_1d(dir.path(), 16, -1.0);
    let o = bin().args(["volume", "--config"]).arg(&cfg).env("PLURI_OUT", dir.path()).output().unwrap();
    assert_eq!(code(&o), 3);
    let j = read_json(&dir.path().join("volume.json"));
    assert_eq!(j["vol"].as_f64(), Some(0.0));
    assert_eq!(j["status"], "NotPsef");
}

#[test]
fn volume_of_identity_class() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "vol.toml",
        "[grid]\ndim = 2\nsizes = [8, 8]\n\n[form]\nkind = \"closed\"\nA = [[2.0, 0.5], [0.5, 1.0]]\n",
    );
    let o = bin().args(["volume", "--config"]).arg(&cfg).arg("--out").arg(dir.path()).output().unwrap();
    assert_eq!(code(&o), 0);
    let v = read_json(&dir.path().join("volume.json"))["vol"].as_f64().unwrap();
    assert!((v - 1.75).abs() < 1e-12, "{v}");
}

#[test]
fn verify_all_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin()
        .args(["verify", "--suite", "all", "--seed", "1"])
        .env("PLURI_OUT", dir.path())
        .output()
        .unwrap();
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let j = read_json(&dir.path().join("verify.json"));
    assert_eq!(j["passed"], true);
    assert_eq!(j["suites"].as_array().unwrap().len(), 6);
    assert!(j["failures"].as_array().unwrap().is_empty());
}

#[test]
fn verify_output_independent_of_threads() {
    let run = |threads: &str| {
        let dir = tempfile::tempdir().unwrap();
        let o = bin()
            .args(["verify", "--suite", "ma", "--seed", "4"])
            .env("PLURI_OUT", dir.path())
            .env("PLURI_THREADS", threads)
            .output()
            .unwrap();
        assert_eq!(code(&o), 0);
        std::fs::read(dir.path().join("verify.json")).unwrap()
    };
    assert_eq!(run("1"), run("4"));
}

#[test]
fn unknown_suite_and_bad_flags_are_invalid_arguments() {
    let o = bin().args(["verify", "--suite", "nope"]).output().unwrap();
    assert_eq!(code(&o), 4);
    let o = bin().args(["solve", "--frobnicate"]).output().unwrap();
    assert_eq!(code(&o), 4);
    let o = bin().args(["ma", "--config", "/nonexistent/run.toml"]).output().unwrap();
    assert_eq!(code(&o), 4);
    let o = bin().arg("--help").output().unwrap();
    assert_eq!(code(&o), 0);
}

#[test]
fn malformed_config_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.toml", "[grid]\ndim = 2\nsizes = [8]\n\n[form]\nkind = \"closed\"\nA = [[1.0]]\n");
    let o = bin().args(["ma", "--config"]).arg(&cfg).arg("--out").arg(dir.path()).output().unwrap();
    assert_eq!(code(&o), 4);
    let cfg = write(dir.path(), "typo.toml", "[grid]\ndim = 1\nsizes = [8]\nsize = 3\n\n[form]\nkind = \"closed\"\nA = [[1.0]]\n");
    let o = bin().args(["ma", "--config"]).arg(&cfg).arg("--out").arg(dir.path()).output().unwrap();
    assert_eq!(code(&o), 4);
}

#[test]
fn ma_and_npp_tables() {
    let dir = tempfile::tempdir().unwrap();
    let n = 16;
    let u: Vec<f64> = (0..n)
        .map(|i| 0.01 * (std::f64::consts::TAU * i as f64 / n as f64).cos())
        .collect();
    write(dir.path(), "u.csv", &node_table("u", u));
    let cfg = write(
        dir.path(),
        "run.toml",
        &format!(
            "[grid]\ndim = 1\nsizes = [{n}]\n\n[form]\nkind = \"closed\"\nA = [[1.0]]\n\n[run]\npotential_file = \"u.csv\"\npotentials = [\"u.csv\"]\n"
        ),
    );
    let o = bin().args(["ma", "--config"]).arg(&cfg).arg("--out").arg(dir.path()).output().unwrap();
    assert_eq!(code(&o), 0);
    let mass = read_json(&dir.path().join("ma.json"))["total_mass"].as_f64().unwrap();
    assert!((mass - 1.0).abs() < 1e-12);
    let o = bin().args(["npp", "--config"]).arg(&cfg).arg("--out").arg(dir.path()).output().unwrap();
    assert_eq!(code(&o), 0);
    assert_eq!(
        std::fs::read(dir.path().join("ma.csv")).unwrap(),
        std::fs::read(dir.path().join("npp.csv")).unwrap()
    );
}

#[test]
fn envelope_of_constant_obstacle() {
    let dir = tempfile::tempdir().unwrap();
    let ob = write(dir.path(), "f.csv", &node_table("f", vec![0.25; 12]));
    let cfg = closed_1d(dir.path(), 12, 1.0);
    let o = bin()
        .args(["envelope", "--config"])
        .arg(&cfg)
        .arg("--obstacle")
        .arg(&ob)
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(code(&o), 0);
    let j = read_json(&dir.path().join("envelope.json"));
    assert_eq!(j["status"], "Converged");
    let csv = std::fs::read_to_string(dir.path().join("envelope.csv")).unwrap();
    assert!(csv.lines().skip(1).all(|l| l.ends_with(",0.25")), "{csv}");
}

#[test]
fn envelope_under_negative_form_is_infeasible() {
    let dir = tempfile::tempdir().unwrap();
    let ob = write(dir.path(), "f.csv", &node_table("f", vec![0.0; 12]));
    let cfg = closed_1d(dir.path(), 12, -1.0);
    let o = bin()
        .args(["envelope", "--config"])
        .arg(&cfg)
        .arg("--obstacle")
        .arg(&ob)
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(code(&o), 3);
}

#[test]
fn delta_is_seeded_and_vanishes_for_closed_forms() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = closed_1d(dir.path(), 32, 1.0);
    let run = |seed: &str, out: &Path| {
        let o = bin()
            .args(["delta", "--samples", "5", "--seed", seed, "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(out)
            .output()
            .unwrap();
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        std::fs::read(out.join("delta.json")).unwrap()
    };
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let first = run("3", &a);
    assert_eq!(first, run("3", &b));
    let j: Value = serde_json::from_slice(&first).unwrap();
    assert_eq!(j["seed"], 3);
    assert!(j["estimate"].as_f64().unwrap() < 1e-12);
}
