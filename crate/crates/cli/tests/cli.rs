use std::collections::HashMap;
use std::f64::consts::{FRAC_PI_2, TAU};
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use critdelay::model::{build_heat_system, load_system, residual_at};
use critdelay::HeatParams;

fn models() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../models")
}

fn model(name: &str) -> String {
    models().join(name).to_str().unwrap().to_string()
}

fn critdelay(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_critdelay"))
        .args(args)
        .env_remove("CRITDELAY_THREADS")
        .output()
        .unwrap()
}

fn ok(args: &[&str]) -> Vec<u8> {
    let out = critdelay(args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out.stdout
}

fn rows(bytes: &[u8]) -> Vec<HashMap<String, String>> {
    let mut r = csv::Reader::from_reader(bytes);
    let header: Vec<String> = r.headers().unwrap().iter().map(String::from).collect();
    r.records()
        .map(|rec| {
            header
                .iter()
                .cloned()
                .zip(rec.unwrap().iter().map(String::from))
                .collect()
        })
        .collect()
}

fn num(row: &HashMap<String, String>, key: &str) -> f64 {
    row[key].parse().unwrap()
}

fn min_norm(rows: &[HashMap<String, String>]) -> &HashMap<String, String> {
    let norm = |r: &HashMap<String, String>| num(r, "h_1").hypot(num(r, "h_2"));
    rows.iter()
        .min_by(|a, b| norm(a).total_cmp(&norm(b)))
        .unwrap()
}

#[test]
fn sweep_example1_min_norm_row() {
    let out = rows(&ok(&[
        "sweep",
        &model("example1.json"),
        "--delta",
        "0.01",
        "--pmax",
        "2",
        "--hmax",
        "17",
    ]));
    let best = min_norm(&out);
    // the grid step bounds how close the nearest sample gets
    assert!((num(best, "h_1") - 2.1078).abs() < 5e-3);
    assert!((num(best, "h_2") - 1.9853).abs() < 5e-3);
}

#[test]
fn sweep_singular_example2_reports_modes_and_side_file() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("out.csv");
    let report = dir.path().join("report.json");
    ok(&[
        "sweep",
        &model("example2_eps0.json"),
        "--output",
        csv.to_str().unwrap(),
        "--report",
        report.to_str().unwrap(),
    ]);
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(report).unwrap()).unwrap();
    assert!(report["infinite_modes"].as_u64().unwrap() >= 1);
    assert_eq!(
        report["accepted"].as_u64().unwrap() as usize,
        rows(&std::fs::read(&csv).unwrap()).len()
    );
    let side = rows(&std::fs::read(dir.path().join("out.csv.infinite.csv")).unwrap());
    assert!(side
        .iter()
        .any(|r| (num(r, "omega") - 1.0).abs() < 1e-12
            && (num(r, "phi_1") + FRAC_PI_2).abs() < 1e-12));
}

#[test]
fn sweep_without_crossings_is_empty_and_succeeds() {
    // |−iω − 1 + 0.1e^{−iωh₁} + 0.1e^{−iωh₂}| ≥ √(1 + ω²) − 0.2
    let sys = load_system(models().join("no_crossing.json")).unwrap();
    for k in 0..2000 {
        let w = -50.0 + 0.05 * k as f64;
        let h = [0.37 * k as f64 % 17.0, 0.91 * k as f64 % 17.0];
        assert!(residual_at(&sys, w, &h).unwrap() >= 0.8 - 1e-12);
    }
    let out = critdelay(&["sweep", &model("no_crossing.json")]);
    assert!(out.status.success());
    assert!(rows(&out.stdout).is_empty());
    assert!(String::from_utf8_lossy(&out.stderr).contains("0 points accepted"));
}

#[test]
fn json_output_carries_rows_and_meta() {
    let out = ok(&[
        "sweep",
        &model("example1.json"),
        "--delta",
        "0.1",
        "--format",
        "json",
    ]);
    let doc: serde_json::Value = serde_json::from_slice(&out).unwrap();
    let n = doc["rows"].as_array().unwrap().len();
    assert!(n > 0);
    assert_eq!(doc["meta"]["accepted"].as_u64().unwrap() as usize, n);
    assert!(doc["meta"]["config_echo"]["residual_tol"].as_f64().unwrap() > 0.0);
}

#[test]
fn thread_env_fallback_matches_flag() {
    let args = ["sweep", &model("example1.json"), "--delta", "0.05"];
    let serial = ok(&[&args[..], &["--threads", "1"]].concat());
    let env = Command::new(env!("CARGO_BIN_EXE_critdelay"))
        .args(args)
        .env("CRITDELAY_THREADS", "3")
        .output()
        .unwrap();
    assert!(env.status.success());
    assert_eq!(serial, env.stdout);
}

#[test]
fn commensurate_single_delay_smallest_is_quarter_turn() {
    let out = rows(&ok(&[
        "commensurate",
        &model("single_delay.json"),
        "--direction",
        "1",
    ]));
    let first = &out[0];
    assert!((num(first, "h") - FRAC_PI_2).abs() < 1e-10);
    assert!(out.iter().all(|r| num(r, "h") >= num(first, "h")));
}

#[test]
fn commensurate_example1_rows_are_critical() {
    let sys = load_system(models().join("example1.json")).unwrap();
    let out = rows(&ok(&[
        "commensurate",
        &model("example1.json"),
        "--direction",
        "1",
        "1",
    ]));
    assert!(!out.is_empty());
    for r in &out {
        let h = num(r, "h");
        assert!((num(r, "h_1") - h).abs() < 1e-12 && (num(r, "h_2") - h).abs() < 1e-12);
        assert!(residual_at(&sys, num(r, "omega"), &[h, h]).unwrap() <= 1e-6 * 2.0);
    }
}

#[test]
fn commensurate_zero_multiple_is_input_error() {
    let out = critdelay(&[
        "commensurate",
        &model("example1.json"),
        "--direction",
        "0",
        "1",
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn missing_model_is_input_error() {
    let out = critdelay(&["sweep", "/nonexistent/model.json"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!out.stderr.is_empty());
}

fn write_candidates(dir: &Path, lines: &[(f64, f64, f64)]) -> PathBuf {
    let path = dir.join("candidates.csv");
    let mut text = String::from("omega,h_1,h_2\n");
    for (w, h1, h2) in lines {
        text.push_str(&format!("{w:e},{h1:e},{h2:e}\n"));
    }
    std::fs::write(&path, text).unwrap();
    path
}

#[test]
fn verify_marks_pass_fail_and_steady_state() {
    let sweep = rows(&ok(&[
        "sweep",
        &model("example1.json"),
        "--delta",
        "0.01",
        "--hmax",
        "17",
    ]));
    let best = min_norm(&sweep);
    let (w, h1, h2) = (num(best, "omega"), num(best, "h_1"), num(best, "h_2"));
    let dir = tempfile::tempdir().unwrap();
    let cand = write_candidates(
        dir.path(),
        &[(w, h1, h2), (w, h1 + 0.1, h2), (0.0, 1.0, 1.0)],
    );
    let out = rows(&ok(&[
        "verify",
        &model("example1.json"),
        cand.to_str().unwrap(),
    ]));
    let status: Vec<&str> = out.iter().map(|r| r["status"].as_str()).collect();
    assert_eq!(status, ["pass", "fail", "steady_state"]);
}

#[test]
fn verify_reports_malformed_rows_per_line() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.csv");
    std::fs::write(&path, "omega,h_1,h_2\n1.0,abc,1.0\n").unwrap();
    let out = critdelay(&["verify", &model("example1.json"), path.to_str().unwrap()]);
    assert!(out.status.success());
    assert_eq!(rows(&out.stdout)[0]["status"], "malformed");
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));
}

#[test]
fn gen_heat_writes_the_library_model() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("heat.json");
    ok(&["gen-heat", "--n", "8", "--output", path.to_str().unwrap()]);
    let written = load_system(&path).unwrap();
    assert_eq!(
        written,
        build_heat_system(8, &HeatParams::default()).unwrap()
    );
    assert_eq!((written.n(), written.m()), (8, 3));

    let quiet = dir.path().join("diffusion.json");
    ok(&[
        "gen-heat",
        "--n",
        "4",
        "--beta",
        "0",
        "--kappa",
        "0",
        "0",
        "0",
        "--output",
        quiet.to_str().unwrap(),
    ]);
    let sys = load_system(&quiet).unwrap();
    for k in 1..=3 {
        let a = sys.matrix(k);
        assert!((0..4).all(|i| (0..4).all(|j| a[(i, j)] == 0.0)));
    }
}

#[test]
fn gen_heat_rejects_tiny_grids() {
    assert_eq!(critdelay(&["gen-heat", "--n", "2"]).status.code(), Some(1));
}

#[test]
fn scalar_single_delay_row() {
    let out = rows(&ok(&["scalar", "--a", "0", "-1"]));
    let h = out
        .iter()
        .map(|r| num(r, "h_1"))
        .fold(f64::INFINITY, f64::min);
    assert!((h - FRAC_PI_2).abs() < 1e-12);
}

#[test]
fn scalar_example1_min_norm() {
    let out = rows(&ok(&[
        "scalar", "--a", "-1", "-1", "-0.5", "--delta", "0.001", "--hmax", "17",
    ]));
    let best = min_norm(&out);
    assert!((num(best, "h_1").hypot(num(best, "h_2")) - 2.896).abs() < 5e-3);
}

#[test]
fn scalar_matches_sweep_on_the_same_grid() {
    let delta = (TAU / 200.0).to_string();
    let closed = rows(&ok(&[
        "scalar", "--a", "-1", "-1", "-0.5", "--delta", &delta,
    ]));
    let pencil = rows(&ok(&["sweep", &model("example1.json"), "--delta", &delta]));
    assert_eq!(closed.len(), pencil.len());
    let key = |r: &HashMap<String, String>| {
        (
            ((num(r, "phi_1")) * 1e9).round() as i64,
            r["p_1"].clone(),
            r["p_2"].clone(),
            num(r, "omega") > 0.0,
        )
    };
    let index: HashMap<_, Vec<&HashMap<String, String>>> =
        closed.iter().fold(HashMap::new(), |mut m, r| {
            m.entry(key(r)).or_default().push(r);
            m
        });
    for r in &pencil {
        let best = index[&key(r)]
            .iter()
            .map(|q| {
                ["omega", "h_1", "h_2"]
                    .iter()
                    .map(|c| (num(r, c) - num(q, c)).abs())
                    .fold(0.0, f64::max)
            })
            .fold(f64::INFINITY, f64::min);
        assert!(best <= 1e-6, "row {r:?} off by {best}");
    }
}
