use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn run(dir: &Path, config: &str, extra: &[&str]) -> Output {
    let path = dir.join("run.toml");
    fs::write(&path, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_lortorus"))
        .arg("--config")
        .arg(&path)
        .arg("--out")
        .arg(dir.join("out"))
        .args(extra)
        .output()
        .unwrap()
}

fn results(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("out/results.json")).unwrap()).unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

#[test]
fn flat_selftest_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        dir.path(),
        "experiment = \"selftest\"\n[profile]\nkind = \"constant\"\nc = 1.0\n",
        &[],
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let r = results(dir.path());
    assert_eq!(r["status"], "pass");
    assert!(r["checks"].as_array().unwrap().len() >= 4);
}

#[test]
fn selftest_runs_named_cases() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        dir.path(),
        "experiment = \"selftest\"\n[selftest]\ncases = [\"class-a\"]\n",
        &[],
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let names: Vec<String> = results(dir.path())["checks"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| c["name"].as_str().unwrap().to_string())
        .collect();
    assert!(names.iter().any(|n| n == "class-a"), "{names:?}");
}

#[test]
fn unknown_key_is_a_located_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        dir.path(),
        "experiment = \"classify\"\n\n[classify]\ntolerence = 1e-6\n",
        &[],
    );
    assert_eq!(code(&out), 2);
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("run.toml:4:"), "{err}");
    assert!(err.contains("tolerence"), "{err}");
}

#[test]
fn missing_experiment_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&run(dir.path(), "", &[])), 2);
}

#[test]
fn classify_reports_class_a() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), "experiment = \"classify\"\n", &[]);
    assert_eq!(code(&out), 0);
    let r = results(dir.path());
    assert_eq!(r["values"]["class_a"], true);
    assert!(r["values"]["m_plus"].as_f64().unwrap() > 0.0);
}

#[test]
fn command_line_overrides_the_config() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        dir.path(),
        "experiment = \"selftest\"\nseed = 1\n",
        &["--experiment", "classify", "--seed", "7"],
    );
    assert_eq!(code(&out), 0);
    let r = results(dir.path());
    assert_eq!(r["experiment"], "classify");
    assert_eq!(r["seed"], 7);
}

#[test]
fn closed_geodesics_table_has_one_row_per_class() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), "experiment = \"closed-geodesics\"\n", &[]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("out/closed-geodesics.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "k_t,k_x,psi0,length,closure_residual,maximality_gap");
    assert_eq!(lines.len(), 6);
    assert!(lines[1].starts_with("1,0,"));
    assert!(dir.path().join("out/geodesics.svg").exists());
}

#[test]
fn class_outside_the_cone_is_a_domain_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        dir.path(),
        "experiment = \"closed-geodesics\"\n[closed_geodesics]\nclasses = [[1, 5]]\n",
        &[],
    );
    assert_eq!(code(&out), 2);
    assert_eq!(results(dir.path())["status"], "error");
}

#[test]
fn reruns_are_byte_identical() {
    let config = "experiment = \"distance\"\n[distance]\nrandom_pairs = 4\n";
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert_eq!(code(&run(a.path(), config, &[])), 0);
    assert_eq!(code(&run(b.path(), config, &["--threads", "2"])), 0);
    for name in ["distance.csv", "geodesics.svg"] {
        let x = fs::read(a.path().join("out").join(name)).unwrap();
        let y = fs::read(b.path().join("out").join(name)).unwrap();
        assert_eq!(x, y, "{name}");
    }
    let (mut ra, mut rb) = (results(a.path()), results(b.path()));
    // The output directory differs between the runs.
    ra["config"]["out"] = Value::Null;
    rb["config"]["out"] = Value::Null;
    assert_eq!(ra, rb);
    let rows = fs::read_to_string(a.path().join("out/distance.csv")).unwrap();
    assert_eq!(rows.lines().count(), 1 + 1 + 4);
}

#[test]
fn small_displacement_map() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        dir.path(),
        "experiment = \"displacement-map\"\n[displacement_map]\nn_t = 2\nn_x = 8\n",
        &[],
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stdout));
    let csv = fs::read_to_string(dir.path().join("out/displacement-map.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 16);
    assert!(dir.path().join("out/displacement.svg").exists());
}

#[test]
fn small_busemann_run() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        dir.path(),
        "experiment = \"busemann\"\n[busemann]\npoints = [[0.0, 0.7]]\nlevels = [1.0]\nsamples = 5\n",
        &[],
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stdout));
    let csv = fs::read_to_string(dir.path().join("out/busemann.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 5);
    let r = results(dir.path());
    let b = r["values"]["points"][0]["value"].as_f64().unwrap();
    assert!(b.abs() < 1e-6, "{b}");
}

#[test]
fn failed_expectation_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let config = "experiment = \"certify-pole\"\n\
        [profile]\nkind = \"cosine\"\na = 1.5\nb = 0.4\n\
        [certify_pole]\npoint = [0.0, 0.5]\nhorizon = 10.0\nangles = 8\nexpect = \"certified\"\n";
    let out = run(dir.path(), config, &[]);
    assert_eq!(code(&out), 1, "{}", String::from_utf8_lossy(&out.stderr));
    let r = results(dir.path());
    assert_eq!(r["status"], "fail");
    assert_eq!(r["values"]["certified"], false);
}
