use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn spec(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../specs").join(format!("{name}.json"))
}

fn moncon(cmd: &str, model: &Path, out: &Path, extra: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_moncon")).arg(cmd).arg("--model").arg(model).arg("--out").arg(out).args(extra).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

/// The single run directory under `out`.
fn run_dir(out: &Path) -> PathBuf {
    let dirs: Vec<PathBuf> = fs::read_dir(out).unwrap().map(|e| e.unwrap().path()).filter(|p| p.is_dir()).collect();
    assert_eq!(dirs.len(), 1, "{dirs:?}");
    dirs.into_iter().next().unwrap()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn floats(v: &Value) -> Vec<f64> {
    v.as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect()
}

fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir).unwrap().map(|e| e.unwrap()).map(|e| (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())).collect()
}

#[test]
fn measure_on_symmetric_linear_model() {
    let a = [[-1.0f64, 0.5], [0.5, -1.0]];
    let col = (0..2).map(|j| a[j][j] + (0..2).filter(|&i| i != j).map(|i| a[i][j].abs()).sum::<f64>()).fold(f64::MIN, f64::max);
    let row = (0..2).map(|i| a[i][i] + (0..2).filter(|&j| j != i).map(|j| a[i][j].abs()).sum::<f64>()).fold(f64::MIN, f64::max);
    assert_eq!((col, row), (-0.5, -0.5));

    let tmp = TempDir::new().unwrap();
    let o = moncon("measure", &spec("linear"), tmp.path(), &["--samples", "50"]);
    assert_eq!(code(&o), 0);
    let m = json(&run_dir(tmp.path()).join("measures.json"));
    assert_eq!(m["mu1"]["max"].as_f64().unwrap(), col);
    assert_eq!(m["mu_inf"]["max"].as_f64().unwrap(), row);
    assert_eq!(m["mu1"]["min"].as_f64().unwrap(), col);
    assert!(stdout(&o).contains("-5.0000000000000000e-1"));
}

#[test]
fn norm_flag_restricts_measures() {
    let tmp = TempDir::new().unwrap();
    let o = moncon("measure", &spec("linear"), tmp.path(), &["--samples", "10", "--norm", "linf"]);
    assert_eq!(code(&o), 0);
    let m = json(&run_dir(tmp.path()).join("measures.json"));
    assert!(m.get("mu1").is_none() && m["mu_inf"]["max"].as_f64().is_some());
}

#[test]
fn traffic_certificate_is_strict_and_refines_toward_the_limit() {
    let tmp = TempDir::new().unwrap();
    let o = moncon("certify", &spec("traffic"), tmp.path(), &[]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let dir = run_dir(tmp.path());
    let sum = json(&dir.join("cert_sum_l1.json"));
    assert_eq!(sum["status"], "NONEXPANSIVE_STRICT_AT_EQ");
    // x* from the inflow recursion δ_{i+1} = β δ_i
    let eq = floats(&sum["equilibrium"]);
    for (got, want) in eq.iter().zip([0.3, 0.27, 0.243]) {
        assert!((got - want).abs() < 1e-12);
    }

    let limit = [1.0, 1.0 / 0.9, 1.0 / (0.9 * 0.9)];
    let seq = json(&dir.join("refinement_sum_l1.json"))["sequence"].as_array().unwrap().clone();
    assert!(seq.len() >= 3);
    let (last_limit, strict) = seq.split_last().unwrap();
    assert_eq!(last_limit["limit_of_valid_sequence"], true);
    for c in strict {
        assert_eq!(c["status"], "NONEXPANSIVE_STRICT_AT_EQ");
    }
    let near = floats(&strict.last().unwrap()["weights"]);
    for (w, l) in near.iter().zip(limit) {
        assert!(*w >= l && w - l < 1e-3, "{near:?}");
    }
    let lim = json(&dir.join("cert_sum_l1_limit.json"));
    for (w, l) in floats(&lim["weights"]).iter().zip(limit) {
        assert!((w - l).abs() < 1e-12);
    }
}

#[test]
fn reruns_are_byte_identical() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    let args = ["--samples", "200", "--horizon", "5"];
    for out in [a.path(), b.path()] {
        for cmd in ["certify", "lyapunov", "simulate", "report"] {
            assert_eq!(code(&moncon(cmd, &spec("comparison"), out, &args)), 0, "{cmd}");
        }
    }
    let (da, db) = (run_dir(a.path()), run_dir(b.path()));
    assert_eq!(da.file_name(), db.file_name());
    // REPORT.txt names the run directory, which differs between the two temp roots
    let strip = |mut s: BTreeMap<String, Vec<u8>>| {
        s.remove("REPORT.txt");
        s
    };
    let first = snapshot(&da);
    assert!(first.keys().any(|k| k.ends_with(".csv")));
    assert_eq!(strip(first.clone()), strip(snapshot(&db)));

    // same inputs, same directory, same bytes
    assert_eq!(code(&moncon("certify", &spec("comparison"), a.path(), &args)), 0);
    assert_eq!(snapshot(&da), first);
}

#[test]
fn seed_changes_the_run_directory() {
    let tmp = TempDir::new().unwrap();
    for seed in ["1", "2"] {
        assert_eq!(code(&moncon("measure", &spec("linear"), tmp.path(), &["--samples", "5", "--seed", seed])), 0);
    }
    assert_eq!(fs::read_dir(tmp.path()).unwrap().count(), 2);
}

#[test]
fn unstable_model_is_refused_before_simulation() {
    let tmp = TempDir::new().unwrap();
    let o = moncon("simulate", &spec("linear_unstable"), tmp.path(), &["--samples", "100"]);
    assert_eq!(code(&o), 2);
    let dir = run_dir(tmp.path());
    let err = json(&dir.join("error.json"));
    assert_eq!(err["exit_code"], 2);
    assert_eq!(err["kind"], "certification_failed");
    assert!(!dir.join("trajectory.csv").exists());
}

#[test]
fn validation_failures_exit_1() {
    let tmp = TempDir::new().unwrap();
    let bad = tmp.path().join("bad.json");
    fs::write(&bad, r#"{"name": "comparison", "params": {"gamma_params": {"s": 2.0}}}"#).unwrap();
    let out = tmp.path().join("runs");
    assert_eq!(code(&moncon("certify", &bad, &out, &[])), 1);
    assert_eq!(json(&out.join("error.json"))["kind"], "validation_failed");

    let out2 = tmp.path().join("runs2");
    assert_eq!(code(&moncon("certify", &spec("linear"), &out2, &["--margin", "-1"])), 1);
    assert!(out2.join("error.json").exists());
    assert_eq!(code(&moncon("simulate", &spec("linear"), &out2, &["--step", "2", "--horizon", "1"])), 1);
    assert_eq!(code(&moncon("certify", &tmp.path().join("missing.json"), &out2, &[])), 1);
}

#[test]
fn integration_blow_up_exits_3() {
    // RK4 with h|λ| = 4.5 is unstable even though the model contracts
    let tmp = TempDir::new().unwrap();
    let o = moncon("simulate", &spec("linear"), tmp.path(), &["--samples", "20", "--step", "3", "--horizon", "1000"]);
    assert_eq!(code(&o), 3);
    assert_eq!(json(&run_dir(tmp.path()).join("error.json"))["exit_code"], 3);
}

#[test]
fn commands_check_applicability() {
    let tmp = TempDir::new().unwrap();
    assert_eq!(code(&moncon("report", &spec("linear"), tmp.path(), &[])), 1);
    assert_eq!(code(&moncon("entrain", &spec("linear"), tmp.path(), &["--samples", "20"])), 1);
    let tmp = TempDir::new().unwrap();
    assert_eq!(code(&moncon("lyapunov", &spec("multiagent_forced"), tmp.path(), &["--samples", "20"])), 1);
}

#[test]
fn report_names_result_and_certificate() {
    let tmp = TempDir::new().unwrap();
    let args = ["--samples", "300", "--horizon", "10"];
    for cmd in ["certify", "lyapunov", "simulate"] {
        assert_eq!(code(&moncon(cmd, &spec("multiagent"), tmp.path(), &args)), 0, "{cmd}");
    }
    let o = moncon("report", &spec("multiagent"), tmp.path(), &args);
    assert_eq!(code(&o), 0);
    let text = fs::read_to_string(run_dir(tmp.path()).join("REPORT.txt")).unwrap();
    assert_eq!(text, stdout(&o));
    assert!(text.contains("justified by: max-separable contraction theorem"));
    assert!(text.contains("justified by: limit-of-norms proposition"));
    assert!(text.contains("certificate cert_max_linf_limit.json"));
    assert!(text.contains("Kamke condition"));
    // every conclusion line is followed by its justification
    let lines: Vec<&str> = text.lines().collect();
    for (i, l) in lines.iter().enumerate() {
        if l.trim_start().starts_with("conclusion:") {
            assert!(lines[i + 1].trim_start().starts_with("justified by:"), "{l}");
        }
    }
}

#[test]
fn entrainment_writes_poincare_distances() {
    let tmp = TempDir::new().unwrap();
    let o = moncon("entrain", &spec("multiagent_forced"), tmp.path(), &["--samples", "300"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let dir = run_dir(tmp.path());
    let csv = fs::read_to_string(dir.join("poincare.csv")).unwrap();
    let rows: Vec<Vec<f64>> = csv.lines().skip(1).map(|l| l.split(',').map(|s| s.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 61);
    for pair in rows.windows(2) {
        for (next, prev) in pair[1].iter().zip(&pair[0]).skip(1) {
            assert!(*next <= prev * (1.0 + 1e-9));
        }
    }
    let art = json(&dir.join("entrain.json"));
    assert_eq!(art["certificate"], "cert_max_linf.json");
    assert!(art["fixed_point_spread"].as_f64().unwrap() < 1e-8);
}
