use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

fn model(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("models").join(format!("{name}.json"))
}

fn write_config(dir: &Path, model_name: &str, extra: &str) -> PathBuf {
    let path = dir.join("run.toml");
    let text = format!("model = {:?}\n{extra}\n", model(model_name));
    fs::write(&path, text).unwrap();
    path
}

fn pdmp(args: &[&str], cfg: &Path, out: &Path) -> i32 {
    let status = Command::new(env!("CARGO_BIN_EXE_pdmp"))
        .args(args)
        .arg("--config")
        .arg(cfg)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap();
    status.status.code().unwrap()
}

fn without_stamp(path: &Path) -> String {
    fs::read_to_string(path).unwrap().lines().filter(|l| !l.starts_with('#')).collect::<Vec<_>>().join("\n")
}

#[test]
fn validate_passes_on_the_deterministic_model() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "m_det", "");
    assert_eq!(pdmp(&["validate"], &cfg, dir.path()), 0);
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("validation.json")).unwrap()).unwrap();
    assert_eq!(report["pass"], true);
}

#[test]
fn solve_writes_value_and_policy() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "m_2a", "[numerics]\ngrid_n = 40\n");
    assert_eq!(pdmp(&["solve"], &cfg, dir.path()), 0);
    for f in ["solve_report.json", "value.csv", "policy.json"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    let value = without_stamp(&dir.path().join("value.csv"));
    assert!(value.starts_with("x1,value"));
    assert_eq!(value.lines().count(), 42);
}

#[test]
fn iteration_cap_is_a_numerical_failure() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "m_2a", "[numerics]\ngrid_n = 20\nmax_iter = 1\n");
    assert_eq!(pdmp(&["solve"], &cfg, dir.path()), 3);
}

#[test]
fn bad_config_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "m_det", "[numerics]\ngrid_n = 0\n");
    assert_eq!(pdmp(&["solve"], &cfg, dir.path()), 2);
    let cfg = write_config(dir.path(), "m_det", "bogus = 1\n");
    assert_eq!(pdmp(&["validate"], &cfg, dir.path()), 2);
    assert_eq!(pdmp(&["check", "--suite", "nope"], &write_config(dir.path(), "m_det", ""), dir.path()), 2);
    let missing = dir.path().join("absent.toml");
    assert_eq!(pdmp(&["validate"], &missing, dir.path()), 2);
}

#[test]
fn identity_change_of_measure_check_passes() {
    let dir = tempfile::tempdir().unwrap();
    let extra = "[mc]\nn_paths = 2000\n\n[[girsanov]]\nnu0 = 1.0\nnu_gamma = 1.0\nhorizon = 1.0\n";
    let cfg = write_config(dir.path(), "m_det", extra);
    assert_eq!(pdmp(&["check", "--suite", "girsanov"], &cfg, dir.path()), 0);
    assert!(dir.path().join("check_girsanov.json").exists());
    assert!(without_stamp(&dir.path().join("check_girsanov.csv")).starts_with("suite,name,statistic"));
}

#[test]
fn simulate_output_is_reproducible_and_worker_independent() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "m_2a", "starts = [[0.2], [0.7]]\n[mc]\nn_paths = 50\n");
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert_eq!(pdmp(&["simulate", "--workers", "1"], &cfg, &a), 0);
    assert_eq!(pdmp(&["simulate", "--workers", "3"], &cfg, &b), 0);
    let ta = without_stamp(&a.join("trajectories.csv"));
    assert!(ta.lines().count() > 100);
    assert_eq!(ta, without_stamp(&b.join("trajectories.csv")));
    let c = dir.path().join("c");
    assert_eq!(pdmp(&["simulate", "--seed", "99"], &cfg, &c), 0);
    assert_ne!(ta, without_stamp(&c.join("trajectories.csv")));
}

#[test]
fn evaluate_prices_a_solved_policy() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "m_2a", "[numerics]\ngrid_n = 40\n");
    assert_eq!(pdmp(&["solve"], &cfg, dir.path()), 0);
    let policy = dir.path().join("policy.json");
    let extra = format!("policy = {policy:?}\nstarts = [[0.5]]\n[numerics]\ngrid_n = 40\n[mc]\nn_paths = 500\n");
    let cfg = write_config(dir.path(), "m_2a", &extra);
    assert_eq!(pdmp(&["evaluate"], &cfg, dir.path()), 0);
    let eval = without_stamp(&dir.path().join("evaluation.csv"));
    assert_eq!(eval.lines().count(), 2);
}
