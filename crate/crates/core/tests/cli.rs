use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_sigmalab");

const TOY: &str = r#"{
  "name": "toy",
  "model": {"variant": {"kind": "reflected_bm"}, "dt": 0.01, "horizon": 50.0},
  "rule": {"kind": "hitting_level", "level": 1.0},
  "detection": "bridge",
  "observable": "a",
  "law": {"name": "exponential", "rate": 1.0},
  "n_paths": 2000,
  "seed": 11,
  "outputs": [
    {"kind": "survival_csv", "path": "survival.csv"},
    {"kind": "summary_json", "path": "summary.json"}
  ]
}"#;

fn run(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut c = Command::new(BIN);
    c.args(args).env_remove("SIGMALAB_PATHS");
    for (k, v) in envs {
        c.env(k, v);
    }
    c.output().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn verify_writes_declared_outputs_reproducibly() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "toy.json", TOY);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o = run(&["verify", "--config", s(&cfg), "--out", s(out)], &[]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    }
    for f in ["survival.csv", "summary.json"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
    let csv = std::fs::read_to_string(a.join("survival.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("x,empirical,theoretical,abs_diff"));
    let summary: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(a.join("summary.json")).unwrap()).unwrap();
    let mut keys: Vec<_> = summary.as_object().unwrap().keys().cloned().collect();
    keys.sort();
    assert_eq!(keys, ["censored", "dkw_eps", "ks", "n", "pass", "scenario", "slack"]);
    assert_eq!(summary["pass"], true);
}

#[test]
fn statistical_failure_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.json", &TOY.replace("\"rate\": 1.0", "\"rate\": 2.0"));
    let o = run(&["verify", "--config", s(&cfg), "--out", s(dir.path())], &[]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn config_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "unknown.json", &TOY.replace("\"exponential\"", "\"no_such_law\""));
    let o = run(&["verify", "--config", s(&cfg)], &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("law"));
    let cfg = write(dir.path(), "zero.json", &TOY.replace("2000", "0"));
    let o = run(&["verify", "--config", s(&cfg)], &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("n_paths"));
    let o = run(&["verify", "--config", s(&dir.path().join("missing.json"))], &[]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn path_override_gives_low_power_warning() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "toy.json", TOY);
    let o = run(&["verify", "--config", s(&cfg), "--out", s(dir.path())], &[("SIGMALAB_PATHS", "10")]);
    assert!(matches!(o.status.code(), Some(0 | 1)));
    assert!(String::from_utf8_lossy(&o.stderr).contains("DKW"));
    let summary: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["n"], 10);
}

#[test]
fn simulate_writes_records_and_paths() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "toy.json", TOY);
    let out = dir.path().join("sim");
    let o = run(&["simulate", "--config", s(&cfg), "--out", s(&out), "--paths", "20", "--seed", "5", "--dump-paths"], &[]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let records = std::fs::read_to_string(out.join("records.csv")).unwrap();
    assert_eq!(records.lines().count(), 21);
    let path = std::fs::read_to_string(out.join("paths/path_0.csv")).unwrap();
    assert_eq!(path.lines().next(), Some("t,X,A"));
    assert_eq!(std::fs::read_dir(out.join("paths")).unwrap().count(), 10);
}

#[test]
fn laws_tables() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "a.json",
        r#"{"law": {"name": "law_A_infty_survival", "lambda": {"kind": "constant", "value": 1.0}},
            "grid": {"from": 0.0, "to": 5.0, "step": 0.5}}"#,
    );
    let o = run(&["laws", "--config", s(&cfg)], &[]);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8(o.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("x,value"));
    let rows: Vec<(f64, f64)> = lines
        .map(|l| {
            let (x, v) = l.split_once(',').unwrap();
            (x.parse().unwrap(), v.parse().unwrap())
        })
        .collect();
    assert_eq!(rows.len(), 11);
    assert!(rows.iter().all(|(x, v)| (v - (-x).exp()).abs() < 1e-8));
    let cfg = write(dir.path(), "c.json", r#"{"law": {"name": "spq_constant", "p": 1.0, "q": 2.0}}"#);
    let o = run(&["laws", "--config", s(&cfg), "--out", s(dir.path())], &[]);
    assert_eq!(o.status.code(), Some(0));
    let text = std::fs::read_to_string(dir.path().join("laws.csv")).unwrap();
    let row = text.lines().nth(1).unwrap();
    let v: f64 = row.split_once(',').unwrap().1.parse().unwrap();
    assert!((v - std::f64::consts::FRAC_PI_2).abs() < 1e-8);
    assert_eq!(text.lines().count(), 2);
}

#[test]
fn embed_tabulates_and_verifies() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "m.json", r#"{"kind": "exponential", "rate": 1.0}"#);
    let o = run(&["embed", "--config", s(&cfg), "--out", s(dir.path())], &[]);
    assert_eq!(o.status.code(), Some(0));
    let table = std::fs::read_to_string(dir.path().join("barrier.csv")).unwrap();
    assert_eq!(table.lines().count(), 202);
    let o = run(&["embed", "--config", s(&cfg), "--out", s(dir.path()), "--seed", "3", "--paths", "2000"], &[]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(dir.path().join("summary.json").exists());
}

#[test]
fn corrupted_scenario_file_fails_selftest_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let bundled = Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios");
    for entry in std::fs::read_dir(&bundled).unwrap() {
        let p = entry.unwrap().path();
        std::fs::copy(&p, dir.path().join(p.file_name().unwrap())).unwrap();
    }
    std::fs::write(dir.path().join("embed_exp.json"), "{ \"name\": \"embed_exp\", ").unwrap();
    let o = run(&["selftest", "--config", s(dir.path())], &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("embed_exp.json"));
}
