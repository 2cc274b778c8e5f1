use serde_json::Value;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn scenarios() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

fn shocklab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_shocklab"))
        .args(args)
        .env_remove("OUTPUT_DIR")
        .output()
        .expect("binary runs")
}

fn run_file(path: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec![
        "run",
        path.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ];
    args.extend_from_slice(extra);
    shocklab(&args)
}

fn run_text(text: &str, extra: &[&str]) -> (Output, tempfile::TempDir) {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("scenario.json");
    fs::write(&path, text).unwrap();
    let out = run_file(&path, &dir.path().join("out"), extra);
    (out, dir)
}

fn summary(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap()
}

#[test]
fn shipped_scenarios_pass() {
    for name in [
        "unforced_shear",
        "flat_unforced",
        "lemma1_radial",
        "lemma1_blowup",
        "conservation",
        "extract_and_scan",
        "theorem2",
    ] {
        let dir = tempfile::tempdir().unwrap();
        let out = run_file(&scenarios().join(format!("{name}.json")), dir.path(), &[]);
        assert_eq!(
            out.status.code(),
            Some(0),
            "{name}: {}",
            String::from_utf8_lossy(&out.stdout)
        );
        let s = summary(dir.path());
        assert_eq!(s["status"], "pass", "{name}");
        for f in s["files"].as_array().unwrap() {
            assert!(
                dir.path().join(f.as_str().unwrap()).is_file(),
                "{name}: {f}"
            );
        }
        assert!(dir.path().join("summary.txt").is_file());
    }
}

#[test]
fn unforced_shear_writes_expected_tables() {
    let dir = tempfile::tempdir().unwrap();
    run_file(&scenarios().join("unforced_shear.json"), dir.path(), &[]);
    let results = fs::read_to_string(dir.path().join("results.csv")).unwrap();
    let mut lines = results.lines();
    assert_eq!(
        lines.next(),
        Some("alpha,status,t_forward,t_backward,q_seed")
    );
    assert_eq!(lines.count(), 21);
    let fan = fs::read_to_string(dir.path().join("fan.csv")).unwrap();
    assert!(fan.starts_with("seed_q,t,q,p\n"));
    let s = summary(dir.path());
    let t = s["results"]["witness_time"].as_f64().unwrap();
    assert!((t - 1.0 / (0.2 * std::f64::consts::PI)).abs() < 1e-5);
}

#[test]
fn unknown_fields_are_rejected_with_their_path() {
    let (out, _d) = run_text(
        r#"{"command": "shock-scan", "numerics": {"dt": 1e-3, "bogus": 1},
            "foliation": {"alpha_grid": [0.0], "q_grid_size": 8}}"#,
        &[],
    );
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("numerics") && err.contains("bogus"), "{err}");
}

#[test]
fn missing_section_is_a_config_error() {
    let (out, _d) = run_text(r#"{"command": "theorem2"}"#, &[]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("theorem2"));
    let (out, _d) = run_text(r#"{"command": "fly"}"#, &[]);
    assert_eq!(out.status.code(), Some(1));
}

const STRONG: &str = r#"{
  "command": "theorem2",
  "potential": {
    "modes": [{"k": 1, "cos": 0.225, "envelope": "bump"}],
    "envelopes": {"bump": {"type": "compact_bump", "cutoff": 1.0}}
  },
  "theorem2": {"cutoff": 1.0, "alpha_grid": [-1.0, 0.0, 1.0], "n_beta": 16}
}"#;

#[test]
fn curvature_above_strict_bound_is_refused() {
    let (out, _d) = run_text(STRONG, &[]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("admissibility threshold"));
}

#[test]
fn paper_bound_runs_and_reports_the_fold() {
    let (out, d) = run_text(STRONG, &["--paper-bound"]);
    assert_eq!(out.status.code(), Some(2));
    let s = summary(&d.path().join("out"));
    assert_eq!(s["status"], "fail");
    assert_eq!(s["results"]["bound"], "paper");
    assert_eq!(s["checks"][0]["name"], "construction");
}

#[test]
fn short_backward_horizon_is_inconclusive() {
    let text = fs::read_to_string(scenarios().join("theorem2.json"))
        .unwrap()
        .replace(
            "\"backward_horizon\": 200.0",
            "\"backward_horizon\": 0.1, \"alpha_cap\": 2.0",
        );
    let (out, d) = run_text(&text, &[]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(summary(&d.path().join("out"))["status"], "inconclusive");
}

#[test]
fn output_directory_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.json");
    let from_file = dir.path().join("from_file");
    fs::write(
        &path,
        format!(
            r#"{{"command": "lemma1", "output_dir": {:?},
                "lemma1": {{"field": {{"type": "zero"}}, "c": 1.0, "r0": 1.0, "r1": 2.0}}}}"#,
            from_file
        ),
    )
    .unwrap();
    let from_env = dir.path().join("from_env");
    let out = Command::new(env!("CARGO_BIN_EXE_shocklab"))
        .args(["run", path.to_str().unwrap()])
        .env("OUTPUT_DIR", &from_env)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(from_env.join("summary.json").is_file());
    assert!(!from_file.exists());
    assert_eq!(
        shocklab(&["run", path.to_str().unwrap()]).status.code(),
        Some(0)
    );
    assert!(from_file.join("summary.json").is_file());
}

#[test]
fn conservation_outputs_depend_only_on_the_seed() {
    let text = r#"{"command": "conservation-check", "seed": 7,
                   "conservation": {"ns": [2], "random_states": 5}}"#;
    let (_, a) = run_text(text, &[]);
    let (_, b) = run_text(text, &[]);
    let (_, c) = run_text(&text.replace("\"seed\": 7", "\"seed\": 8"), &[]);
    let read = |d: &tempfile::TempDir| fs::read(d.path().join("out/results.csv")).unwrap();
    assert_eq!(read(&a), read(&b));
    assert_ne!(read(&a), read(&c));
}
