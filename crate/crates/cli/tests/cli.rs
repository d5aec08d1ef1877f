use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use ellipt_cli::report::read_json;

fn ellipt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ellipt"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn run_into(scenario: &str, dir: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["run", scenario, "--out", dir.to_str().unwrap()];
    args.extend_from_slice(extra);
    ellipt(&args)
}

fn bundled_text(name: &str) -> String {
    fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(format!("{name}.json")))
        .unwrap()
}

#[test]
fn odd_reflection_preserves_sup_norm() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_into("odd_reflection_1d", dir.path(), &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let r = read_json(&dir.path().join("report.json")).unwrap();
    let sup = r.checks.iter().find(|c| c.name == "sup_norm_ratio").unwrap();
    assert!((sup.values["ratio"] - 1.0).abs() < 1e-12);
    assert!(dir.path().join("extension.csv").exists());
}

#[test]
fn nonpositive_a_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    fs::write(&path, bundled_text("heat_interval").replace("[[1]]", "[[0]]")).unwrap();
    let out = run_into(path.to_str().unwrap(), &dir.path().join("out"), &[]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("`operator.a`") && err.contains("bad.json:6"), "{err}");
}

#[test]
fn perron_matches_direct_on_the_disk() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_into("perron_vs_direct_disk", dir.path(), &[]);
    assert!(out.status.success());
    let r = read_json(&dir.path().join("report.json")).unwrap();
    let m = r.checks.iter().find(|c| c.name == "matches_direct").unwrap();
    assert!(m.values["max_diff"] <= 1e-5);
    assert!(String::from_utf8_lossy(&out.stdout).contains("PASS perron/matches_direct"));
}

#[test]
fn identical_runs_give_identical_artifacts() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        assert!(run_into("verify_all_square", d.path(), &[]).status.success());
    }
    let mut names: Vec<_> = walk(a.path());
    names.sort();
    assert!(names.len() > 10);
    for rel in names {
        let x = fs::read(a.path().join(&rel)).unwrap();
        let y = fs::read(b.path().join(&rel)).unwrap();
        assert!(x == y, "{rel} differs");
    }
}

fn walk(root: &Path) -> Vec<String> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push(p.strip_prefix(root).unwrap().to_string_lossy().into_owned());
            }
        }
    }
    out
}

#[test]
fn csv_format_and_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_into("poisson_square", dir.path(), &["--format", "csv", "--mesh", "0.05", "--seed", "11"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("report.csv")).unwrap();
    assert!(csv.starts_with("task,check,anchor,passed,key,value"));
    let text = fs::read_to_string(dir.path().join("report.txt")).unwrap();
    assert!(text.contains("mesh 5.0000000000000003e-2, seed 11"), "{text}");
}

#[test]
fn failing_check_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad_u.json");
    fs::write(&path, bundled_text("drift_reflection_1d").replace("2.625", "2.0")).unwrap();
    let out = run_into(path.to_str().unwrap(), &dir.path().join("out"), &[]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("first failing check: extend/admissible_input"));
}

#[test]
fn lists_bundled_scenarios() {
    let out = ellipt(&["--list-scenarios"]);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    for name in ["odd_reflection_1d", "perron_vs_direct_disk", "verify_all_square"] {
        assert!(text.contains(name));
    }
}

#[test]
fn malformed_json_reports_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("broken.json");
    fs::write(&path, bundled_text("heat_interval").replace("\"mesh\"", "\"mesch\"")).unwrap();
    let out = run_into(path.to_str().unwrap(), &dir.path().join("out"), &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown field `mesch`"));
}
