use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn asset(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../assets").join(name)
}

fn cvv(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cvv")).args(args).output().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn simulate(out: &Path, extra: &[&str]) -> Output {
    let scn = asset("fig2.scn");
    let ctl = asset("stop_rule.ctl");
    let mut args = vec!["simulate", "--scenario", s(&scn), "--controller", s(&ctl), "--out", s(out)];
    args.extend_from_slice(extra);
    cvv(&args)
}

#[test]
fn simulate_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.jsonl");
    let b = dir.path().join("b.jsonl");
    assert!(simulate(&a, &[]).status.success());
    assert!(simulate(&b, &[]).status.success());
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn simulate_flags_override_the_scenario() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("t.jsonl");
    assert!(simulate(&out, &["--duration", "10", "--seed", "9"]).status.success());
    let text = std::fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().count(), 1 + 101);
    let header: serde_json::Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
    assert_eq!(header["seed"], 9);
}

#[test]
fn check_exit_code_follows_failures() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("t.jsonl");
    assert!(simulate(&trace, &[]).status.success());
    let ok = cvv(&["check", "--trace", s(&trace), "--assertions", s(&asset("stop_junction.assert"))]);
    assert!(ok.status.success(), "{}", String::from_utf8_lossy(&ok.stdout));
    let bad = dir.path().join("bad.assert");
    std::fs::write(&bad, "assert never_fast kind=invariant\n  condition: speed(ego) < 5\n").unwrap();
    let out = cvv(&["check", "--trace", s(&trace), "--assertions", s(&bad), "--format", "json"]);
    assert_eq!(out.status.code(), Some(1));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["summary"]["fail"], 1);
}

#[test]
fn verify_reports_both_verdicts() {
    let prop = asset("stop_rule.prop");
    let ok = cvv(&["verify", "--controller", s(&asset("stop_rule.ctl")), "--property", s(&prop)]);
    assert!(ok.status.success());
    assert!(String::from_utf8_lossy(&ok.stdout).contains("stop_before_proceed: safe"));
    let bad = cvv(&["verify", "--controller", s(&asset("stop_rule_faulty.ctl")), "--property", s(&prop)]);
    assert_eq!(bad.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&bad.stdout).contains("init -> approach -> decelerate -> proceed"));
}

#[test]
fn errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let scn = dir.path().join("bad.scn");
    std::fs::write(&scn, "[sim]\nego = \"E\"\nduration = 1.0\n").unwrap();
    let out = cvv(&[
        "simulate",
        "--scenario",
        s(&scn),
        "--controller",
        s(&asset("stop_rule.ctl")),
        "--out",
        s(&dir.path().join("t.jsonl")),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("network"));
}

fn corroborate(ctl: &str, out: &Path) -> Output {
    cvv(&[
        "corroborate",
        "--scenario",
        s(&asset("stop_gap_rest.scn")),
        "--controller",
        s(&asset(ctl)),
        "--property",
        s(&asset("stop_rule.prop")),
        "--binding",
        s(&asset("stop_rule.bind")),
        "--workers",
        "3",
        "--out",
        s(out),
    ])
}

#[test]
fn corroborate_writes_the_output_layout() {
    let dir = tempfile::tempdir().unwrap();
    let out = corroborate("stop_rule.ctl", dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["report.json", "report.md", "scenarios/trial-000.scn", "traces/trial-005.jsonl"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    let bad = tempfile::tempdir().unwrap();
    assert_eq!(corroborate("stop_rule_faulty.ctl", bad.path()).status.code(), Some(1));
    assert!(bad.path().join("witness.json").exists());
    assert!(bad.path().join("traces/witness.jsonl").exists());
}
