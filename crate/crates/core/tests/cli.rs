use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn hicalib(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hicalib"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("run.cfg");
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

const TINY: &str = "d = 2\nL = 2\nH = 2\nS = 1\nm = 1\nadversary = iid\nq = 1,1\n";

#[test]
fn run_then_certify() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), TINY);
    let out = dir.path().join("out");
    let run = hicalib(&["run", "--config", &cfg, "--seed", "7", "--out", out.to_str().unwrap()]);
    assert_eq!(run.status.code(), Some(0), "{}", String::from_utf8_lossy(&run.stderr));
    let metrics = fs::read_to_string(out.join("metrics.csv")).unwrap();
    let header = metrics.lines().next().unwrap();
    assert_eq!(
        header,
        "run_id,seed,T,d,L,H,S,m,adversary,dce,dce_per_day,ece_mean,ece_stderr,trials"
    );
    let transcript = fs::read_to_string(out.join("transcript.jsonl")).unwrap();
    assert_eq!(transcript.lines().count(), 5);

    let cert = hicalib(&["certify", "--run", out.to_str().unwrap()]);
    assert_eq!(cert.status.code(), Some(0));
    assert!(out.join("certificate.json").is_file());
    assert!(out.join("certificate.csv").is_file());
}

#[test]
fn tampered_transcript_fails_certification() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), TINY);
    let out = dir.path().join("out");
    hicalib(&["run", "--config", &cfg, "--seed", "3", "--out", out.to_str().unwrap()]);
    let path = out.join("transcript.jsonl");
    let text = fs::read_to_string(&path).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    lines[1] = if lines[1].contains(r#""x":1"#) {
        lines[1].replace(r#""x":1"#, r#""x":2"#)
    } else {
        lines[1].replace(r#""x":2"#, r#""x":1"#)
    };
    fs::write(&path, lines.join("\n") + "\n").unwrap();
    let cert = hicalib(&["certify", "--run", out.to_str().unwrap()]);
    assert_eq!(cert.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&cert.stderr).contains("recomputation"));
}

#[test]
fn usage_and_config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "L = 2\nH = 2\nS = 1\nm = 1\n");
    let out = dir.path().join("out");
    let run = hicalib(&["run", "--config", &cfg, "--seed", "1", "--out", out.to_str().unwrap()]);
    assert_eq!(run.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&run.stderr).contains("missing d"));

    let empty = dir.path().join("empty");
    fs::create_dir(&empty).unwrap();
    let cert = hicalib(&["certify", "--run", empty.to_str().unwrap()]);
    assert_eq!(cert.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&cert.stderr).contains("transcript"));

    assert_eq!(hicalib(&["oracle", "--max-d", "1"]).status.code(), Some(2));
    assert_eq!(
        hicalib(&["lowerbound", "--R", "2", "--K", "2", "--trials", "1"]).status.code(),
        Some(2)
    );
    assert_eq!(hicalib(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn lowerbound_and_oracle_report_json() {
    let lb = hicalib(&["lowerbound", "--R", "2", "--K", "2", "--forecaster", "uniform", "--trials", "50", "--seed", "1"]);
    assert_eq!(lb.status.code(), Some(0));
    let report: serde_json::Value = serde_json::from_slice(&lb.stdout).unwrap();
    assert_eq!(report["T"], 2);
    assert_eq!(report["forecaster"], "uniform");

    let oracle = hicalib(&["oracle", "--trials", "20", "--max-T", "8", "--max-d", "3", "--seed", "4"]);
    let report: serde_json::Value = serde_json::from_slice(&oracle.stdout).unwrap();
    assert_eq!(report["dce_failures"], 0);
}

#[test]
fn concentration_rejects_adaptive_adversary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "d = 2\nL = 2\nH = 2\nS = 1\nm = 1\nadversary = adaptive_argmin\n");
    let out = hicalib(&["concentration", "--config", &cfg, "--trials", "4"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("adaptive"));
}
