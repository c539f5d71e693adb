use std::path::Path;

use assert_cmd::Command;

fn qd(dir: &Path) -> Command {
    let mut c = Command::cargo_bin("qdcascade").unwrap();
    c.current_dir(dir);
    c
}

fn stderr_json(out: &std::process::Output) -> serde_json::Value {
    let text = String::from_utf8_lossy(&out.stderr);
    let line = text.lines().last().expect("stderr is empty");
    serde_json::from_str(line).unwrap_or_else(|e| panic!("{e}: {text}"))
}

#[test]
fn preset_list_and_show() {
    let dir = tempfile::tempdir().unwrap();
    let out = qd(dir.path()).args(["preset", "list"]).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for name in ["paper-default", "desk", "ideal"] {
        assert!(text.contains(name), "{text}");
    }
    let out = qd(dir.path()).args(["preset", "show", "paper-default"]).output().unwrap();
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["source"]["t1_xx"], 220.0);
    assert_eq!(v["detectors"][0]["dark_rate"], 250.0);
}

#[test]
fn unknown_preset_fails_with_json() {
    let dir = tempfile::tempdir().unwrap();
    let out = qd(dir.path()).args(["preset", "show", "nope"]).output().unwrap();
    assert!(!out.status.success());
    assert_eq!(stderr_json(&out)["error"]["kind"], "config");
}

#[test]
fn bogus_experiment_fails_with_json() {
    let dir = tempfile::tempdir().unwrap();
    let out = qd(dir.path()).args(["simulate", "laser"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let v = stderr_json(&out);
    assert!(v["error"]["message"].as_str().unwrap().contains("laser"), "{v}");
}

#[test]
fn usage_errors_are_machine_readable() {
    let dir = tempfile::tempdir().unwrap();
    let out = qd(dir.path()).args(["simulate"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_json(&out)["error"]["kind"], "usage");
}

#[test]
fn simulate_then_analyze() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.toml");
    std::fs::write(&config, "experiment = \"hbt\"\npreset = \"desk\"\n[scale]\nefficiency = 0.3\nperiods = 40000\n")
        .unwrap();
    let cfg = config.to_str().unwrap();
    let out =
        qd(dir.path()).args(["--config", cfg, "--seed", "3", "--out", "sim", "simulate", "hbt"]).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let sim = dir.path().join("sim");
    assert!(sim.join("report.json").exists() && sim.join("summary.txt").exists());
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(sim.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["provenance"]["seed"], 3);

    let mut tags: Vec<String> = std::fs::read_dir(&sim)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.to_string_lossy().ends_with(".tags.csv"))
        .map(|p| p.to_string_lossy().into_owned())
        .collect();
    tags.sort();
    assert_eq!(tags.len(), 2);
    let out =
        qd(dir.path()).args(["--config", cfg, "--out", "an", "analyze", "-e", "hbt"]).args(&tags).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let analyzed: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("an/report.json")).unwrap()).unwrap();
    assert_eq!(analyzed["scalars"]["g2_raw"], report["scalars"]["g2_raw"]);

    let out = qd(dir.path()).args(["analyze", "-e", "hbt", "missing.tags.csv", "other.tags.csv"]).output().unwrap();
    assert!(!out.status.success());
    let v = stderr_json(&out);
    assert_eq!(v["error"]["kind"], "io");
    assert!(v["error"]["message"].as_str().unwrap().contains("missing.tags.csv"), "{v}");
}

#[test]
fn same_seed_same_files() {
    let dir = tempfile::tempdir().unwrap();
    for out in ["a", "b"] {
        let o = qd(dir.path())
            .args([
                "--seed",
                "9",
                "--workers",
                if out == "a" { "1" } else { "4" },
                "--out",
                out,
                "simulate",
                "lifetime",
            ])
            .output()
            .unwrap();
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let read = |d: &str, f: &str| std::fs::read(dir.path().join(d).join(f)).unwrap();
    assert_eq!(read("a", "report.json"), read("b", "report.json"));
}

#[test]
fn quick_reproduce_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = qd(dir.path()).args(["--seed", "2", "--out", "r", "reproduce", "--quick"]).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let r = dir.path().join("r");
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(r.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["format"], "qdcascade-report");
    for key in ["fidelity", "t1_xx", "tbp", "preparation_bound", "tpi_crosspol_raw_x"] {
        assert!(report["scalars"][key]["value"].is_number(), "{key}");
    }
    assert!(r.join("fig3_rabi.csv").exists() && r.join("summary.txt").exists());

    let out = qd(dir.path()).args(["--preset", "ideal", "reproduce", "--quick"]).output().unwrap();
    assert!(!out.status.success());
    assert_eq!(stderr_json(&out)["error"]["kind"], "config");
}
