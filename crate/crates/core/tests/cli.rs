use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn affordnav(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_affordnav"))
        .args(args)
        .output()
        .expect("spawn affordnav")
}

fn ok(args: &[&str]) -> Output {
    let out = affordnav(args);
    assert!(
        out.status.success(),
        "affordnav {} failed: {}",
        args.join(" "),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn s(p: &Path) -> String {
    p.to_string_lossy().into_owned()
}

fn suite(root: &Path) -> String {
    let dir = root.join("suite");
    ok(&["gen-scenes", "--seed", "2", "--count", "1", "--episodes-per-scene", "2", "--out", &s(&dir)]);
    s(&dir.join("episodes.json"))
}

#[test]
fn gen_run_eval_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let episodes = suite(tmp.path());
    assert!(tmp.path().join("suite/scene_000.json").is_file());
    let listed: Value = serde_json::from_str(&std::fs::read_to_string(&episodes).unwrap()).unwrap();
    assert_eq!(listed.as_array().unwrap().len(), 2);

    let logs = tmp.path().join("logs");
    ok(&["run", "--episodes", &episodes, "--out", &s(&logs)]);
    assert!(logs.join("config.json").is_file());
    let digest = std::fs::read_to_string(logs.join("config.sha256")).unwrap();
    assert_eq!(digest.trim().len(), 64);
    assert!(logs.join("scene_000_ep0.jsonl").is_file());

    let out = ok(&["eval", "--episodes", &episodes, "--logs", &s(&logs)]);
    let table = String::from_utf8_lossy(&out.stdout);
    for col in ["Episodes", "TL", "NE", "OSR", "SR", "SPL"] {
        assert!(table.contains(col), "missing {col} in\n{table}");
    }
    let report: Value = serde_json::from_str(&std::fs::read_to_string(logs.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["n"], 2);
    assert_eq!(report["config_digest"].as_str(), Some(digest.trim()));
    assert!(logs.join("report.episodes.json").is_file());

    let replay = tmp.path().join("replay");
    ok(&[
        "replay",
        "--log",
        &s(&logs.join("scene_000_ep0.jsonl")),
        "--episodes",
        &episodes,
        "--out",
        &s(&replay),
    ]);
    assert!(replay.join("scene_000_ep0_topdown.png").is_file());
    assert!(replay.join("scene_000_ep0_0_front.replay.png").is_file());
}

#[test]
fn annotate_writes_views_masks_and_paths() {
    let tmp = tempfile::tempdir().unwrap();
    let scene = tmp.path().join("open.json");
    let rows: Vec<String> = (0..60).map(|_| ".".repeat(60)).collect();
    let json = serde_json::json!({"id": "open", "cell_size": 0.1, "wall_height": 2.5, "grid": rows});
    std::fs::write(&scene, json.to_string()).unwrap();
    let out = tmp.path().join("ann");
    ok(&["annotate", "--scene", &s(&scene), "--x", "3", "--y", "3", "--out", &s(&out)]);
    for dir in ["front", "left", "back", "right"] {
        for suffix in ["png", "mask.png", "points.png", "paths.png"] {
            let f = out.join(format!("annotate_0_{dir}.{suffix}"));
            assert!(f.is_file(), "missing {}", f.display());
        }
    }
    let set: Value = serde_json::from_str(&std::fs::read_to_string(out.join("candidates.json")).unwrap()).unwrap();
    assert!(!set.as_array().unwrap().is_empty());
}

#[test]
fn usage_and_config_errors_exit_1() {
    assert_eq!(affordnav(&["--help"]).status.code(), Some(0));
    assert_eq!(affordnav(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(affordnav(&["run"]).status.code(), Some(1));

    let tmp = tempfile::tempdir().unwrap();
    let episodes = suite(tmp.path());
    let cfg = tmp.path().join("bad.toml");
    std::fs::write(&cfg, "max_decisions = 3\nmax_decision = 4\n").unwrap();
    let out = affordnav(&["run", "--episodes", &episodes, "--out", &s(&tmp.path().join("o")), "--config", &s(&cfg)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("max_decision"));
}

#[test]
fn runtime_failures_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = s(&tmp.path().join("nope.json"));
    let out = affordnav(&["run", "--episodes", &missing, "--out", &s(&tmp.path().join("o"))]);
    assert_eq!(out.status.code(), Some(2));

    // an episode whose scene file is absent fails alone but flags the run
    let episodes = suite(tmp.path());
    std::fs::remove_file(tmp.path().join("suite/scene_000.json")).unwrap();
    let out = affordnav(&["run", "--episodes", &episodes, "--out", &s(&tmp.path().join("o2"))]);
    assert_eq!(out.status.code(), Some(2));
}
