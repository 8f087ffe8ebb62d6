use std::path::Path;
use std::process::{Command, Output};

use dyadic_humaneval::{RatingRecord, StudyService};
use serde_json::Value;

fn dyadic(root: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dyadic"))
        .env("DYADIC_DATA_ROOT", root)
        .env_remove("RUST_LOG")
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn checksum_line(o: &Output) -> String {
    stdout(o).lines().find(|l| l.starts_with("checksum ")).expect("checksum printed").to_string()
}

/// Sizes small enough that training and sampling take seconds.
const TINY: &str = r#"{"steps": 12, "sample_steps": 3, "hidden_dim": 16, "ffn_dim": 32, "block_dim": 8, "layers": 1}"#;

#[test]
fn synth_twice_gives_identical_checksums() {
    let dir = tempfile::tempdir().unwrap();
    let a = dyadic(dir.path(), &["corpus", "synth", "--dyads", "2", "--seed", "7", "--out", "a"]);
    let b = dyadic(dir.path(), &["corpus", "synth", "--dyads", "2", "--seed", "7", "--out", "b"]);
    let c = dyadic(dir.path(), &["corpus", "synth", "--dyads", "2", "--seed", "8", "--out", "c"]);
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(checksum_line(&a), checksum_line(&b));
    assert_ne!(checksum_line(&a), checksum_line(&c));
    let rc: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("a/run_config.json")).unwrap()).unwrap();
    assert_eq!(rc["command"]["Corpus"]["Synth"]["seed"], 7);
}

#[test]
fn unknown_flag_exits_1_with_usage() {
    let dir = tempfile::tempdir().unwrap();
    let o = dyadic(dir.path(), &["corpus", "synth", "--frobnicate"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));
    assert_eq!(dyadic(dir.path(), &["--help"]).status.code(), Some(0));
}

#[test]
fn validation_and_runtime_errors_have_distinct_codes() {
    let dir = tempfile::tempdir().unwrap();
    dyadic(dir.path(), &["corpus", "synth", "--dyads", "4", "--seed", "1", "--out", "c"]);
    // move one test interaction's participant into a training interaction
    let path = dir.path().join("c/manifest.jsonl");
    let text = std::fs::read_to_string(&path).unwrap();
    let mut rows: Vec<Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    let test_row = rows.iter().find(|r| r["split"] == "test").unwrap().clone();
    let train = rows.iter_mut().find(|r| r["split"] == "train" && r["part"] == test_row["part"]).unwrap();
    let test_person = test_row["participant_a"].clone();
    train["participant_a"] = test_person;
    let planted: Vec<String> = rows.iter().map(|r| r.to_string()).collect();
    std::fs::write(&path, planted.join("\n")).unwrap();

    let o = dyadic(dir.path(), &["corpus", "validate", "--corpus", "c"]);
    assert_eq!(o.status.code(), Some(1));
    let err: Value = serde_json::from_slice(o.stderr.trim_ascii()).unwrap();
    assert_eq!(err["error"], "validation");

    let o = dyadic(dir.path(), &["corpus", "stats", "--corpus", "missing"]);
    assert_eq!(o.status.code(), Some(2));
    let err: Value = serde_json::from_slice(o.stderr.trim_ascii()).unwrap();
    assert_eq!(err["error"], "runtime");
}

#[test]
fn train_sample_evaluate_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    std::fs::write(root.join("tiny.json"), TINY).unwrap();
    let cfg = root.join("tiny.json");
    let cfg = cfg.to_str().unwrap();
    assert!(dyadic(root, &["corpus", "synth", "--dyads", "2", "--seed", "3", "--out", "c"]).status.success());
    let run = |args: &[&str]| {
        let o = dyadic(root, args);
        assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
        o
    };
    run(&["--config", cfg, "train", "--corpus", "c", "--mode", "monadic", "--target", "joint", "--seed", "1", "--out", "m"]);
    assert!(root.join("m/model.ckpt").exists() && root.join("m/run_config.json").exists());
    run(&["sample", "--corpus", "c", "--checkpoint", "m/model.ckpt", "--seed", "5", "--out", "g1"]);
    run(&["sample", "--corpus", "c", "--checkpoint", "m/model.ckpt", "--seed", "5", "--out", "g2"]);
    // same seed, same bytes
    for f in ["face.f32", "body.f32", "windows.jsonl"] {
        assert_eq!(std::fs::read(root.join("g1").join(f)).unwrap(), std::fs::read(root.join("g2").join(f)).unwrap());
    }
    let o = run(&["evaluate", "--corpus", "c", "--gen", "g1", "--gen", "g2", "--system", "Monadic Face+Body", "--out", "eval/r.json"]);
    let text = stdout(&o);
    assert!(text.contains("Monadic Face+Body") && text.contains("FFD") && text.contains("FGD"));
    let report: Value = serde_json::from_str(&std::fs::read_to_string(root.join("eval/r.json")).unwrap()).unwrap();
    assert_eq!(report["runs"].as_array().unwrap().len(), 2);

    // a cascade needs its second stage
    let o = dyadic(root, &["sample", "--corpus", "c", "--checkpoint", "m/model.ckpt", "--cascade", "face2body", "--seed", "1", "--out", "x"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn ablate_emits_the_six_standard_rows() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    std::fs::write(root.join("tiny.json"), TINY).unwrap();
    let cfg = root.join("tiny.json");
    assert!(dyadic(root, &["corpus", "synth", "--dyads", "2", "--seed", "3", "--out", "c"]).status.success());
    let o = dyadic(root, &["--config", cfg.to_str().unwrap(), "ablate", "--corpus", "c", "--runs", "2", "--seed", "1", "--out", "abl"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let systems = [
        "Dyadic Face2Body",
        "AV Dyadic Face2Body",
        "Dyadic Body2Face",
        "Monadic Face+Body",
        "Dyadic Face+Body",
        "AV Dyadic Face+Body",
    ];
    let lines: Vec<&str> = text.lines().collect();
    let header = lines.iter().position(|l| l.starts_with("System")).unwrap();
    let columns: Vec<&str> = lines[header].split_whitespace().collect();
    assert_eq!(columns, ["System", "Conditions", "FFD", "Sync-C", "Sync-D", "FID", "FGD", "Diversity"]);
    let body = &lines[header + 2..];
    assert_eq!(body.len(), 6);
    for (line, system) in body.iter().zip(systems) {
        assert!(line.starts_with(system), "{line}");
    }
    let report: Value = serde_json::from_str(&std::fs::read_to_string(root.join("abl/ablation.json")).unwrap()).unwrap();
    assert_eq!(report["table"]["rows"].as_array().unwrap().len(), 6);
    assert_eq!(report["runs"].as_array().unwrap().len(), 12);
    assert!(root.join("abl/ablation.txt").exists() && root.join("abl/run_config.json").exists());
}

#[test]
fn control_thresholds_are_ascending() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    dyadic(root, &["corpus", "synth", "--dyads", "2", "--seed", "3", "--out", "c"]);
    let o = dyadic(root, &["control", "fit-thresholds", "--corpus", "c", "--signal", "body-dynamism", "--buckets", "5", "--out", "b/spec.json"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let spec: Value = serde_json::from_str(&std::fs::read_to_string(root.join("b/spec.json")).unwrap()).unwrap();
    let t: Vec<f64> = spec["thresholds"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    assert_eq!(t.len(), 4);
    assert!(t.windows(2).all(|w| w[0] < w[1]));
}

#[test]
fn adapter_train_then_eval() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    let o = dyadic(root, &["adapter", "train", "--seed", "2", "--epochs", "8", "--width", "64", "--out", "ad"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let o = dyadic(root, &["adapter", "eval", "--checkpoint", "ad", "--seed", "2", "--out", "ad/eval.json"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let s: Value = serde_json::from_str(&std::fs::read_to_string(root.join("ad/eval.json")).unwrap()).unwrap();
    assert!(s["prf"]["f1"].as_f64().unwrap() > 0.5, "{s}");
    assert_eq!(dyadic(root, &["adapter", "eval", "--seed", "2"]).status.code(), Some(1));
}

#[test]
fn study_build_analyze_correlate() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    let samples: Vec<Value> = (0..6)
        .map(|i| {
            serde_json::json!({
                "sample_id": format!("s{i}"),
                "anchor": format!("anchor/s{i}.mp4"),
                "candidates": {"A": format!("A/s{i}.mp4"), "B": format!("B/s{i}.mp4")},
                "vad_segments": []
            })
        })
        .collect();
    std::fs::write(root.join("samples.json"), serde_json::to_string(&samples).unwrap()).unwrap();
    let o = dyadic(
        root,
        &["study", "build", "--samples", "samples.json", "--systems", "A,B", "--protocol", "body", "--study-id", "s1", "--seed", "4", "--log", "study/events.jsonl"],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("6 items"));
    // a second build over the same log refuses to clobber it
    let again = dyadic(
        root,
        &["study", "build", "--samples", "samples.json", "--systems", "A,B", "--protocol", "body", "--study-id", "s1", "--seed", "4", "--log", "study/events.jsonl"],
    );
    assert_ne!(again.status.code(), Some(0));

    // One rater prefers B by an amount that grows with the sample index,
    // and the metric advantage of B grows with it too.
    let log = root.join("study/events.jsonl");
    {
        let service = StudyService::open(&log).unwrap();
        service.register("r1", 0).unwrap();
        let items = service.read(|s| s.items().to_vec());
        let mut records = Vec::new();
        for it in &items {
            let k: i8 = it.sample_id[1..].parse().unwrap();
            let prefer_b = (k - 2).clamp(-2, 2);
            let value = if it.system_right == "B" { prefer_b } else { -prefer_b };
            for d in 1..=10 {
                records.push(RatingRecord {
                    item_id: it.item_id.clone(),
                    rater_id: "r1".into(),
                    dimension_id: d,
                    value,
                    timestamp: 1,
                    flags: Default::default(),
                });
            }
        }
        service.record_ratings(records).unwrap();
    }
    let o = dyadic(root, &["study", "analyze", "--log", "study/events.jsonl", "--out", "study/agg.json"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("ci95"));

    let scores = serde_json::json!({
        "A": (0..6).map(|i| (format!("s{i}"), 1.0)).collect::<std::collections::BTreeMap<_, f64>>(),
        "B": (0..6).map(|i| (format!("s{i}"), 1.0 + i as f64)).collect::<std::collections::BTreeMap<_, f64>>(),
    });
    std::fs::write(root.join("scores.json"), scores.to_string()).unwrap();
    let o = dyadic(root, &["study", "correlate", "--log", "study/events.jsonl", "--scores", "scores.json", "--dimension", "1", "--out", "study/corr.json"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let corr: Value = serde_json::from_str(&std::fs::read_to_string(root.join("study/corr.json")).unwrap()).unwrap();
    assert_eq!(corr["correlation"]["n"], 6);
    assert!(corr["correlation"]["spearman"]["value"].as_f64().unwrap() > 0.9);
}
