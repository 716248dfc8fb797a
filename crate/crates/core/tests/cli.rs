use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use faceveil::detector::{BuiltinDetector, DetectorConfig};
use faceveil::evaluation::{evaluate, Corpus, EvalReport, ScoringOptions};
use faceveil::filters::FilterSpec;

fn asset(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("assets").join(rel)
}

fn faceveil(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_faceveil")).args(args).output().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

#[test]
fn identity_filter_copies_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("identity.json");
    std::fs::write(&spec, r#"{"kind": "identity"}"#).unwrap();
    let input = asset("minicorpus/images/face_01.png");
    let out = dir.path().join("out.png");
    let o = faceveil(&["filter", "--spec", s(&spec), s(&input), s(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(std::fs::read(&out).unwrap(), std::fs::read(&input).unwrap());
}

#[test]
fn filter_needs_context_for_censor() {
    let dir = tempfile::tempdir().unwrap();
    let input = asset("minicorpus/images/face_01.png");
    let out = dir.path().join("out.png");
    let o = faceveil(&["filter", "--spec", r#"{"kind": "censor"}"#, s(&input), s(&out)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("context"));
    let o = faceveil(&[
        "filter", "--spec", r#"{"kind": "censor"}"#, "--eyes", "40,40,70,40", "--face-box", "25,20,65,65", s(&input), s(&out),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(out.exists());
}

#[test]
fn detect_prints_one_box_for_the_fixture() {
    let o = faceveil(&["detect", s(&asset("minicorpus/images/face_01.png"))]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let dets = v["detections"].as_array().unwrap();
    assert_eq!(dets.len(), 1);
    let b: Vec<f64> = dets[0]["box"].as_array().map_or_else(
        || ["x", "y", "w", "h"].iter().map(|k| dets[0]["box"][k].as_f64().unwrap()).collect(),
        |a| a.iter().map(|x| x.as_f64().unwrap()).collect(),
    );
    let expected = [27.0, 18.8, 63.6, 63.6];
    for (got, want) in b.iter().zip(expected) {
        assert!((got - want).abs() < 0.05, "{b:?}");
    }
}

#[test]
fn sweep_with_empty_grid_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sweep.json");
    std::fs::write(&cfg, r#"{"filter": "noise", "grid": {}}"#).unwrap();
    let o = faceveil(&["sweep", "--config", s(&cfg), "--manifest", s(&asset("minicorpus/faces.jsonl"))]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("empty grid"));
}

#[test]
fn unknown_subcommand_and_missing_files() {
    let o = faceveil(&["frobnicate"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(!stderr(&o).is_empty());
    assert_eq!(faceveil(&["detect", "/nonexistent.png"]).status.code(), Some(2));
    assert_eq!(faceveil(&["--help"]).status.code(), Some(0));
}

#[test]
fn eval_matches_library_call() {
    let manifest = asset("minicorpus/faces.jsonl");
    let spec = r#"{"kind": "blur", "params": {"sigma": 2.0}}"#;
    let o = faceveil(&["eval", "--manifest", s(&manifest), "--spec", spec]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let cli = EvalReport::from_json(&stdout(&o)).unwrap();

    let corpus = Corpus::load(&[&manifest]).unwrap();
    let det = BuiltinDetector::bundled(DetectorConfig::default()).unwrap();
    let lib = evaluate(&corpus, &FilterSpec::from_json(spec).unwrap(), &det, &ScoringOptions::default()).unwrap();
    assert_eq!(cli, lib);
    assert_eq!(stdout(&o).trim_end(), lib.to_json());
}

#[test]
fn sweep_is_byte_identical_and_report_rerenders() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sweep.json");
    let manifest = asset("minicorpus/faces.jsonl");
    let text = serde_json::json!({
        "filter": "noise",
        "grid": {"sigma": [0, 50]},
        "seeds": [1, 2],
        "corpus": [manifest],
    });
    std::fs::write(&cfg, text.to_string()).unwrap();
    let (a, b) = (dir.path().join("a.json"), dir.path().join("b.json"));
    for out in [&a, &b] {
        let o = faceveil(&["sweep", "--config", s(&cfg), "-o", s(out)]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());

    let o = faceveil(&["report", s(&a), "--format", "csv"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).lines().count(), 2 * 2 + 1);
    let o = faceveil(&["report", s(&a), "--format", "plot"]);
    let plot: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(plot.as_array().unwrap().len(), 2);
}

#[test]
fn timestamp_is_opt_in() {
    let manifest = asset("minicorpus/faces.jsonl");
    let o = faceveil(&["eval", "--manifest", s(&manifest), "--spec", r#"{"kind": "identity"}"#, "--timestamp"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(EvalReport::from_json(&stdout(&o)).unwrap().provenance.generated_at.is_some());
}
