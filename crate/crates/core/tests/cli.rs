mod common;

use std::process::Command;

use common::fixture;
use serde_json::Value;

fn herdsense(args: &[&str]) -> (Value, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_herdsense"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap();
    let stderr = String::from_utf8_lossy(&out.stderr).to_string();
    assert!(out.status.success(), "{args:?} failed: {stderr}");
    let stdout = String::from_utf8_lossy(&out.stdout);
    let value = if stdout.trim().is_empty() {
        Value::Null
    } else {
        serde_json::from_str(&stdout).unwrap()
    };
    (value, stderr)
}

#[test]
fn evaluate_classify() {
    let input = fixture("eval/classification_test.jsonl");
    let (report, table) = herdsense(&["evaluate", "classify", "--input", input.to_str().unwrap()]);
    assert_eq!(report["metrics"]["correct"], 439);
    assert_eq!(report["metrics"]["total"], 461);
    assert!(table.contains("accuracy 439/461"));
}

#[test]
fn evaluate_diagnose() {
    let input = fixture("eval/diagnosis_gpt-4o_validation.jsonl");
    let (report, table) = herdsense(&["evaluate", "diagnose", "--input", input.to_str().unwrap()]);
    assert_eq!(report["correct"], 46);
    assert_eq!(report["k"], 2);
    assert!(table.contains("top-2 accuracy 46/52"));
}

#[test]
fn evaluate_retrieve_with_significance() {
    let input = fixture("eval/rubric.jsonl");
    let (report, _) = herdsense(&[
        "evaluate", "retrieve", "--input", input.to_str().unwrap(), "--seed", "3", "--iterations", "50",
    ]);
    assert_eq!(report["rubric"]["rows"].as_array().unwrap().len(), 8);
    let fin = &report["significance"]["final"];
    assert_eq!(fin["n"], 80);
    assert!(fin["t_test"]["t"].as_f64().unwrap() > 0.0);
    assert_eq!(fin["bootstrap"]["iterations"], 50);
}

#[test]
fn ingest_then_chat() {
    let dir = tempfile::tempdir().unwrap();
    let store = dir.path().join("kb.hs");
    let corpus = fixture("demo/corpus.jsonl");
    let (_, msg) = herdsense(&[
        "ingest", "--corpus", corpus.to_str().unwrap(), "--store", store.to_str().unwrap(), "--dim", "256",
    ]);
    assert!(msg.contains("9 chunks in"), "{msg}");

    let config = dir.path().join("config.toml");
    std::fs::write(
        &config,
        format!("[store]\npath = {:?}\ndimension = 256\n", store.to_str().unwrap()),
    )
    .unwrap();
    let mut child = Command::new(env!("CARGO_BIN_EXE_herdsense"))
        .args(["chat", "--config", config.to_str().unwrap()])
        .env("RUST_LOG", "warn")
        .stdin(std::process::Stdio::piped())
        .stdout(std::process::Stdio::piped())
        .spawn()
        .unwrap();
    {
        use std::io::Write;
        let mut stdin = child.stdin.take().unwrap();
        writeln!(stdin, "{}", common::CONVERSATION.join("\n")).unwrap();
    }
    let out = child.wait_with_output().unwrap();
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("There is a small chance of ASF."), "{text}");
    assert!(text.contains("(ASF-2022.pdf)"));
    assert!(dir.path().join("sessions").is_dir());
}
