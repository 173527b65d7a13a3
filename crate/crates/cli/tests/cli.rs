use std::path::Path;
use std::process::{Command, Output};

fn citelink(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_citelink"))
        .current_dir(dir)
        .args(args)
        .env_remove("CITELINK_WORKERS")
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = citelink(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

const CONFIG: &str = r#"{
  "paths": {
    "records": "data/records.jsonl",
    "references": "data/references.jsonl",
    "gold": "data/gold.jsonl",
    "outputs": "out"
  },
  "eval": { "folds": 3 }
}"#;

fn workspace() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    ok(
        dir.path(),
        &[
            "synth",
            "--out",
            "data",
            "--n-records",
            "600",
            "--n-references",
            "50",
            "--n-matched",
            "32",
        ],
    );
    std::fs::write(dir.path().join("config.json"), CONFIG).unwrap();
    dir
}

fn read(dir: &Path, file: &str) -> Vec<u8> {
    std::fs::read(dir.join(file)).unwrap()
}

#[test]
fn full_workflow_is_deterministic() {
    let tmp = workspace();
    let dir = tmp.path();
    let c = ["-c", "config.json"];
    let stdout = ok(dir, &[&c[..], &["index"]].concat());
    assert!(stdout.contains("600 records indexed"), "{stdout}");
    ok(dir, &[&c[..], &["validate"]].concat());
    ok(dir, &[&c[..], &["block"]].concat());
    let candidates = read(dir, "out/candidates.jsonl");
    ok(dir, &[&c[..], &["featurize"]].concat());
    ok(dir, &[&c[..], &["train"]].concat());
    let model = read(dir, "out/model.json");
    ok(dir, &[&c[..], &["match"]].concat());
    let links = read(dir, "out/links.jsonl");

    // every artifact carries the configuration fingerprint
    let fingerprint = {
        let v: serde_json::Value = serde_json::from_slice(&read(dir, "out/schema.json")).unwrap();
        v["config_fingerprint"].as_str().unwrap().to_string()
    };
    assert_eq!(fingerprint.len(), 64);
    for file in ["out/candidates.jsonl", "out/pairs.jsonl", "out/model.json", "out/links.jsonl"] {
        let text = String::from_utf8(read(dir, file)).unwrap();
        assert!(text.contains(&fingerprint), "{file} lacks the fingerprint");
    }

    // rerunning reproduces every artifact byte for byte
    ok(dir, &[&c[..], &["block"]].concat());
    ok(dir, &[&c[..], &["featurize"]].concat());
    ok(dir, &[&c[..], &["train"]].concat());
    ok(dir, &[&c[..], &["match"]].concat());
    assert_eq!(read(dir, "out/candidates.jsonl"), candidates);
    assert_eq!(read(dir, "out/model.json"), model);
    assert_eq!(read(dir, "out/links.jsonl"), links);
}

#[test]
fn evaluate_writes_reports_and_curves() {
    let tmp = workspace();
    let dir = tmp.path();
    let stdout = ok(dir, &["-c", "config.json", "evaluate"]);
    assert!(stdout.contains("top-1"), "{stdout}");
    let report: serde_json::Value = serde_json::from_slice(&read(dir, "out/report.json")).unwrap();
    assert!(report["report"]["pairs"]["precision"].is_number());
    assert_eq!(report["curves"].as_array().unwrap().len(), 3);
    let csv = String::from_utf8(read(dir, "out/curves.csv")).unwrap();
    assert!(csv.lines().any(|l| l.starts_with("strings_only,1,")));
    assert!(csv.lines().any(|l| l.starts_with("combined,20,")));
}

#[test]
fn featurize_honors_groups_and_unlabeled_mode() {
    let tmp = workspace();
    let dir = tmp.path();
    ok(dir, &["-c", "config.json", "index"]);
    ok(dir, &["-c", "config.json", "--strategy", "strings_only", "block"]);
    ok(dir, &["-c", "config.json", "--groups", "B", "featurize", "--unlabeled"]);
    let manifest: serde_json::Value = serde_json::from_slice(&read(dir, "out/schema.json")).unwrap();
    assert_eq!(manifest["schema"], "v1:B");
    let features = manifest["features"].as_array().unwrap();
    assert_eq!(features.len(), 4);
    assert!(features.iter().all(|f| f["group"] == "B"));
    let pairs = String::from_utf8(read(dir, "out/pairs.jsonl")).unwrap();
    assert!(!pairs.contains("gold_label"));
    // unlabeled pairs cannot train a model
    let out = citelink(dir, &["-c", "config.json", "--groups", "B", "train"]);
    assert_eq!(code(&out), 1);
}

#[test]
fn input_errors_exit_with_one() {
    let tmp = workspace();
    let dir = tmp.path();
    let out = citelink(dir, &["-c", "config.json", "match"]);
    assert_eq!(code(&out), 1, "match without a model");

    std::fs::write(dir.join("bad.jsonl"), "{\"id\":\"a\",\"title\":\"x\"}\nnot json\n").unwrap();
    let out = citelink(dir, &["--records", "bad.jsonl", "index"]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains(":2:"), "line number reported");

    std::fs::write(
        dir.join("dup.jsonl"),
        "{\"id\":\"a\",\"title\":\"x\"}\n{\"id\":\"a\",\"title\":\"y\"}\n",
    )
    .unwrap();
    assert_eq!(code(&citelink(dir, &["--records", "dup.jsonl", "index"])), 1);

    let out = citelink(dir, &["--references", "data/references.jsonl", "--index", "missing.json", "block"]);
    assert_eq!(code(&out), 1, "block without an index");
}

#[test]
fn empty_records_give_an_empty_index() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(tmp.path().join("empty.jsonl"), "").unwrap();
    let stdout = ok(tmp.path(), &["--records", "empty.jsonl", "index"]);
    assert!(stdout.contains("0 records indexed"));
}

#[test]
fn configuration_errors_exit_with_two() {
    let tmp = workspace();
    let dir = tmp.path();
    std::fs::write(dir.join("typo.json"), r#"{"blocking":{"cutof":3}}"#).unwrap();
    assert_eq!(code(&citelink(dir, &["-c", "typo.json", "index"])), 2);
    assert_eq!(code(&citelink(dir, &["-c", "config.json", "--folds", "1", "evaluate"])), 2);
    assert_eq!(code(&citelink(dir, &["-c", "config.json", "--classifier", "knn", "train"])), 2);
    assert_eq!(code(&citelink(dir, &["index"])), 2, "no records path");
    assert_eq!(code(&citelink(dir, &["-c", "config.json", "--workers", "0", "index"])), 2);
}

#[test]
fn worker_count_comes_from_the_environment() {
    let tmp = workspace();
    let out = Command::new(env!("CARGO_BIN_EXE_citelink"))
        .current_dir(tmp.path())
        .args(["-c", "config.json", "index"])
        .env("CITELINK_WORKERS", "2")
        .output()
        .unwrap();
    assert!(out.status.success());
    let out = Command::new(env!("CARGO_BIN_EXE_citelink"))
        .current_dir(tmp.path())
        .args(["-c", "config.json", "index"])
        .env("CITELINK_WORKERS", "many")
        .output()
        .unwrap();
    assert_eq!(code(&out), 2);
}

#[test]
fn convert_produces_loadable_corpus() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    std::fs::write(
        dir.join("refs.tsv"),
        "r1\t<author><surname>Weber</surname>, <given-names>M.</given-names></author> (<year>1922</year>): \
         <title>Wirtschaft und Gesellschaft</title>. Tübingen.\n\
         r2\t<author><surname>Simmel</surname></author> (<year>1908</year>): <title>Soziologie</title>.\n",
    )
    .unwrap();
    std::fs::write(
        dir.join("records.csv"),
        "id,authors,title,source,source_abbrev,year,volume,issue,pages\n\
         d1,\"Weber, Max\",Wirtschaft und Gesellschaft,,,1922,,,\n\
         d2,\"Weber, Max\",Wirtschaft und Gesellschaft,,,1922,,,\n",
    )
    .unwrap();
    std::fs::write(dir.join("gold.csv"), "reference_id,record_id\nr1,d1\nr1,d2\nr2,\n").unwrap();
    let stdout = ok(
        dir,
        &[
            "convert",
            "--tagged-references",
            "refs.tsv",
            "--records-csv",
            "records.csv",
            "--gold-csv",
            "gold.csv",
            "--out",
            "corpus",
        ],
    );
    assert!(stdout.contains("2 references, 2 records, 2 gold entries"), "{stdout}");
    ok(
        dir,
        &[
            "--records",
            "corpus/records.jsonl",
            "--references",
            "corpus/references.jsonl",
            "--gold",
            "corpus/gold.jsonl",
            "validate",
        ],
    );
}
