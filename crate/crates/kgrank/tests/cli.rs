mod common;

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use kgrank::write_records;
use kgrank_core::kf1;
use serde_json::Value;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn kgrank(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kgrank"))
        .args(args)
        .env_remove("PICK_SCORER_URL")
        .output()
        .unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn lines(path: &Path) -> Vec<Value> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

fn write_corpus(dir: &Path, name: &str, recs: &[kgrank::Record]) -> PathBuf {
    let path = dir.join(name);
    write_records(std::fs::File::create(&path).unwrap(), recs).unwrap();
    path
}

#[test]
fn table1_fixture_selects_the_knowledge_grounded_row() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out.jsonl");
    let o = kgrank(&[
        "rerank", "--input", p(&fixture("table1.jsonl")), "--output", p(&out),
        "--mock-scorer", "zero", "--faithfulness", "kf1", "--relevance-set", "none",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let got = lines(&out);
    assert_eq!(got.len(), 1);
    assert_eq!(got[0]["selected_index"], 1);
    assert_eq!(
        got[0]["selected_text"],
        "He has been named one of the greatest singers of all time by various media outlets"
    );
}

#[test]
fn mock_zero_kf1_selects_a_kf1_maximizer() {
    let dir = tempfile::tempdir().unwrap();
    let recs = common::synthetic_corpus(50, 11);
    let input = write_corpus(dir.path(), "in.jsonl", &recs);
    let out = dir.path().join("out.jsonl");
    let o = kgrank(&[
        "rerank", "--input", p(&input), "--output", p(&out), "--mock-scorer", "zero", "--faithfulness", "kf1",
        "--concurrency", "3",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for (rec, line) in recs.iter().zip(lines(&out)) {
        if line["fallback_used"].as_bool().unwrap() {
            continue;
        }
        let chosen = kf1(line["selected_text"].as_str().unwrap(), &rec.example.knowledge).f1;
        for (i, c) in rec.pool.candidates().iter().enumerate() {
            if !line["breakdowns"][i]["filtered"].as_bool().unwrap() {
                assert!(kf1(c, &rec.example.knowledge).f1 <= chosen);
            }
        }
    }
}

#[test]
fn usage_errors_exit_2() {
    let input = fixture("table1.jsonl");
    let cases: Vec<Vec<&str>> = vec![
        vec!["rerank", "--input", p(&input), "--faithfulness", "none", "--relevance-set", "none", "--mock-scorer", "zero"],
        // relevance on, no endpoint anywhere
        vec!["rerank", "--input", p(&input)],
        vec!["rerank", "--input", p(&input), "--faithfulness", "bleu9"],
        vec!["rerank", "--input", p(&input), "--mock-scorer", "zero", "--scorer-url", "http://x:1"],
        vec!["rerank", "--input", p(&input), "--scorer-url", "not a url"],
        vec!["rerank", "--input", p(&input), "--mock-scorer", "zero", "--concurrency", "0"],
        vec!["rerank", "--input", p(&input), "--strict", "--lenient", "--mock-scorer", "zero"],
        vec!["frobnicate"],
        vec!["eval", "--input", p(&input)],
    ];
    for args in cases {
        let o = kgrank(&args);
        assert_eq!(o.status.code(), Some(2), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    }
}

#[test]
fn environment_supplies_the_endpoint() {
    let svc = common::FakeService::start(common::neg_length_handler);
    let dir = tempfile::tempdir().unwrap();
    let out_http = dir.path().join("http.jsonl");
    let out_mock = dir.path().join("mock.jsonl");
    let input = p(&fixture("table1.jsonl")).to_string();
    let o = Command::new(env!("CARGO_BIN_EXE_kgrank"))
        .args(["rerank", "--input", &input, "--output", p(&out_http), "--relevance-set", "fed_all"])
        .env("PICK_SCORER_URL", &svc.base)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let o = kgrank(&[
        "rerank", "--input", &input, "--output", p(&out_mock), "--relevance-set", "fed_all", "--mock-scorer",
        "neg-length",
    ]);
    assert!(o.status.success());
    assert_eq!(std::fs::read(&out_http).unwrap(), std::fs::read(&out_mock).unwrap());
    assert!(svc.hits() >= 1);
}

#[test]
fn config_file_with_flag_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(
        &cfg,
        "scorer_endpoint = \"mock:neg-length\"\nmode = \"strict\"\n[scorer]\nfaithfulness_metric = \"none\"\nrelevance_set = \"fed_turn_basic\"\n",
    )
    .unwrap();
    let out = dir.path().join("out.jsonl");
    let input = fixture("table1.jsonl");
    let o = kgrank(&["rerank", "--input", p(&input), "--config", p(&cfg), "--output", p(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let first = lines(&out);
    assert!(first[0]["breakdowns"][0]["mu_k"].is_null());

    let o = kgrank(&[
        "rerank", "--input", p(&input), "--config", p(&cfg), "--output", p(&out), "--faithfulness", "kf1",
        "--relevance-set", "none",
    ]);
    assert!(o.status.success());
    let second = lines(&out);
    assert!(second[0]["breakdowns"][0]["mu_d"].is_null());
    assert_eq!(second[0]["selected_index"], 1);

    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "concurency = 3\n").unwrap();
    let o = kgrank(&["rerank", "--input", p(&input), "--config", p(&bad)]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn strict_failure_exits_1_and_lenient_continues() {
    let dir = tempfile::tempdir().unwrap();
    let mut recs = common::synthetic_corpus(5, 12);
    recs[2].example.knowledge = String::new();
    let input = write_corpus(dir.path(), "in.jsonl", &recs);
    let out = dir.path().join("out.jsonl");
    let base = ["rerank", "--input", p(&input), "--output", p(&out), "--mock-scorer", "zero", "--relevance-set", "none"];

    let mut args = base.to_vec();
    args.push("--strict");
    let o = kgrank(&args);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 3"));

    let o = kgrank(&base);
    assert_eq!(o.status.code(), Some(0));
    let got = lines(&out);
    assert_eq!(got.len(), 5);
    assert!(got[2]["error"].is_string());

    let o = kgrank(&["rerank", "--input", "/no/such/file.jsonl", "--mock-scorer", "zero"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn eval_of_gold_predictions_scores_100() {
    let dir = tempfile::tempdir().unwrap();
    let recs = common::synthetic_corpus(20, 13);
    let input = write_corpus(dir.path(), "test_seen.jsonl", &recs);
    let pred = dir.path().join("pred.jsonl");
    let body: String = recs
        .iter()
        .map(|r| {
            let v = serde_json::json!({"id": r.example.id, "selected_text": r.example.gold_response});
            format!("{v}\n")
        })
        .collect();
    std::fs::write(&pred, body).unwrap();
    let o = kgrank(&["eval", "--pred", p(&pred), "--input", p(&input)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(report["split"], "test_seen");
    assert_eq!(report["n"], 20);
    assert_eq!(report["bleu4"].as_f64().unwrap(), 100.0);
    assert_eq!(report["f1"].as_f64().unwrap(), 1.0);
    assert_eq!(report["rouge_l"].as_f64().unwrap(), 1.0);

    let o = kgrank(&["eval", "--pred", p(&pred), "--input", p(&input), "--format", "table"]);
    assert!(String::from_utf8_lossy(&o.stdout).contains("bleu4"));
}

#[test]
fn rerank_then_eval_then_compare() {
    let dir = tempfile::tempdir().unwrap();
    let recs = common::synthetic_corpus(40, 14);
    let input = write_corpus(dir.path(), "valid.jsonl", &recs);
    let reports = dir.path().join("reports");
    std::fs::create_dir(&reports).unwrap();

    let configs = [("none", "kf1"), ("fed_turn_basic", "kf1"), ("fed_turn_basic", "none"), ("fed_all", "rouge_l")];
    for (rel, faith) in configs {
        let pred = dir.path().join(format!("{rel}__{faith}.pred.jsonl"));
        let o = kgrank(&[
            "rerank", "--input", p(&input), "--output", p(&pred), "--mock-scorer", "neg-length", "--relevance-set",
            rel, "--faithfulness", faith,
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        let rep = reports.join(format!("{rel}__{faith}.json"));
        let o = kgrank(&["eval", "--pred", p(&pred), "--input", p(&input), "--output", p(&rep)]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let o = kgrank(&["eval", "--vanilla", "--input", p(&input)]);
    assert!(o.status.success());

    let o = kgrank(&["compare", "--reports", p(&reports), "--format", "json"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let grid: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(grid["entries"].as_array().unwrap().len(), 4);
    let o = kgrank(&["compare", "--reports", p(&reports)]);
    assert!(String::from_utf8_lossy(&o.stdout).contains("fed_turn_basic"));
}

fn report_file(dir: &Path, name: &str, m: [f64; 4]) {
    let v = serde_json::json!({
        "split": "test_seen", "n": 100, "bleu4": m[0], "rouge_l": m[1], "f1": m[2], "kf1": m[3],
        "kn_copy_rate": 0.1, "fallback_rate": 0.0
    });
    std::fs::write(dir.join(name), v.to_string()).unwrap();
}

#[test]
fn compare_needs_two_reports() {
    let dir = tempfile::tempdir().unwrap();
    report_file(dir.path(), "fed_all__kf1.json", [10.0, 0.3, 0.3, 0.7]);
    let o = kgrank(&["compare", "--reports", p(dir.path())]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("at least 2"));
}

#[test]
fn compare_four_reports_matches_z_oracle() {
    let dir = tempfile::tempdir().unwrap();
    // file order (sorted): a__kf1, b__kf1, c__none, d__rouge_l
    let ms = [
        [16.6, 0.341, 0.370, 0.737],
        [10.9, 0.317, 0.337, 0.547],
        [16.9, 0.345, 0.374, 0.811],
        [16.7, 0.345, 0.374, 0.804],
    ];
    let names = ["a__kf1.json", "b__kf1.json", "c__none.json", "d__rouge_l.json"];
    for (n, m) in names.iter().zip(ms) {
        report_file(dir.path(), n, m);
    }
    let o = kgrank(&["compare", "--reports", p(dir.path()), "--format", "json"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let grid: Value = serde_json::from_slice(&o.stdout).unwrap();
    let oracle = z_totals(&ms);
    for (e, want) in grid["entries"].as_array().unwrap().iter().zip(oracle) {
        assert!((e["total"].as_f64().unwrap() - want).abs() < 1e-7);
    }
    assert_eq!(grid["rows"], serde_json::json!(["a", "b", "c", "d"]));
    assert_eq!(grid["cols"], serde_json::json!(["kf1", "none", "rouge_l"]));
    assert!(grid["cells"][0][1].is_null());
}

/// Sum of population z-scores per row, written out independently of the
/// library.
fn z_totals(ms: &[[f64; 4]]) -> Vec<f64> {
    let n = ms.len() as f64;
    let mut totals = vec![0.0; ms.len()];
    for col in 0..4 {
        let mean: f64 = ms.iter().map(|m| m[col]).sum::<f64>() / n;
        let sd = (ms.iter().map(|m| (m[col] - mean).powi(2)).sum::<f64>() / n).sqrt();
        for (t, m) in totals.iter_mut().zip(ms) {
            *t += if sd > 0.0 { (m[col] - mean) / sd } else { 0.0 };
        }
    }
    totals
}
