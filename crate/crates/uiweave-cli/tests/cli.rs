//! End-to-end runs of the installed binary: every subcommand against the
//! simulator backend, plus the exit-code contract.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn uiweave(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_uiweave"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(output: &Output) -> String {
    String::from_utf8_lossy(&output.stdout).into_owned()
}

fn stderr(output: &Output) -> String {
    String::from_utf8_lossy(&output.stderr).into_owned()
}

fn code(output: &Output) -> i32 {
    output.status.code().expect("no signal")
}

#[test]
fn synth_writes_the_ten_fixture_corpus() {
    let dir = tempfile::tempdir().unwrap();
    let out = uiweave(dir.path(), &["synth", "--seed", "1", "--out", "corpus"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let fixtures = fs::read_dir(dir.path().join("corpus")).unwrap().count();
    assert_eq!(fixtures, 10);
    assert!(dir.path().join("corpus/counter/page.html").is_file());
    assert!(dir.path().join("corpus/counter/manifest.json").is_file());
}

#[test]
fn synth_is_reproducible_for_a_seed() {
    let dir = tempfile::tempdir().unwrap();
    for out in ["a", "b"] {
        let run = uiweave(dir.path(), &["synth", "--seed", "9", "--out", out]);
        assert_eq!(code(&run), 0);
    }
    let left = fs::read_to_string(dir.path().join("a/tabs/page.html")).unwrap();
    let right = fs::read_to_string(dir.path().join("b/tabs/page.html")).unwrap();
    assert_eq!(left, right);
}

#[test]
fn explore_produces_the_run_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    uiweave(dir.path(), &["synth", "--seed", "1", "--out", "corpus"]);
    let out = uiweave(
        dir.path(),
        &["explore", "corpus/counter", "--policy", "oracle", "--out", "run"],
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(stdout(&out).contains("2 transitions (2 usable)"));
    assert!(dir.path().join("run/graph.json").is_file());
    assert!(dir.path().join("run/trace.json").is_file());
    assert!(dir.path().join("run/screenshots").is_dir());
}

#[test]
fn validate_splits_exit_codes_on_the_pass_rate() {
    let dir = tempfile::tempdir().unwrap();
    uiweave(dir.path(), &["synth", "--seed", "1", "--out", "corpus"]);
    let good = uiweave(dir.path(), &["validate", "corpus/toggle_panel"]);
    assert_eq!(code(&good), 0, "{}", stderr(&good));
    assert!(stdout(&good).contains("pass rate: 100.0%"));

    // Same fixture with its opening control made inert.
    let page_path = dir.path().join("corpus/toggle_panel/page.html");
    let page = fs::read_to_string(&page_path).unwrap();
    let broken = page.replacen("data-action=\"toggle\"", "data-broken=\"\"", 1);
    assert_ne!(page, broken);
    fs::write(&page_path, broken).unwrap();
    let bad = uiweave(dir.path(), &["validate", "corpus/toggle_panel"]);
    assert_eq!(code(&bad), 1);
    assert!(stdout(&bad).contains("FAIL"));
}

#[test]
fn eval_pipeline_scores_runs_against_manifests() {
    let dir = tempfile::tempdir().unwrap();
    uiweave(dir.path(), &["synth", "--seed", "1", "--out", "gold"]);
    for fixture in ["counter", "accordion"] {
        let out = uiweave(
            dir.path(),
            &[
                "explore",
                &format!("gold/{fixture}"),
                "--out",
                &format!("runs/{fixture}"),
            ],
        );
        assert_eq!(code(&out), 0, "{}", stderr(&out));
    }
    let out = uiweave(
        dir.path(),
        &["eval-pipeline", "runs", "gold", "--out", "report.json"],
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let table = stdout(&out);
    assert!(table.contains("overall"));
    assert!(table.contains("mean"));
    for line in table.lines().skip(1).take(3) {
        assert!(line.contains("100.00"), "perfect oracle run: {line}");
    }
    let report = fs::read_to_string(dir.path().join("report.json")).unwrap();
    let rows: serde_json::Value = serde_json::from_str(&report).unwrap();
    assert_eq!(rows.as_array().unwrap().len(), 3, "two runs plus the mean");
}

#[test]
fn eval_agent_scores_a_benchmark_directory() {
    let dir = tempfile::tempdir().unwrap();
    let bench = dir.path().join("bench");
    fs::create_dir_all(&bench).unwrap();
    let signature = |label: &str| {
        serde_json::json!({"tag": "button", "label": label, "scope": "/"})
    };
    let descriptor = |label: &str| {
        serde_json::json!({"kind": "Click", "signature": signature(label), "option": null})
    };
    // One sample hits half the gold set, the other all of it.
    fs::write(
        bench.join("s1.json"),
        serde_json::json!({
            "action": {
                "predicted": [descriptor("a")],
                "gold": [descriptor("a"), descriptor("b")],
            },
            "verification": {
                "predicted": [{"pass": true, "terminate": "Continue"}],
                "gold": [{"pass": true, "terminate": "Complete"}],
            },
        })
        .to_string(),
    )
    .unwrap();
    fs::write(
        bench.join("s2.json"),
        serde_json::json!({
            "action": {
                "predicted": [descriptor("a")],
                "gold": [descriptor("a")],
            },
        })
        .to_string(),
    )
    .unwrap();
    let out = uiweave(dir.path(), &["eval-agent", "bench", "--out", "agent.json"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("agent.json")).unwrap()).unwrap();
    assert_eq!(report["precision"], 100.0);
    assert_eq!(report["recall"], 75.0);
    assert!((report["f1"].as_f64().unwrap() - 83.3333).abs() < 0.01);
    assert_eq!(report["pass_acc"], 100.0);
    assert_eq!(report["terminate_acc"], 0.0);
    assert_eq!(report["overall_acc"], 50.0);
}

#[test]
fn export_writes_datasets_from_a_run() {
    let dir = tempfile::tempdir().unwrap();
    uiweave(dir.path(), &["synth", "--seed", "1", "--out", "corpus"]);
    uiweave(dir.path(), &["explore", "corpus/login_form", "--out", "run"]);
    let out = uiweave(
        dir.path(),
        &[
            "export",
            "run",
            "--page",
            "corpus/login_form/page.html",
            "--out",
            "data",
        ],
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    for name in ["action.jsonl", "verification.jsonl", "ui2code.jsonl"] {
        let body = fs::read_to_string(dir.path().join("data").join(name)).unwrap();
        assert!(!body.trim().is_empty(), "{name} has records");
        for line in body.lines() {
            let record: serde_json::Value = serde_json::from_str(line).unwrap();
            assert!(record["kind"].is_string());
        }
    }
}

#[test]
fn config_file_sets_values_and_flags_override_it() {
    let dir = tempfile::tempdir().unwrap();
    uiweave(dir.path(), &["synth", "--seed", "1", "--out", "corpus"]);
    fs::write(
        dir.path().join("run.conf"),
        "# benchmark setup\nbudget-actions = 1\nout = from-config\n",
    )
    .unwrap();
    let capped = uiweave(
        dir.path(),
        &["explore", "corpus/counter", "--config", "run.conf"],
    );
    assert_eq!(code(&capped), 0, "{}", stderr(&capped));
    assert!(stdout(&capped).contains("1 steps"), "{}", stdout(&capped));
    assert!(dir.path().join("from-config/graph.json").is_file());

    let overridden = uiweave(
        dir.path(),
        &[
            "explore",
            "corpus/counter",
            "--config",
            "run.conf",
            "--budget-actions",
            "200",
            "--out",
            "from-flag",
        ],
    );
    assert_eq!(code(&overridden), 0);
    assert!(stdout(&overridden).contains("2 steps"));
    assert!(dir.path().join("from-flag/graph.json").is_file());
}

#[test]
fn usage_errors_exit_two_and_domain_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let usage = uiweave(dir.path(), &["frobnicate"]);
    assert_eq!(code(&usage), 2);
    assert!(stderr(&usage).contains("Usage:"));

    let no_args = uiweave(dir.path(), &[]);
    assert_eq!(code(&no_args), 2);

    let missing = uiweave(dir.path(), &["explore", "nothing-here"]);
    assert_eq!(code(&missing), 1);
    assert!(stderr(&missing).contains("no page"));

    let bad_widget = uiweave(dir.path(), &["synth", "--widgets", "carousel"]);
    assert_eq!(code(&bad_widget), 1);
    assert!(stderr(&bad_widget).contains("unsupported widget"));

    let vlm_unconfigured = uiweave(dir.path(), &["explore", ".", "--policy", "vlm"]);
    assert_eq!(code(&vlm_unconfigured), 1);
    assert!(stderr(&vlm_unconfigured).contains("endpoint"));

    let bad_config = uiweave(dir.path(), &["synth", "--weight-dedup=-1"]);
    assert_eq!(code(&bad_config), 1, "validated before any side effect");
    assert!(!dir.path().join("corpus").exists());
}
