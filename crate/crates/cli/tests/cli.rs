use std::path::Path;
use std::process::{Command, Output};

fn discriminer(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_discriminer"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("spawn discriminer")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn small_lsb0(dir: &Path) {
    let out = discriminer(
        dir,
        &[
            "benchgen", "--family", "lsb0", "--bits", "6", "--inputs", "60", "--seed", "3",
            "--out", "c.jsonl",
        ],
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let out = discriminer(
        dir,
        &[
            "cluster", "--input", "c.jsonl", "--k", "auto", "--seed", "3", "--out", "cl.json",
        ],
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
}

#[test]
fn help_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let out = discriminer(dir.path(), &["--help"]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8_lossy(&out.stdout);
    for sub in [
        "benchgen",
        "cluster",
        "learn-dtree",
        "learn-mlc",
        "eval",
        "report",
    ] {
        assert!(text.contains(sub), "help lacks {sub}");
    }
}

#[test]
fn usage_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        &["frobnicate"][..],
        &["benchgen", "--family", "pat", "--inputs", "10"],
        &[
            "benchgen",
            "--family",
            "lsb0",
            "--pattern",
            "101",
            "--inputs",
            "10",
        ],
        &[
            "benchgen",
            "--family",
            "pat",
            "--pattern",
            "1x1",
            "--inputs",
            "10",
        ],
        &["cluster", "--input", "c.jsonl", "--k", "zero"],
        &[
            "eval",
            "--input",
            "c.jsonl",
            "--labels",
            "l.json",
            "--learner",
            "svm",
        ],
    ] {
        let out = discriminer(dir.path(), args);
        assert_eq!(code(&out), 1, "{args:?}: {}", stderr(&out));
    }
}

#[test]
fn malformed_corpus_line_exits_two_with_line_number() {
    let dir = tempfile::tempdir().unwrap();
    let good = r#"{"id":"a","counts":{"f":1},"timings_s":[0.1]}"#;
    std::fs::write(
        dir.path().join("c.jsonl"),
        format!("{good}\n{{\"id\": \"b\", \"counts\": \n"),
    )
    .unwrap();
    let out = discriminer(
        dir.path(),
        &["cluster", "--input", "c.jsonl", "--out", "cl.json"],
    );
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("line 2"), "{}", stderr(&out));
    assert!(!dir.path().join("cl.json").exists());
    assert!(!dir.path().join("cl.csv").exists());
}

#[test]
fn labels_for_another_corpus_write_nothing() {
    let dir = tempfile::tempdir().unwrap();
    small_lsb0(dir.path());
    let other = r#"{"id":"zzz","counts":{"f":1},"timings_s":[0.1]}"#;
    std::fs::write(dir.path().join("other.jsonl"), format!("{other}\n")).unwrap();
    let out = discriminer(
        dir.path(),
        &[
            "learn-dtree",
            "--input",
            "other.jsonl",
            "--labels",
            "cl.json",
            "--out",
            "t.json",
            "--dot",
            "t.dot",
        ],
    );
    assert_eq!(code(&out), 2, "{}", stderr(&out));
    assert!(!dir.path().join("t.json").exists());
    assert!(!dir.path().join("t.dot").exists());
}

#[test]
fn too_many_folds_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    small_lsb0(dir.path());
    let out = discriminer(
        dir.path(),
        &[
            "eval",
            "--input",
            "c.jsonl",
            "--labels",
            "cl.json",
            "--learner",
            "dtree",
            "--k",
            "61",
        ],
    );
    assert_eq!(code(&out), 2, "{}", stderr(&out));
}

#[test]
fn full_pipeline_produces_every_artifact() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    small_lsb0(d);
    let csv = std::fs::read_to_string(d.join("cl.csv")).unwrap();
    assert!(csv.starts_with("trace_id,mean_s,std_s,cluster\n"));
    assert_eq!(csv.lines().count(), 61);

    let steps: &[&[&str]] = &[
        &[
            "learn-dtree",
            "--input",
            "c.jsonl",
            "--labels",
            "cl.json",
            "--out",
            "t.json",
            "--dot",
            "t.dot",
        ],
        &[
            "learn-mlc",
            "--input",
            "c.jsonl",
            "--labels",
            "cl.json",
            "--out",
            "m.json",
            "--time-limit-s",
            "30",
        ],
        &[
            "eval",
            "--input",
            "c.jsonl",
            "--labels",
            "cl.json",
            "--learner",
            "dtree",
            "--k",
            "20",
            "--seed",
            "3",
            "--out",
            "report.json",
        ],
        &[
            "report",
            "--labels",
            "cl.json",
            "--model",
            "m.json",
            "--eval",
            "report.json",
            "--out",
            "summary.txt",
        ],
    ];
    for args in steps {
        let out = discriminer(d, args);
        assert_eq!(code(&out), 0, "{args:?}: {}", stderr(&out));
    }

    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(d.join("report.json")).unwrap()).unwrap();
    let acc = report["accuracy"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&acc));
    assert_eq!(report["folds"].as_array().unwrap().len(), 20);
    assert_eq!(report["fold_of"].as_object().unwrap().len(), 60);

    let tree: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(d.join("t.json")).unwrap()).unwrap();
    assert!(tree["tree"]["nodes"].is_array());
    assert_eq!(tree["report"]["learner"], "dtree");

    let mlc: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(d.join("m.json")).unwrap()).unwrap();
    assert_eq!(mlc["report"]["optimal"], true);
    let formulas = mlc["report"]["discriminant"].as_array().unwrap();
    assert_eq!(formulas.last().unwrap()["terms"], serde_json::json!([]));

    let dot = std::fs::read_to_string(d.join("t.dot")).unwrap();
    assert!(dot.starts_with("digraph"));
    let summary = std::fs::read_to_string(d.join("summary.txt")).unwrap();
    assert!(summary.contains("cross-validation"));
    assert!(summary.contains("discriminant: mlc (optimal)"));
}

#[test]
fn stdout_when_no_out() {
    let dir = tempfile::tempdir().unwrap();
    let out = discriminer(
        dir.path(),
        &[
            "benchgen",
            "--family",
            "msb0",
            "--bits",
            "4",
            "--inputs",
            "5",
            "--repeats",
            "2",
        ],
    );
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 5);
    for line in text.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert_eq!(v["timings_s"].as_array().unwrap().len(), 2);
    }
}

#[test]
fn same_seed_same_corpus() {
    let dir = tempfile::tempdir().unwrap();
    let gen = |seed: &str| {
        discriminer(
            dir.path(),
            &[
                "benchgen",
                "--family",
                "pat",
                "--pattern",
                "101",
                "--bits",
                "12",
                "--inputs",
                "30",
                "--seed",
                seed,
            ],
        )
        .stdout
    };
    assert_eq!(gen("9"), gen("9"));
    assert_ne!(gen("9"), gen("10"));
}
