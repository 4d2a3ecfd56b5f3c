use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};
use spanshift::model::{read_dataset, validate_spans, write_dataset};
use spanshift::{AnswerSpan, Article, Dataset, Paragraph, QaItem};

fn spanshift(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spanshift")).current_dir(dir).args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn sample_dataset() -> Dataset {
    let c1 = "The river rises in 1947 hills. It flows north to the sea.";
    let c2 = "Nobody lives here. The town was abandoned long ago.";
    Dataset::new(vec![
        Article::new(
            "Rivers",
            vec![Paragraph::new(
                c1,
                vec![
                    QaItem::answerable("r1", "Where does it rise?", vec![AnswerSpan::new("1947 hills", 19)]),
                    QaItem::answerable("r2", "Which way does it flow?", vec![AnswerSpan::new("north", 40)]),
                ],
            )],
        ),
        Article::new(
            "Towns",
            vec![Paragraph::new(
                c2,
                vec![
                    QaItem::answerable("t1", "What happened to the town?", vec![AnswerSpan::new("abandoned", 32)]),
                    QaItem::impossible("t2", "Who is the mayor?"),
                ],
            )],
        ),
    ])
}

fn setup() -> (tempfile::TempDir, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("in.json");
    let ds = sample_dataset();
    assert!(validate_spans(&ds).is_empty());
    write_dataset(&input, &ds).unwrap();
    (dir, input)
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn identity_translation_succeeds() {
    let (dir, _) = setup();
    let out = spanshift(dir.path(), &["translate", "--input", "in.json", "--output", "out.json", "--report", "r.json"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let ds = read_dataset(dir.path().join("out.json")).unwrap();
    assert_eq!(ds.qa_count(), 4);
    assert!(validate_spans(&ds).is_empty());
    let answer = &ds.qas().next().unwrap().2.answers[0];
    assert_eq!(answer.text, "१९४७ hills");
    let report = read_json(&dir.path().join("r.json"));
    assert_eq!(report["summary"]["output_qas"], 4);
    assert_eq!(report["failures"], json!([]));
}

#[test]
fn failures_exit_with_two_and_are_reported() {
    let (dir, _) = setup();
    std::fs::write(dir.path().join("dict.tsv"), "north\t\nabandoned\tसोडलेले\n").unwrap();
    let out = spanshift(
        dir.path(),
        &[
            "translate",
            "--input",
            "in.json",
            "--output",
            "out.json",
            "--backend",
            "dict:dict.tsv",
            "--report",
            "r.json",
            "--jobs",
            "2",
        ],
    );
    assert_eq!(code(&out), 2, "{}", stderr(&out));
    let report = read_json(&dir.path().join("r.json"));
    assert_eq!(report["failures"][0]["qa_id"], "r2");
    assert_eq!(report["failures"][0]["stage"], "alignment");
    assert_eq!(report["summary"]["failed_qas"], 1);
    let ds = read_dataset(dir.path().join("out.json")).unwrap();
    assert_eq!(ds.qa_count(), 3);
    let t1 = ds.qas().find(|(_, _, q)| q.id == "t1").unwrap().2;
    assert_eq!(t1.answers[0].text, "सोडलेले");
}

#[test]
fn fatal_errors_exit_with_one() {
    let (dir, _) = setup();
    std::fs::write(dir.path().join("broken.json"), "{\"version\": ").unwrap();
    let cases: [&[&str]; 6] = [
        &["translate", "--input", "missing.json", "--output", "o.json"],
        &["translate", "--input", "broken.json", "--output", "o.json"],
        &["translate", "--input", "in.json", "--output", "o.json", "--backend", "carrier-pigeon"],
        &["translate", "--input", "in.json"],
        &["translate", "--input", "in.json", "--output", "o.json", "--jobs", "many"],
        &["frobnicate"],
    ];
    for args in cases {
        let out = spanshift(dir.path(), args);
        assert_eq!(code(&out), 1, "{args:?}: {}", stderr(&out));
    }
    assert_eq!(code(&spanshift(dir.path(), &["--help"])), 0);
}

#[test]
fn config_file_supplies_defaults_and_flags_win() {
    let (dir, _) = setup();
    std::fs::write(
        dir.path().join("cfg.toml"),
        "input = \"in.json\"\noutput = \"from-config.json\"\nbackend = \"dict:nowhere.tsv\"\njobs = 3\nno_digits = true\n",
    )
    .unwrap();
    // the config's backend file does not exist, so the flag must win
    let out = spanshift(dir.path(), &["--config", "cfg.toml", "translate", "--backend", "identity"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let ds = read_dataset(dir.path().join("from-config.json")).unwrap();
    assert_eq!(ds.qas().next().unwrap().2.answers[0].text, "1947 hills");
    assert_eq!(code(&spanshift(dir.path(), &["--config", "cfg.toml", "translate"])), 1);

    std::fs::write(dir.path().join("bad.toml"), "jobz = 2\n").unwrap();
    assert_eq!(code(&spanshift(dir.path(), &["--config", "bad.toml", "stats"])), 1);
}

#[test]
fn cache_makes_reruns_free() {
    let (dir, _) = setup();
    let args = ["translate", "--input", "in.json", "--output", "o.json", "--cache", "c.jsonl", "--report", "r.json"];
    assert_eq!(code(&spanshift(dir.path(), &args)), 0);
    let first = read_json(&dir.path().join("r.json"));
    assert!(first["summary"]["backend_calls"].as_u64().unwrap() > 0);
    let before = std::fs::read(dir.path().join("o.json")).unwrap();
    assert_eq!(code(&spanshift(dir.path(), &args)), 0);
    let second = read_json(&dir.path().join("r.json"));
    assert_eq!(second["summary"]["backend_calls"], 0);
    assert_eq!(second["summary"]["cache_hits"], first["summary"]["backend_calls"]);
    assert_eq!(std::fs::read(dir.path().join("o.json")).unwrap(), before);
}

#[test]
fn stats_and_validate() {
    let (dir, _) = setup();
    let out = spanshift(dir.path(), &["stats", "--input", "in.json"]);
    assert_eq!(code(&out), 0);
    let stats: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(
        stats,
        json!({"article_count": 2, "paragraph_count": 2, "qa_count": 4, "answerable_count": 3, "unanswerable_count": 1})
    );

    assert_eq!(code(&spanshift(dir.path(), &["validate", "--input", "in.json"])), 0);
    let mut ds = sample_dataset();
    ds.data[0].paragraphs[0].qas[1].answers[0].answer_start = 39;
    write_dataset(dir.path().join("shifted.json"), &ds).unwrap();
    let out = spanshift(dir.path(), &["validate", "--input", "shifted.json", "--report", "v.json"]);
    assert_eq!(code(&out), 2);
    let report = read_json(&dir.path().join("v.json"));
    assert_eq!(report["spans"][0]["qa_id"], "r2");
    assert_eq!(report["spans"][0]["actual"], " nort");

    let mut ds = sample_dataset();
    ds.data[1].paragraphs[0].qas[1].id = "t1".into();
    write_dataset(dir.path().join("dup.json"), &ds).unwrap();
    let out = spanshift(dir.path(), &["validate", "--input", "dup.json"]);
    assert_eq!(code(&out), 2);
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(report["structural"][0].as_str().unwrap().contains("duplicate id"));
}

#[test]
fn sample_gold_and_evaluate() {
    let (dir, _) = setup();
    let out =
        spanshift(dir.path(), &["sample-gold", "--input", "in.json", "--output", "s.json", "--n", "2", "--seed", "5"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let first = std::fs::read(dir.path().join("s.json")).unwrap();
    assert_eq!(read_dataset(dir.path().join("s.json")).unwrap().qa_count(), 2);
    spanshift(dir.path(), &["sample-gold", "--input", "in.json", "--output", "s.json", "--n", "2", "--seed", "5"]);
    assert_eq!(std::fs::read(dir.path().join("s.json")).unwrap(), first);
    assert_eq!(
        code(&spanshift(dir.path(), &["sample-gold", "--input", "in.json", "--output", "s.json", "--n", "5"])),
        1
    );

    std::fs::write(
        dir.path().join("p.json"),
        json!({"r1": "1947 hills", "r2": "north", "t1": "abandoned", "t2": ""}).to_string(),
    )
    .unwrap();
    let out = spanshift(dir.path(), &["evaluate", "--input", "in.json", "--predictions", "p.json"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!((report["em"].as_f64(), report["f1"].as_f64()), (Some(100.0), Some(100.0)));

    std::fs::write(dir.path().join("p.json"), json!({"r1": "1947 hills"}).to_string()).unwrap();
    let out =
        spanshift(dir.path(), &["evaluate", "--input", "in.json", "--predictions", "p.json", "--report", "e.json"]);
    assert_eq!(code(&out), 2);
    assert_eq!(read_json(&dir.path().join("e.json"))["missing"], json!(["r2", "t1", "t2"]));
}
