use std::path::Path;
use std::process::{Command, Output};

fn rfdis(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rfdis")).args(args).current_dir(dir).output().unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn workspace() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    let out = rfdis(&["generate", "complementary", "--n", "48", "--seed", "2"], dir.path());
    assert!(out.status.success(), "{}", stderr(&out));
    std::fs::write(
        dir.path().join("exp.toml"),
        "manifests = [\"complementary.toml\"]\ntrees = 8\nruns = 2\n",
    )
    .unwrap();
    dir
}

#[test]
fn validate_reports_row_mismatch_with_exit_2() {
    let dir = workspace();
    let ok = rfdis(&["validate", "complementary.toml"], dir.path());
    assert_eq!(ok.status.code(), Some(0), "{}", stderr(&ok));

    let view = dir.path().join("complementary_second.csv");
    let text = std::fs::read_to_string(&view).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    std::fs::write(&view, lines[..lines.len() - 1].join("\n") + "\n").unwrap();
    let bad = rfdis(&["validate", "complementary.toml"], dir.path());
    assert_eq!(bad.status.code(), Some(2));
    let err = stderr(&bad);
    assert_eq!(err.lines().count(), 1, "{err}");
    assert!(err.starts_with("rfdis: error kind="), "{err}");
    assert!(err.contains("exit=2") && err.contains("second"), "{err}");
}

#[test]
fn missing_files_and_bad_flags() {
    let dir = workspace();
    assert_eq!(rfdis(&["validate", "nope.toml"], dir.path()).status.code(), Some(2));
    assert_eq!(rfdis(&["frobnicate"], dir.path()).status.code(), Some(1));
    assert_eq!(rfdis(&["bench", "exp.toml", "--method", "best"], dir.path()).status.code(), Some(1));
    assert_eq!(rfdis(&["bench", "exp.toml", "--k", "0"], dir.path()).status.code(), Some(1));
    assert_eq!(rfdis(&["--help"], dir.path()).status.code(), Some(0));
}

#[test]
fn bench_writes_one_row_per_method() {
    let dir = workspace();
    let out = rfdis(&["bench", "exp.toml", "--method", "avg,dcs_rfd", "--out", "two"], dir.path());
    assert!(out.status.success(), "{}", stderr(&out));
    let csv = std::fs::read_to_string(dir.path().join("two.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 2);
    assert!(rows[0].starts_with("complementary,avg,2,"));
    assert!(rows[1].starts_with("complementary,dcs_rfd,2,"));
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("two.json")).unwrap()).unwrap();
    assert_eq!(json["datasets"][0]["methods"].as_array().unwrap().len(), 2);
    assert_eq!(String::from_utf8_lossy(&out.stdout), csv);
}

#[test]
fn trained_models_predict_saved_instances() {
    let dir = workspace();
    for method in ["sw_ka", "dcs_rfd"] {
        let model = format!("{method}.json");
        let train = rfdis(&["train", "exp.toml", "--method", method, "--out", &model], dir.path());
        assert!(train.status.success(), "{}", stderr(&train));
        let out = format!("{method}.csv");
        let predict = rfdis(&["predict", &model, "complementary.toml", "--out", &out], dir.path());
        assert!(predict.status.success(), "{}", stderr(&predict));
        let csv = std::fs::read_to_string(dir.path().join(&out)).unwrap();
        let mut lines = csv.lines();
        let header = lines.next().unwrap();
        assert!(header.starts_with("instance,class"));
        assert_eq!(header.contains("chosen_views"), method == "dcs_rfd");
        assert_eq!(lines.count(), 48);
        assert!(stderr(&predict).contains("accuracy"));
    }
}

#[test]
fn inspect_exports_matrices_and_transcripts() {
    let dir = workspace();
    let out = rfdis(&["inspect", "exp.toml", "--run", "1", "--out", "look"], dir.path());
    assert!(out.status.success(), "{}", stderr(&out));
    let look = dir.path().join("look");
    for file in ["matrix_first.csv", "matrix_second.csv", "summary.json", "transcript.jsonl"] {
        assert!(look.join(file).exists(), "{file}");
    }
    let matrix = std::fs::read_to_string(look.join("matrix_first.csv")).unwrap();
    let rows: Vec<&str> = matrix.lines().collect();
    assert!(rows[0].starts_with("id,"));
    assert_eq!(rows.len(), 1 + 24);
    assert!(rows.iter().all(|r| r.split(',').count() == 1 + 24));
    let transcript = std::fs::read_to_string(look.join("transcript.jsonl")).unwrap();
    assert_eq!(transcript.lines().count(), 24);
    for line in transcript.lines() {
        serde_json::from_str::<serde_json::Value>(line).unwrap();
    }
}
