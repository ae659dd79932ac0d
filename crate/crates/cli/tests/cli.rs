use std::fs;
use std::path::{Path, PathBuf};

use agroyield_cli::{run, ExitStatus};
use tempfile::TempDir;

fn agroyield(args: &[&str]) -> ExitStatus {
    run(std::iter::once("agroyield").chain(args.iter().copied()))
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn generate(dir: &Path, extra: &[&str]) -> PathBuf {
    let mut args = vec!["generate", "--out", s(dir)];
    args.extend_from_slice(extra);
    assert_eq!(agroyield(&args), ExitStatus::Success);
    dir.join("synthetic.csv")
}

#[test]
fn coverage_generation_has_one_row_per_triple() {
    let tmp = TempDir::new().unwrap();
    let csv = generate(tmp.path(), &["--n", "420", "--seed", "7", "--coverage"]);
    let text = fs::read_to_string(csv).unwrap();
    assert_eq!(text.lines().count(), 421);
}

#[test]
fn coverage_conflicting_with_n_is_a_usage_error() {
    let tmp = TempDir::new().unwrap();
    assert_eq!(agroyield(&["generate", "--out", s(tmp.path()), "--n", "10", "--coverage"]), ExitStatus::Usage);
}

#[test]
fn generation_is_deterministic_and_seed_sensitive() {
    let tmp = TempDir::new().unwrap();
    let a = fs::read(generate(&tmp.path().join("a"), &["--n", "50", "--seed", "3"])).unwrap();
    let b = fs::read(generate(&tmp.path().join("b"), &["--n", "50", "--seed", "3"])).unwrap();
    let c = fs::read(generate(&tmp.path().join("c"), &["--n", "50", "--seed", "4"])).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn flag_seed_beats_config_file_seed() {
    let tmp = TempDir::new().unwrap();
    let config = tmp.path().join("config.json");
    fs::write(&config, r#"{"seed": 42, "generate": {"n_records": 30}}"#).unwrap();
    let flagged = generate(&tmp.path().join("flag"), &["--config", s(&config), "--seed", "7"]);
    let plain = generate(&tmp.path().join("plain"), &["--n", "30", "--seed", "7"]);
    let from_file = generate(&tmp.path().join("file"), &["--config", s(&config)]);
    let file_seed = generate(&tmp.path().join("file_seed"), &["--n", "30", "--seed", "42"]);
    assert_eq!(fs::read(flagged).unwrap(), fs::read(plain).unwrap());
    assert_eq!(fs::read(from_file).unwrap(), fs::read(file_seed).unwrap());
}

#[test]
fn clean_removes_duplicate_and_logs_it() {
    let tmp = TempDir::new().unwrap();
    let src = generate(tmp.path(), &["--n", "5", "--seed", "1"]);
    let text = fs::read_to_string(&src).unwrap();
    let second = text.lines().nth(2).unwrap();
    let dup = tmp.path().join("dup.csv");
    fs::write(&dup, format!("{text}{second}\n")).unwrap();

    let out = tmp.path().join("clean");
    assert_eq!(agroyield(&["clean", "--data", s(&dup), "--out", s(&out)]), ExitStatus::Success);
    let cleaned = fs::read_to_string(out.join("cleaned.csv")).unwrap();
    assert_eq!(cleaned, text);
    let log = fs::read_to_string(out.join("cleaning_log.jsonl")).unwrap();
    assert_eq!(log.lines().collect::<Vec<_>>(), vec![r#"{"row":5,"reason":"duplicate of row 1"}"#]);
}

#[test]
fn usage_errors_exit_1() {
    let tmp = TempDir::new().unwrap();
    assert_eq!(agroyield(&["frobnicate"]), ExitStatus::Usage);
    assert_eq!(agroyield(&["train", "--model", "dnn"]), ExitStatus::Usage);
    assert_eq!(agroyield(&["train", "--model", "boosting", "--crop", "jute"]), ExitStatus::Usage);
    let bad = tmp.path().join("bad.json");
    fs::write(&bad, "{\"train_ratio\": 1.5}").unwrap();
    assert_eq!(agroyield(&["generate", "--config", s(&bad), "--out", s(tmp.path())]), ExitStatus::Usage);
    fs::write(&bad, "{\"train_ratio\": }").unwrap();
    assert_eq!(agroyield(&["generate", "--config", s(&bad), "--out", s(tmp.path())]), ExitStatus::Usage);
    let csv = generate(tmp.path(), &["--n", "60"]);
    assert_eq!(
        agroyield(&["report", "--data", s(&csv), "--ratio", "1.5", "--out", s(tmp.path())]),
        ExitStatus::Usage
    );
    assert_eq!(agroyield(&["plot-data", "--out", s(tmp.path())]), ExitStatus::Usage);
}

#[test]
fn data_errors_exit_2() {
    let tmp = TempDir::new().unwrap();
    let missing = tmp.path().join("missing.csv");
    assert_eq!(agroyield(&["clean", "--data", s(&missing), "--out", s(tmp.path())]), ExitStatus::Data);
    let junk = tmp.path().join("junk.csv");
    fs::write(&junk, "a,b,c\n1,2,3\n").unwrap();
    assert_eq!(agroyield(&["plot-data", "--data", s(&junk), "--out", s(tmp.path())]), ExitStatus::Data);
    let empty = tmp.path().join("empty.csv");
    fs::write(&empty, "").unwrap();
    assert_eq!(agroyield(&["clean", "--data", s(&empty), "--out", s(tmp.path())]), ExitStatus::Data);
}

#[test]
fn divergent_training_exits_3() {
    let tmp = TempDir::new().unwrap();
    let csv = generate(tmp.path(), &["--n", "420", "--coverage"]);
    let status = agroyield(&[
        "train", "--data", s(&csv), "--model", "dnn", "--crop", "jute", "--lr", "1e9", "--out", s(tmp.path()),
    ]);
    assert_eq!(status, ExitStatus::Training);
}

#[test]
fn train_evaluate_select_round_trip() {
    let tmp = TempDir::new().unwrap();
    let csv = generate(tmp.path(), &["--n", "840", "--seed", "2"]);
    let models = tmp.path().join("models");
    for crop in ["aus-rice", "aman_rice", "Boro rice", "wheat", "potato", "jute"] {
        let status = agroyield(&[
            "train", "--data", s(&csv), "--model", "forest", "--crop", crop, "--trees", "8", "--out", s(&models),
        ]);
        assert_eq!(status, ExitStatus::Success, "{crop}");
    }
    let status = agroyield(&[
        "train", "--data", s(&csv), "--model", "dnn", "--crop", "jute", "--epochs", "5", "--out", s(&models),
    ]);
    assert_eq!(status, ExitStatus::Success);
    let loss = fs::read_to_string(models.join("jute_dnn_loss.csv")).unwrap();
    assert!(loss.starts_with("epoch,train_mse,val_mse\n"));
    assert!(loss.lines().count() <= 6);

    let files: Vec<PathBuf> = ["ausrice", "amanrice", "bororice", "wheat", "potato", "jute"]
        .iter()
        .map(|c| models.join(format!("{c}_forest.json")))
        .collect();
    let mut args = vec!["evaluate", "--data", s(&csv), "--out", s(tmp.path())];
    args.extend(files.iter().map(|p| s(p)));
    assert_eq!(agroyield(&args), ExitStatus::Success);
    let eval: serde_json::Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("evaluation.json")).unwrap()).unwrap();
    let rows = eval.as_array().unwrap();
    assert_eq!(rows.len(), 6);
    for row in rows {
        let (acc, err) = (row["accuracy_pct"].as_f64().unwrap(), row["error_pct"].as_f64().unwrap());
        assert!((acc + err - 100.0).abs() < 1e-9);
        assert_eq!(row["n_test"].as_u64().unwrap(), 28);
    }

    let mut args = vec!["select", "--data", s(&csv), "--out", s(tmp.path())];
    args.extend(files.iter().map(|p| s(p)));
    assert_eq!(agroyield(&args), ExitStatus::Success);
    let picks: serde_json::Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("selection.json")).unwrap()).unwrap();
    assert_eq!(picks.as_array().unwrap().len(), 840);

    // Five models cannot cover six crops.
    let mut args = vec!["select", "--data", s(&csv), "--out", s(tmp.path())];
    args.extend(files[..5].iter().map(|p| s(p)));
    assert_eq!(agroyield(&args), ExitStatus::Usage);
}

#[test]
fn plot_data_writes_every_series() {
    let tmp = TempDir::new().unwrap();
    let csv = generate(tmp.path(), &["--n", "100"]);
    assert_eq!(agroyield(&["plot-data", "--data", s(&csv), "--out", s(tmp.path())]), ExitStatus::Success);
    for kind in ["max_temp", "min_temp", "avg_rainfall", "production", "yield"] {
        let text = fs::read_to_string(tmp.path().join(format!("plot_{kind}.csv"))).unwrap();
        assert!(text.starts_with("kind,district,year,crop,value\n"));
        assert!(text.lines().count() > 1);
    }
}

#[test]
fn report_writes_tables_and_models() {
    let tmp = TempDir::new().unwrap();
    let csv = generate(tmp.path(), &["--n", "420", "--coverage"]);
    let out = tmp.path().join("report");
    let status = agroyield(&[
        "report", "--data", s(&csv), "--epochs", "10", "--trees", "5", "--out", s(&out),
    ]);
    assert_eq!(status, ExitStatus::Success);
    let md = fs::read_to_string(out.join("report.md")).unwrap();
    assert_eq!(md.matches("| Method | Training (%) | Testing (%) | Accuracy (%) | MSE (%) |").count(), 6);
    assert_eq!(fs::read_dir(out.join("models")).unwrap().count(), 6 * 4 + 6);
}
