use std::path::Path;
use std::process::{Command, Output};

use pair_core::simulation::{Recipe, Source, Stratum};
use pair_toolkit::formats;

const SMALL: &str = r#"
betas = [0.2]
seeds = [1, 2]
[split]
train = 80
dev = 20
test = 20
[gold]
source = "synthetic"
n = 120
shape = { kind = "uniform", lo = 0.0, hi = 1.0 }
vocab_size = 60
tokens_per_item = 30
seed = 4
"#;

fn pair(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pair"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write_config(dir: &Path, body: &str) -> std::path::PathBuf {
    let file = dir.join("config.toml");
    std::fs::write(&file, body).unwrap();
    file
}

#[test]
fn simulate_adjust_train_evaluate() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let config = write_config(d, SMALL);

    let out = pair(&[
        "simulate",
        "--config",
        path(&config),
        "--beta",
        "0.3",
        "--out",
        path(d),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    for f in [
        "gold.jsonl",
        "representative.jsonl",
        "nonrep1.jsonl",
        "nonrep2.jsonl",
        "benchmark.json",
    ] {
        assert!(d.join(f).exists(), "{f}");
    }

    let adjusted = d.join("adjusted.jsonl");
    let out = pair(&[
        "adjust",
        "--dataset",
        path(&d.join("nonrep1.jsonl")),
        "--benchmark",
        path(&d.join("benchmark.json")),
        "--out",
        path(&adjusted),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let data = formats::load_dataset(&adjusted).unwrap();
    assert_eq!(data.meta.recipe, Recipe::Adjusted);
    assert_eq!(data.len(), 120 * 12);
    let replicas = data.records.iter().filter(|r| r.source == Source::Replica);
    assert!(replicas.clone().all(|r| r.stratum_id == Stratum::from("B")));
    assert_eq!(replicas.count(), 120 * 3);
    let weights = formats::load_weights(&d.join("adjusted.weights.json")).unwrap();
    assert_eq!(weights.k, Some(4.0 / 3.0));

    let model = d.join("model.json");
    let out = pair(&[
        "train",
        "--dataset",
        path(&adjusted),
        "--gold",
        path(&d.join("gold.jsonl")),
        "--seed",
        "5",
        "--epochs",
        "3",
        "--out",
        path(&model),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let trained = formats::load_model(&model).unwrap();
    assert_eq!(trained.hyper.epochs, 3);
    assert_eq!(trained.seed, 5);

    let out = pair(&[
        "evaluate",
        "--model",
        path(&model),
        "--gold",
        path(&d.join("gold.jsonl")),
        "--dataset",
        path(&adjusted),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let summary: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(summary["n_items"], 120);
    let acb = summary["acb"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&acb));
    assert!(summary["positive_proportion"].as_f64().is_some());
}

#[test]
fn sweep_then_report() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let config = write_config(d, SMALL);
    let results = d.join("results");

    let out = pair(&[
        "sweep",
        "--config",
        path(&config),
        "--out",
        path(&results),
        "--workers",
        "2",
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let report = std::fs::read_to_string(results.join("report.csv")).unwrap();
    assert_eq!(report.lines().filter(|l| l.starts_with("run,")).count(), 8);
    assert_eq!(report.lines().filter(|l| l.starts_with("mean,")).count(), 4);
    assert!(results.join("timings.csv").exists());
    assert!(!results.join("failures.csv").exists());

    let table = d.join("acb.csv");
    let out = pair(&[
        "report",
        "--input",
        path(&results.join("report.csv")),
        "--metric",
        "acb",
        "--task",
        "OL",
        "--out",
        path(&table),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let table = std::fs::read_to_string(table).unwrap();
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines[0], "beta,representative,nonrep1,nonrep2,adjusted");
    assert!(lines[1].starts_with("0.2,"));
    assert_eq!(lines.len(), 2);
}

#[test]
fn single_seed_override() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let config = write_config(d, SMALL);
    let out = pair(&[
        "sweep",
        "--config",
        path(&config),
        "--out",
        path(d),
        "--seed",
        "9",
    ]);
    assert!(out.status.success());
    let report = std::fs::read_to_string(d.join("report.csv")).unwrap();
    assert_eq!(report.lines().filter(|l| l.starts_with("run,")).count(), 4);
    assert!(report
        .lines()
        .skip(1)
        .all(|l| l.split(',').nth(4) == Some("9")));
}

#[test]
fn failed_cells_give_exit_code_one() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let gold = d.join("textless.jsonl");
    let rows: String = (0..30)
        .map(|i| {
            let ol: Vec<u8> = (0..12).map(|j| u8::from((i + j) % 3 == 0)).collect();
            format!(
                "{}\n",
                serde_json::json!({"item_id": format!("t{i}"), "text": "!!!", "ol": ol, "hs": ol})
            )
        })
        .collect();
    std::fs::write(&gold, rows).unwrap();
    let config = write_config(
        d,
        &format!(
            "betas = [0.1]\nseeds = [1]\n[split]\ntrain = 20\ndev = 5\ntest = 5\n[gold]\nsource = \"file\"\npath = {:?}\n",
            gold
        ),
    );
    let out = pair(&["sweep", "--config", path(&config), "--out", path(d)]);
    assert_eq!(out.status.code(), Some(1));
    let failures = std::fs::read_to_string(d.join("failures.csv")).unwrap();
    assert_eq!(failures.lines().count(), 5);
}

#[test]
fn bad_input_gives_exit_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let bad = write_config(d, "betas = [0.9]\n");
    let out = pair(&["sweep", "--config", path(&bad)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("beta"));

    let out = pair(&["simulate", "--beta", "0.7", "--out", path(d)]);
    assert_eq!(out.status.code(), Some(2));

    let out = pair(&["report", "--input", path(&d.join("missing.csv"))]);
    assert_eq!(out.status.code(), Some(2));

    let out = pair(&[
        "report",
        "--input",
        path(&d.join("x.csv")),
        "--metric",
        "nope",
    ]);
    assert_eq!(out.status.code(), Some(2));
}
