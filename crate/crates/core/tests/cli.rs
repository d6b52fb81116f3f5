use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use survstrat::stratify::PairTest;

const BIN: &str = env!("CARGO_BIN_EXE_survstrat");

fn survstrat(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = survstrat(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn tiny(dir: &Path, extra: &str) -> PathBuf {
    let path = dir.join("tiny.toml");
    std::fs::write(
        &path,
        format!("[data]\ndataset = \"whas\"\n[train]\npretrain_epochs = 4\nepochs = 6\n{extra}"),
    )
    .unwrap();
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn field(path: &Path, key: &str) -> f64 {
    let v: toml::Table = std::fs::read_to_string(path).unwrap().parse().unwrap();
    v[key].as_float().unwrap()
}

#[test]
fn train_writes_artifacts_and_repeats_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny(dir.path(), "");
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    ok(&["train", "--config", s(&cfg), "--split", "2", "--out", s(&a)]);
    ok(&["train", "--config", s(&cfg), "--split", "2", "--out", s(&b)]);
    for f in ["splits.txt", "config.toml", "epochs.csv", "metrics.toml", "checkpoint.json"] {
        assert!(a.join(f).is_file(), "missing {f}");
    }
    for f in ["metrics.toml", "checkpoint.json", "epochs.csv"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn invalid_config_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny(dir.path(), "[loss]\niviw = 0.5\n");
    let out = survstrat(&["train", "--config", s(&cfg), "--out", s(&dir.path().join("o"))]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("iviw"));
    assert_eq!(survstrat(&["train"]).status.code(), Some(1));
}

#[test]
fn missing_checkpoint_exits_two() {
    let out = survstrat(&["evaluate", "--checkpoint", "/nonexistent/ckpt.json", "--data", "whas"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn evaluate_is_idempotent_and_train_rows_score_higher() {
    let dir = tempfile::tempdir().unwrap();
    // the tuned preset fits its training rows well
    let cfg = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/whas.toml");
    let run = dir.path().join("run");
    ok(&["train", "--config", s(&cfg), "--out", s(&run)]);
    let ckpt = run.join("checkpoint.json");
    let eval = |subset: &str, name: &str| {
        let out = dir.path().join(name);
        ok(&["evaluate", "--checkpoint", s(&ckpt), "--data", "whas", "--subset", subset, "--out", s(&out)]);
        out
    };
    let t1 = eval("test", "t1.toml");
    let t2 = eval("test", "t2.toml");
    assert_eq!(std::fs::read(&t1).unwrap(), std::fs::read(&t2).unwrap());
    assert_eq!(field(&t1, "c_index"), field(&run.join("metrics.toml"), "c_index"));
    let tr = eval("train", "train.toml");
    assert!(field(&tr, "c_index") > field(&t1, "c_index"));

    let curves = dir.path().join("curves.csv");
    ok(&["evaluate", "--checkpoint", s(&ckpt), "--data", "whas", "--curves", s(&curves)]);
    let mut r = csv::Reader::from_path(&curves).unwrap();
    let mut last: Option<(String, f64)> = None;
    for rec in r.records() {
        let rec = rec.unwrap();
        let surv: f64 = rec[2].parse().unwrap();
        assert!((0.0..=1.0).contains(&surv));
        if let Some((row, prev)) = &last {
            if row == &rec[0] {
                assert!(surv <= *prev);
            }
        }
        last = Some((rec[0].to_string(), surv));
    }
}

#[test]
fn hpo_is_independent_of_jobs_and_its_winner_reproduces() {
    let dir = tempfile::tempdir().unwrap();
    tiny(dir.path(), "");
    let space = dir.path().join("space.toml");
    std::fs::write(
        &space,
        "base = \"tiny.toml\"\n[params]\n\"train.lr\" = { log_uniform = [3e-4, 3e-3] }\n\"model.k\" = { choice = [2, 3] }\n",
    )
    .unwrap();
    let (h1, h2) = (dir.path().join("h1"), dir.path().join("h2"));
    ok(&["hpo", "--space", s(&space), "--budget", "3", "--jobs", "1", "--seed", "4", "--out", s(&h1)]);
    ok(&["hpo", "--space", s(&space), "--budget", "3", "--jobs", "2", "--seed", "4", "--out", s(&h2)]);
    for f in ["leaderboard.csv", "best_config.toml", "summary.toml", "splits.txt"] {
        assert_eq!(std::fs::read(h1.join(f)).unwrap(), std::fs::read(h2.join(f)).unwrap(), "{f}");
    }

    let best = h1.join("best_config.toml");
    let tests: Vec<f64> = (1..=5)
        .map(|split| {
            let out = dir.path().join(format!("best{split}"));
            ok(&["train", "--config", s(&best), "--split", &split.to_string(), "--out", s(&out)]);
            field(&out.join("metrics.toml"), "c_index")
        })
        .collect();
    let mean = tests.iter().sum::<f64>() / 5.0;
    assert!((mean - field(&h1.join("summary.toml"), "test_c_index_mean")).abs() < 1e-12);
}

#[test]
fn stratify_needs_two_clusters() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny(dir.path(), "[model]\nk = 1\n");
    let run = dir.path().join("run");
    ok(&["train", "--config", s(&cfg), "--out", s(&run)]);
    let out = survstrat(&[
        "stratify",
        "--checkpoint",
        s(&run.join("checkpoint.json")),
        "--data",
        "whas",
        "--out",
        s(&dir.path().join("strat")),
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn stratify_exports_read_back() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny(dir.path(), "[model]\nk = 3\n");
    let run = dir.path().join("run");
    let strat = dir.path().join("strat");
    ok(&["train", "--config", s(&cfg), "--out", s(&run)]);
    ok(&["stratify", "--checkpoint", s(&run.join("checkpoint.json")), "--data", "whas", "--out", s(&strat)]);

    let mut r = csv::Reader::from_path(strat.join("latents.csv")).unwrap();
    let header = r.headers().unwrap().clone();
    assert_eq!(&header[0], "row");
    assert_eq!(&header[1], "cluster");
    let mut sizes = [0usize; 3];
    let mut rows = 0;
    for rec in r.records() {
        let rec = rec.unwrap();
        assert_eq!(rec[0].parse::<usize>().unwrap(), rows);
        sizes[rec[1].parse::<usize>().unwrap()] += 1;
        rows += 1;
    }
    assert!(rows > 400);

    let tests: Vec<PairTest> = csv::Reader::from_path(strat.join("logrank.csv"))
        .unwrap()
        .deserialize()
        .map(|t| t.unwrap())
        .collect();
    assert!(!tests.is_empty() && tests.len() <= 3);
    for t in &tests {
        assert_eq!((t.n_a, t.n_b), (sizes[t.cluster_a], sizes[t.cluster_b]));
        assert!((0.0..=1.0).contains(&t.p_value));
    }

    let mut r = csv::Reader::from_path(strat.join("features.csv")).unwrap();
    let smd: Vec<f64> = r.records().map(|rec| rec.unwrap()[2].parse().unwrap()).collect();
    assert!(smd.windows(2).all(|w| w[0].abs() >= w[1].abs()));
    assert!(strat.join("km.csv").is_file());
}
