use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn ant_cf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ant-cf"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = ant_cf(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn p(dir: &TempDir, name: &str) -> String {
    dir.path().join(name).to_str().unwrap().to_string()
}

/// 40 users x 15 items with a two-taste structure, MovieLens layout.
fn write_ratings(path: &Path) {
    let mut s = String::new();
    let mut ts = 978300000;
    for u in 1..=40 {
        for i in 1..=15 {
            if (u * 5 + i * 3) % 4 == 0 {
                continue;
            }
            let liked = (u % 2 == 0) == (i % 2 == 0);
            let r = if liked { 4 + (u + i) % 2 } else { 1 + (u * i) % 2 };
            s += &format!("{u}::{i}::{r}::{ts}\n");
            ts += 7;
        }
    }
    fs::write(path, s).unwrap();
}

#[test]
fn train_predict_recommend() {
    let dir = TempDir::new().unwrap();
    let data = p(&dir, "ratings.dat");
    write_ratings(Path::new(&data));
    let model = p(&dir, "model.txt");
    let report = ok(&["train", "--data", &data, "--mode", "iacf", "--clusters", "3", "--out-model", &model]);
    assert!(report.contains("events=") && report.contains("mean_touched_entries="), "{report}");

    let pred: f64 = ok(&["predict", "--model", &model, "--user", "2", "--item", "4"]).trim().parse().unwrap();
    assert!((1.0..=5.0).contains(&pred));

    let recs = ok(&["recommend", "--model", &model, "--user", "2", "--n", "3", "--include-rated"]);
    let lines: Vec<&str> = recs.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[0].starts_with("1\t"));
    assert_eq!(recs, ok(&["recommend", "--model", &model, "--user", "2", "--n", "3", "--include-rated"]));
}

#[test]
fn predict_for_unknown_user_prints_global_mean() {
    let dir = TempDir::new().unwrap();
    let data = p(&dir, "r.dat");
    fs::write(&data, "1::10::5::1\n2::10::3::2\n").unwrap();
    let model = p(&dir, "m.txt");
    ok(&["train", "--data", &data, "--mode", "acf", "--out-model", &model]);
    let out = ok(&["predict", "--model", &model, "--user", "nobody", "--item", "10"]);
    assert_eq!(out.trim(), "4");
}

#[test]
fn rejects_negative_sigma() {
    let dir = TempDir::new().unwrap();
    let data = p(&dir, "r.dat");
    fs::write(&data, "1::10::5::1\n").unwrap();
    let out = ant_cf(&["train", "--data", &data, "--mode", "acf", "--sigma", "-1", "--out-model", &p(&dir, "m")]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("sigma"));
    assert!(!dir.path().join("m").exists());
}

#[test]
fn unknown_subcommand_prints_usage() {
    let out = ant_cf(&["frobnicate"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
    let out = ant_cf(&["train", "--bogus"]);
    assert!(!out.status.success());
}

#[test]
fn malformed_data_is_rejected_with_location() {
    let dir = TempDir::new().unwrap();
    let data = p(&dir, "r.dat");
    fs::write(&data, "1::10::5::1\n1::11::9::2\n").unwrap();
    let out = ant_cf(&["train", "--data", &data, "--mode", "acf", "--out-model", &p(&dir, "m")]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains(":2:"));
}

#[test]
fn rating_reports_are_byte_identical() {
    let dir = TempDir::new().unwrap();
    let data = p(&dir, "ratings.dat");
    write_ratings(Path::new(&data));
    let run = |name: &str| {
        let report = p(&dir, name);
        let summary = ok(&[
            "evaluate-rating", "--data", &data, "--split", "random:0.2:7", "--mode", "iacf",
            "--clusters", "3", "--runs", "2", "--report", &report,
        ]);
        (summary, fs::read(report).unwrap())
    };
    let (s1, r1) = run("a.csv");
    let (s2, r2) = run("b.csv");
    assert_eq!(s1, s2);
    assert_eq!(r1, r2);
    let csv = String::from_utf8(r1).unwrap();
    assert!(csv.starts_with("metric,value,run,checkpoint\niacf_rmse,"), "{csv}");
    assert!(s1.contains("rmse="));

    let base = ok(&["evaluate-rating", "--data", &data, "--split", "chrono:0.1", "--mode", "baseline"]);
    assert!(base.contains("baseline rmse="));
}

#[test]
fn drift_ranking_temporal_and_cluster() {
    let dir = TempDir::new().unwrap();
    let data = p(&dir, "drift.csv");
    let out = ok(&[
        "generate-drift", "--users", "40", "--items", "100", "--events-per-user", "15",
        "--drift-rate", "2", "--seed", "3", "--out", &data,
    ]);
    assert_eq!(out.trim(), "events=600");
    let again = p(&dir, "drift2.csv");
    ok(&[
        "generate-drift", "--users", "40", "--items", "100", "--events-per-user", "15",
        "--drift-rate", "2", "--seed", "3", "--out", &again,
    ]);
    assert_eq!(fs::read(&data).unwrap(), fs::read(&again).unwrap());

    let ranking = ok(&[
        "evaluate-ranking", "--data", &data, "--format", "csv-implicit", "--mode", "acf",
        "--n", "5", "--runs", "2",
    ]);
    assert!(ranking.contains("acf mean: precision@5="), "{ranking}");

    let report = p(&dir, "temporal.csv");
    let temporal = ok(&[
        "temporal", "--data", &data, "--format", "csv-implicit", "--checkpoints", "4",
        "--clusters", "3", "--report", &report,
    ]);
    assert_eq!(temporal.lines().count(), 5);
    let rows = fs::read_to_string(&report).unwrap();
    assert_eq!(rows.lines().count(), 1 + 2 * 4);
    assert!(rows.contains("precision_time,"));

    let assignments = p(&dir, "clusters.tsv");
    let summary = ok(&["cluster", "--data", &data, "--format", "csv-implicit", "--k", "4", "--out", &assignments]);
    assert!(summary.contains("k=4"));
    assert_eq!(fs::read_to_string(&assignments).unwrap().lines().count(), 40);

    let model = p(&dir, "implicit.txt");
    ok(&["train", "--data", &data, "--format", "csv-implicit", "--mode", "acf", "--out-model", &model]);
    let out = ant_cf(&["predict", "--model", &model, "--user", "u1", "--item", "i1"]);
    assert!(!out.status.success());
    assert!(!ok(&["recommend", "--model", &model, "--user", "u1", "--n", "5"]).is_empty());
}
