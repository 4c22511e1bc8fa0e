mod common;

use std::fs;
use std::time::Instant;

use common::{cli, fixture, run_pipeline};
use infotweet::preprocess::normalize;

fn path(p: &std::path::Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn no_arguments_prints_usage() {
    let run = cli(&[]);
    assert_eq!(run.code, 2);
    assert!(run.stderr.contains("Usage:"), "{}", run.stderr);
    for sub in ["stats", "normalize", "train", "predict", "vote", "eval", "report"] {
        assert!(run.stderr.contains(sub), "usage lacks {sub}");
    }
}

#[test]
fn unknown_subcommand_is_usage_error() {
    let run = cli(&["frobnicate"]);
    assert_eq!(run.code, 2);
    assert!(run.stderr.contains("Usage:"));
    assert_eq!(cli(&["--help"]).code, 0);
}

#[test]
fn normalize_matches_golden_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("normalized.tsv");
    let input = fixture("golden/normalize_input.tsv");
    let run = cli(&["normalize", "--in", path(&input), "--out", path(&out)]);
    assert_eq!(run.code, 0, "{}", run.stderr);
    let produced = fs::read_to_string(&out).unwrap();
    let expected = fs::read_to_string(fixture("golden/normalize_expected.tsv")).unwrap();
    assert_eq!(produced, expected);

    let lower = produced.to_lowercase();
    assert!(!lower.contains("@user") && !lower.contains("httpurl"));
    for line in produced.lines() {
        let text = line.split('\t').nth(1).unwrap();
        assert_eq!(normalize(text), text);
    }

    // Without --out the result goes to stdout.
    let run = cli(&["normalize", "--in", path(&input)]);
    assert_eq!(run.stdout, expected);
}

#[test]
fn stats_on_synthetic_splits() {
    let run = cli(&[
        "stats",
        "--train",
        path(&fixture("synthetic/train.tsv")),
        "--dev",
        path(&fixture("synthetic/dev.tsv")),
    ]);
    assert_eq!(run.code, 0, "{}", run.stderr);
    assert!(run.stdout.starts_with("train.INFORMATIVE=16\ntrain.UNINFORMATIVE=16\ntrain.total=32\n"));
    assert!(run.stdout.contains("dev.total=8\ntotal=40\nfleiss_kappa=0.8180\n"));
    assert_eq!(cli(&["stats"]).code, 2);
}

#[test]
fn full_pipeline_runs_quickly() {
    let dir = tempfile::tempdir().unwrap();
    let start = Instant::now();
    let artifacts = run_pipeline(dir.path());
    assert!(start.elapsed().as_secs() < 60);
    assert!(artifacts.train_log.contains("best_epoch="));
    assert_eq!(String::from_utf8(artifacts.ensemble_predictions).unwrap().lines().count(), 8);
    assert!(artifacts.eval_report.starts_with("model=ensemble\naccuracy="));
    assert!(artifacts.eval_report.contains("PL\tTL\tid\ttweet"));
    assert!(String::from_utf8(artifacts.confusion_csv)
        .unwrap()
        .starts_with("true,predicted,count\nINFORMATIVE,INFORMATIVE,"));
}

#[test]
fn vote_defaults_to_priority_of_present_members() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("ensemble.tsv");
    let members = fixture("synthetic/members");
    let run = cli(&["vote", "--pred", path(&members), "--out", path(&out), "--agreement"]);
    assert_eq!(run.code, 0, "{}", run.stderr);
    assert!(run.stdout.starts_with("members=xlnet,roberta,bert\n"), "{}", run.stdout);
    assert!(run.stdout.contains("tie_broken=0\n"));
    assert!(run.stdout.contains("unanimity="));

    // The configured four-member order does not fit three files.
    let config = fixture("synthetic/config.ini");
    let run = cli(&["vote", "--pred", path(&members), "--config", path(&config), "--out", path(&out)]);
    assert_eq!(run.code, 2);
    assert!(run.stderr.starts_with("error[usage]: "), "{}", run.stderr);
}

#[test]
fn data_errors_exit_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let gold = fixture("synthetic/dev.tsv");
    let pred = dir.path().join("short.tsv");
    fs::write(&pred, "s100\tINFORMATIVE\n").unwrap();
    let run = cli(&["eval", "--pred", path(&pred), "--gold", path(&gold)]);
    assert_eq!(run.code, 3);
    assert_eq!(run.stderr.lines().count(), 1);
    assert!(run.stderr.starts_with("error[data]: "), "{}", run.stderr);
    assert!(run.stderr.contains("s101"));

    let bad = dir.path().join("bad.tsv");
    fs::write(&bad, "1\ttext\tMAYBE\n").unwrap();
    let run = cli(&["stats", "--train", path(&bad)]);
    assert_eq!(run.code, 3);
    assert!(run.stderr.contains("MAYBE"));

    let verbose = cli(&["stats", "--train", path(&bad), "--verbose"]);
    assert!(verbose.stderr.lines().count() > 1);
}

#[test]
fn missing_paths_fail_before_work() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.ini");
    fs::write(&config, "[data]\ntrain = nowhere.tsv\ndev = nowhere.tsv\nembeddings = none.txt\n").unwrap();
    let out = dir.path().join("m.ckpt");
    let run = cli(&["train", "--config", path(&config), "--out", path(&out)]);
    assert_eq!(run.code, 2);
    assert!(run.stderr.contains("nowhere.tsv"), "{}", run.stderr);
    assert!(!out.exists());

    let run = cli(&["predict", "--ckpt", path(&out), "--in", path(&config), "--out", path(&out)]);
    assert_eq!(run.code, 2);
}

#[test]
fn report_includes_published_rows() {
    let gold = fixture("synthetic/dev.tsv");
    let members = fixture("synthetic/members");
    let run = cli(&["report", "--gold", path(&gold), "--pred", path(&members), "--published", "dev", "--errors", "2"]);
    assert_eq!(run.code, 0, "{}", run.stderr);
    assert!(run.stdout.contains("Ensemble *"));
    assert!(run.stdout.contains("[xlnet]"));
    assert!(run.stdout.contains("agreement.xlnet.roberta="));
    assert_eq!(cli(&["report", "--gold", path(&gold), "--pred", path(&members), "--published", "train"]).code, 2);
}
