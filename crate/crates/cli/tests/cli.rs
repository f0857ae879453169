use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tabinr_cli::bench::{BenchConfig, MetricsReport};
use tabinr_cli::report::{read_jsonl, summarize};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_tabinr"))
}

fn run(dir: &Path, args: &[&str]) -> Output {
    let out = bin().current_dir(dir).args(args).output().unwrap();
    if !out.status.success() {
        eprintln!("{}", String::from_utf8_lossy(&out.stderr));
    }
    out
}

fn ok(dir: &Path, args: &[&str]) {
    let out = run(dir, args);
    assert!(out.status.success(), "{args:?} failed");
}

fn code(dir: &Path, args: &[&str]) -> i32 {
    run(dir, args).status.code().unwrap()
}

fn generate(dir: &Path, kind: &str, rows: &str, out: &str) {
    ok(dir, &["generate", "--kind", kind, "--rows", rows, "--cols", "4", "--seed", "3", "--out", out]);
}

fn json(path: PathBuf) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn synthesize_is_deterministic_and_calibrated() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    generate(d, "logistic-categorical", "10000", "big.csv");
    for out in ["a.csv", "b.csv"] {
        ok(
            d,
            &["synthesize", "--data", "big.csv", "--mechanism", "mcar", "--rate", "0.3", "--seed", "7", "--out", out],
        );
    }
    assert_eq!(fs::read(d.join("a.csv")).unwrap(), fs::read(d.join("b.csv")).unwrap());
    assert_eq!(fs::read(d.join("a.csv.json")).unwrap(), fs::read(d.join("b.csv.json")).unwrap());
    let side = json(d.join("a.csv.json"));
    assert!((side["realized_rate"].as_f64().unwrap() - 0.3).abs() < 0.02);
    assert_eq!(side["mechanism"], "mcar");

    for mech in ["mar", "mnar"] {
        ok(d, &["synthesize", "--data", "big.csv", "--mechanism", mech, "--rate", "0.3", "--out", "m.csv"]);
        assert!((json(d.join("m.csv.json"))["realized_rate"].as_f64().unwrap() - 0.3).abs() < 0.02, "{mech}");
    }
    ok(d, &["synthesize", "--data", "big.csv", "--mechanism", "mar", "--rate", "0", "--out", "z.csv"]);
    assert_eq!(json(d.join("z.csv.json"))["realized_rate"].as_f64(), Some(0.0));
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    fs::write(d.join("t.csv"), "a,b\n1,2\n3,4\n").unwrap();
    assert_eq!(
        code(d, &["synthesize", "--data", "t.csv", "--mechanism", "bogus", "--rate", "0.3", "--out", "m.csv"]),
        2
    );
    assert_eq!(
        code(d, &["synthesize", "--data", "t.csv", "--mechanism", "mcar", "--rate", "1.5", "--out", "m.csv"]),
        2
    );
    assert_eq!(
        code(d, &["synthesize", "--data", "nope.csv", "--mechanism", "mcar", "--rate", "0.3", "--out", "m.csv"]),
        3
    );
    fs::write(d.join("s.json"), r#"[{"name":"a","kind":"numeric"},{"name":"b","kind":"numeric"}]"#).unwrap();
    fs::write(d.join("bad.csv"), "a,b\n1,x\n").unwrap();
    let args = [
        "synthesize",
        "--data",
        "bad.csv",
        "--schema",
        "s.json",
        "--mechanism",
        "mcar",
        "--rate",
        "0.3",
        "--out",
        "m.csv",
    ];
    assert_eq!(code(d, &args), 4);
    assert_eq!(code(d, &["impute", "--data", "t.csv", "--model", "missing.ckpt", "--out", "o.csv"]), 3);
    fs::write(d.join("junk.ckpt"), b"not a checkpoint").unwrap();
    assert_eq!(code(d, &["impute", "--data", "t.csv", "--model", "junk.ckpt", "--out", "o.csv"]), 3);
    assert_eq!(code(d, &["--help"]), 0);
}

const TINY: &str = r#"{"epochs": 20, "latent_dim": 4, "hidden_units": 16, "batch_rows": 8}"#;

#[test]
fn train_impute_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    fs::write(d.join("t.csv"), "x,y,c\n0.1,1.5,u\n0.2,,v\n,2.5,u\n0.4,3.5,\n0.5,4.5,v\n0.6,5.5,u\n").unwrap();
    fs::write(d.join("train.json"), TINY).unwrap();
    fs::write(d.join("empty.csv"), "x,y,c\n0,0,0\n0,0,0\n0,0,0\n0,0,0\n0,0,0\n0,0,0\n").unwrap();
    ok(
        d,
        &[
            "train",
            "--data",
            "t.csv",
            "--mask",
            "empty.csv",
            "--config",
            "train.json",
            "--seed",
            "1",
            "--out",
            "m.ckpt",
        ],
    );
    let loss = fs::read_to_string(d.join("m.ckpt.loss.csv")).unwrap();
    assert!(loss.starts_with("epoch,train_loss,val_loss,lr\n"));
    assert_eq!(loss.lines().count(), 21);

    ok(d, &["impute", "--data", "t.csv", "--mask", "empty.csv", "--model", "m.ckpt", "--out", "done.csv"]);
    let input = fs::read_to_string(d.join("t.csv")).unwrap();
    let output = fs::read_to_string(d.join("done.csv")).unwrap();
    assert_eq!(output.lines().count(), input.lines().count());
    for (a, b) in input.lines().zip(output.lines()) {
        for (x, y) in a.split(',').zip(b.split(',')) {
            assert!(!y.is_empty(), "empty cell in {b}");
            if !x.is_empty() {
                assert_eq!(x, y);
            }
        }
    }

    fs::write(d.join("mask.csv"), "x,y,c\n1,0,0\n0,0,0\n0,0,0\n0,0,0\n0,0,0\n0,0,0\n").unwrap();
    assert_eq!(code(d, &["impute", "--data", "t.csv", "--mask", "mask.csv", "--model", "m.ckpt", "--out", "o.csv"]), 4);

    fs::write(d.join("new.csv"), "x,y,c\n0.3,,u\n,4,\n").unwrap();
    ok(d, &["tta", "--data", "new.csv", "--model", "m.ckpt", "--seed", "2", "--out", "rows.csv"]);
    let rows = fs::read_to_string(d.join("rows.csv")).unwrap();
    assert!(rows.lines().skip(1).all(|l| l.split(',').all(|c| !c.is_empty())));
    assert!(rows.lines().nth(1).unwrap().starts_with("0.3,"));
    let traces = json(d.join("rows.csv.json"));
    assert_eq!(traces.as_array().unwrap().len(), 2);
    ok(d, &["tta", "--data", "new.csv", "--model", "m.ckpt", "--seed", "2", "--out", "rows2.csv"]);
    assert_eq!(rows, fs::read_to_string(d.join("rows2.csv")).unwrap());
}

fn bench_config(d: &Path, methods: &str, seeds: &str) -> PathBuf {
    let text = format!(
        r#"{{"datasets": [{{"name": "toy", "path": "toy.csv", "schema": "toy.csv.schema.json"}}],
            "methods": {methods}, "seeds": {seeds}, "master_seed": 11, "defaults": {TINY}}}"#
    );
    let p = d.join("bench.json");
    fs::write(&p, text).unwrap();
    p
}

#[test]
fn benchmark_records_summary_and_rerun() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    generate(d, "logistic-categorical", "60", "toy.csv");
    bench_config(d, r#"["tabinr"]"#, "[0, 1, 2]");
    ok(d, &["benchmark", "--config", "bench.json", "--out", "r1"]);
    ok(d, &["benchmark", "--config", "bench.json", "--out", "r2", "--workers", "2"]);
    let a: Vec<MetricsReport> = read_jsonl(&d.join("r1/records.jsonl")).unwrap();
    let b: Vec<MetricsReport> = read_jsonl(&d.join("r2/records.jsonl")).unwrap();
    assert_eq!(a.len(), 3);
    assert!(a.iter().all(|r| r.error.is_none() && r.nrmse_mean.is_some() && r.auroc_mean.is_some()));
    let strip = |v: &[MetricsReport]| v.iter().map(MetricsReport::without_timing).collect::<Vec<_>>();
    assert_eq!(strip(&a), strip(&b));
    assert_eq!(a[0].config["method"]["seed"].as_u64(), Some(a[0].model_seed));

    let summary = fs::read_to_string(d.join("r1/summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 2);
    let fields: Vec<&str> = summary.lines().nth(1).unwrap().split(',').collect();
    let xs: Vec<f64> = a.iter().map(|r| r.nrmse_mean.unwrap()).collect();
    let mean = (xs[0] + xs[1] + xs[2]) / 3.0;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / 2.0;
    assert_eq!(&fields[..6], &["toy", "tabinr", "mcar", "0.3", "3", "0"]);
    assert!((fields[6].parse::<f64>().unwrap() - mean).abs() < 1e-12);
    assert!((fields[7].parse::<f64>().unwrap() - var.sqrt()).abs() < 1e-12);

    ok(d, &["report", "--data", "r1/records.jsonl", "--out", "again.csv"]);
    assert_eq!(fs::read_to_string(d.join("again.csv")).unwrap(), summary);
}

#[test]
fn benchmark_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    fs::write(d.join("bench.json"), r#"{"datasets": [{"name": "x", "path": "absent.csv"}]}"#).unwrap();
    assert_eq!(code(d, &["benchmark", "--config", "bench.json", "--out", "r"]), 3);
    fs::write(d.join("bench.json"), r#"{"datasets": 5}"#).unwrap();
    assert_eq!(code(d, &["benchmark", "--config", "bench.json", "--out", "r"]), 2);
}

#[test]
fn ablate_single_point_matches_benchmark() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    generate(d, "logistic-categorical", "60", "toy.csv");
    bench_config(d, r#"["tabinr"]"#, "[0, 1]");
    ok(d, &["benchmark", "--config", "bench.json", "--out", "b"]);
    let ablate = format!(
        r#"{{"dataset": {{"name": "toy", "path": "toy.csv", "schema": "toy.csv.schema.json"}},
            "seeds": [0, 1], "master_seed": 11, "base": {TINY}, "sweep": {{"latent": [4]}}}}"#
    );
    fs::write(d.join("ablate.json"), ablate).unwrap();
    ok(d, &["ablate", "--config", "ablate.json", "--out", "a"]);
    let table = fs::read_to_string(d.join("a/ablation.csv")).unwrap();
    assert_eq!(table.lines().count(), 2);
    let row: Vec<&str> = table.lines().nth(1).unwrap().split(',').collect();
    let bench: Vec<MetricsReport> = read_jsonl(&d.join("b/records.jsonl")).unwrap();
    let s = &summarize(&bench)[0];
    assert_eq!(&row[..3], &["latent", "4", "tabinr"]);
    assert_eq!(row[5].parse::<f64>().unwrap(), s.nrmse_mean.unwrap());
    assert_eq!(row[7].parse::<f64>().unwrap(), s.auroc_mean.unwrap());

    fs::write(d.join("bad.json"), ablate_with(r#"{"latent": [4], "width": [8]}"#)).unwrap();
    assert_eq!(code(d, &["ablate", "--config", "bad.json", "--out", "x"]), 2);
}

fn ablate_with(sweep: &str) -> String {
    format!(r#"{{"dataset": {{"name": "toy", "path": "toy.csv"}}, "sweep": {sweep}}}"#)
}

#[test]
fn correlated_gaussian_structural_advantage() {
    let mut cfg: BenchConfig = serde_json::from_str(
        r#"{"datasets": [{"name": "cg", "synthetic": {"kind": "correlated_gaussian", "rho": 0.8, "rows": 300, "cols": 6}}],
            "methods": ["tabinr", "mean_mode"], "seeds": [0],
            "defaults": {"activation": {"kind": "siren", "omega0": 1.0}, "holdout": "per_epoch",
                         "batch_rows": 8, "dropout": 0.0, "early_stop_patience": 50, "epochs": 150}}"#,
    )
    .unwrap();
    cfg.workers = Some(2);
    let records = tabinr_cli::bench::run(&cfg, Path::new(".")).unwrap();
    let tabinr = records[0].nrmse_mean.unwrap();
    let mean = records[1].nrmse_mean.unwrap();
    assert!(tabinr <= 0.8 * mean, "tabinr {tabinr} vs mean/mode {mean}");
}
