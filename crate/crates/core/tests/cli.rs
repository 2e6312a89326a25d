use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use pwbsim::experiment::{verify_manifest, Manifest};
use serde_json::{json, Value};

const BIN: &str = env!("CARGO_BIN_EXE_pwbsim");

fn data_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/mnist")
}

fn have_data() -> bool {
    let ok = data_dir().join("train-images-idx3-ubyte").exists();
    if !ok {
        eprintln!("MNIST missing; run scripts/fetch_mnist.sh");
    }
    ok
}

/// Small training config: 2000 train / 1000 test images.
fn quick(extra: Value) -> Value {
    let mut cfg = json!({
        "replicates": 1,
        "data": { "dir": data_dir(), "train_limit": 2000, "test_limit": 1000 },
    });
    if let (Some(base), Some(more)) = (cfg.as_object_mut(), extra.as_object()) {
        for (k, v) in more {
            base.insert(k.clone(), v.clone());
        }
    }
    cfg
}

fn run(dir: &Path, kind: &str, cfg: &Value, extra: &[&str]) -> std::process::Output {
    let cfg_path = dir.join(format!("{kind}.json"));
    fs::write(&cfg_path, cfg.to_string()).unwrap();
    Command::new(BIN)
        .arg(kind)
        .arg("--config")
        .arg(&cfg_path)
        .arg("--out")
        .arg(dir.join("out"))
        .args(extra)
        .output()
        .unwrap()
}

fn read(dir: &Path, file: &str) -> Vec<u8> {
    fs::read(dir.join("out").join(file)).unwrap()
}

#[test]
fn baseline_is_byte_identical_across_runs() {
    if !have_data() {
        return;
    }
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let cfg = quick(json!({}));
    for d in [&a, &b] {
        let out = run(d.path(), "train-baseline", &cfg, &["--seed", "42"]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    for f in ["results.csv", "summary.csv", "manifest.json"] {
        assert_eq!(read(a.path(), f), read(b.path(), f), "{f} differs");
    }
    let m = verify_manifest(&a.path().join("out")).unwrap();
    assert_eq!(m.seed, 42);
}

#[test]
fn bits_grid_rows_and_job_count_invariance() {
    if !have_data() {
        return;
    }
    let cfg = quick(json!({ "bits": { "epochs": 1 } }));
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let out = run(a.path(), "sweep-bits", &cfg, &["--jobs", "1"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let out = run(b.path(), "sweep-bits", &cfg, &["--jobs", "3"]);
    assert!(out.status.success());
    let results = String::from_utf8(read(a.path(), "results.csv")).unwrap();
    // 9 bit widths x 2 modes x 1 replicate, plus the header
    assert_eq!(results.lines().count(), 19);
    assert!(results.lines().skip(1).all(|l| l.ends_with(",ok")));
    assert_eq!(read(a.path(), "results.csv"), read(b.path(), "results.csv"));
    assert_eq!(read(a.path(), "summary.csv"), read(b.path(), "summary.csv"));
}

#[test]
fn replicates_multiply_rows_and_carry_seeds() {
    if !have_data() {
        return;
    }
    let mut cfg = quick(json!({ "retention": { "ratios": [10.0, 1000.0], "batch_sizes": [64] } }));
    cfg["replicates"] = json!(2);
    let d = tempfile::tempdir().unwrap();
    let out = run(d.path(), "sweep-retention", &cfg, &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(read(d.path(), "results.csv")).unwrap();
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let rows: Vec<csv::StringRecord> = rdr.records().map(|r| r.unwrap()).collect();
    // ideal: 1 batch x 2 reps; without: 2 ratios x 2; with: 2 ratios x 2
    assert_eq!(rows.len(), 2 + 4 + 4);
    assert!(rows.iter().all(|r| r[4].parse::<u64>().is_ok()));
    let seeds: std::collections::BTreeSet<&str> = rows.iter().map(|r| &r[4]).collect();
    assert_eq!(seeds.len(), 2);
}

#[test]
fn manifest_lists_every_file() {
    let d = tempfile::tempdir().unwrap();
    let out = run(d.path(), "device-fom", &json!({}), &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let m: Manifest = serde_json::from_slice(&read(d.path(), "manifest.json")).unwrap();
    let mut listed: Vec<String> = m.files.iter().map(|f| f.file.clone()).collect();
    listed.push("manifest.json".into());
    listed.sort();
    let mut on_disk: Vec<String> = fs::read_dir(d.path().join("out"))
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    on_disk.sort();
    assert_eq!(listed, on_disk);
    verify_manifest(&d.path().join("out")).unwrap();

    // Tampering is detected.
    fs::write(d.path().join("out/results.csv"), "x\n").unwrap();
    assert!(verify_manifest(&d.path().join("out")).is_err());
}

#[test]
fn report_kinds_run_without_dataset() {
    for kind in ["compare-memories", "power-scaling", "arch-report"] {
        let d = tempfile::tempdir().unwrap();
        let out = run(d.path(), kind, &json!({ "data": { "dir": "/nonexistent" } }), &[]);
        assert!(out.status.success(), "{kind}: {}", String::from_utf8_lossy(&out.stderr));
        let line: Value = serde_json::from_slice(&out.stdout).unwrap();
        assert_eq!(line["ok"], json!(true));
    }
}

fn error_of(out: &std::process::Output) -> Value {
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    let last = stderr.lines().last().expect("error line");
    serde_json::from_str(last).unwrap()
}

#[test]
fn failures_emit_machine_readable_line() {
    let d = tempfile::tempdir().unwrap();
    let out = run(d.path(), "train-baseline", &json!({ "data": { "dir": "/nonexistent" } }), &[]);
    assert_eq!(error_of(&out)["error"]["code"], json!("dataset"));

    let out = run(d.path(), "sweep-bits", &json!({ "bits": { "bits": [] } }), &[]);
    assert_eq!(error_of(&out)["error"]["code"], json!("config"));

    let out = run(d.path(), "power-scaling", &json!({ "unknown_field": 1 }), &[]);
    assert_eq!(error_of(&out)["error"]["code"], json!("json"));

    let out = Command::new(BIN).arg("not-a-kind").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_of(&out)["error"]["code"], json!("usage"));

    let out = Command::new(BIN).arg("power-scaling").output().unwrap();
    assert!(error_of(&out)["error"]["message"].as_str().unwrap().contains("--out"));
}

#[test]
fn default_config_round_trips_through_the_cli() {
    let out = Command::new(BIN)
        .args(["sweep-noise", "--print-default-config"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let cfg: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(cfg["kind"], json!("sweep-noise"));
    assert_eq!(cfg["replicates"], json!(3));
    assert_eq!(cfg["noise"]["trained_pd_tia"], json!(2e-3));
}
