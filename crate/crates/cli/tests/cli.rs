use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn mbaq(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mbaq"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = mbaq(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn small_config(dir: &Path) {
    fs::write(dir.join("small.toml"), "scenes = 5\n[trainer]\nmax_epochs = 2\n").unwrap();
}

#[test]
fn gen_writes_frames_and_ground_truth() {
    let d = tempfile::tempdir().unwrap();
    ok(d.path(), &["gen", "--out", "c"]);
    let names: Vec<String> = fs::read_dir(d.path().join("c"))
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    assert_eq!(names.iter().filter(|n| n.ends_with(".pgm")).count(), 20);
    assert_eq!(names.iter().filter(|n| n.ends_with(".json")).count(), 20);
}

#[test]
fn gen_is_byte_identical_for_fixed_seed() {
    let d = tempfile::tempdir().unwrap();
    ok(d.path(), &["gen", "--seed", "9", "--out", "a"]);
    ok(d.path(), &["gen", "--seed", "9", "--out", "b"]);
    ok(d.path(), &["gen", "--seed", "10", "--out", "c"]);
    let read = |sub: &str| fs::read(d.path().join(sub).join("scene_000_frame_000.pgm")).unwrap();
    assert_eq!(read("a"), read("b"));
    assert_ne!(read("a"), read("c"));
}

#[test]
fn train_and_sweep_reproducible() {
    let d = tempfile::tempdir().unwrap();
    small_config(d.path());
    ok(d.path(), &["gen", "--config", "small.toml", "--out", "c"]);
    for run in ["r1", "r2"] {
        ok(d.path(), &["train", "--config", "small.toml", "--corpus", "c", "--out", run]);
        let model = format!("{run}/model.json");
        let out = format!("{run}/sweep");
        ok(d.path(), &["sweep", "--config", "small.toml", "--corpus", "c", "--model", &model, "--out", &out]);
    }
    for f in ["model.json", "epoch_log.csv", "sweep/sweep_rows.csv", "sweep/summary.json", "sweep/sweep_aggregates.csv"] {
        let a = fs::read(d.path().join("r1").join(f)).unwrap();
        let b = fs::read(d.path().join("r2").join(f)).unwrap();
        assert_eq!(a, b, "{f} differs");
    }
}

#[test]
fn zero_epochs_is_a_training_error() {
    let d = tempfile::tempdir().unwrap();
    fs::write(d.path().join("zero.toml"), "scenes = 3\n[trainer]\nmax_epochs = 0\n").unwrap();
    ok(d.path(), &["gen", "--config", "zero.toml", "--out", "c"]);
    let out = mbaq(d.path(), &["train", "--config", "zero.toml", "--corpus", "c", "--out", "m"]);
    assert_eq!(out.status.code(), Some(5));
    assert!(String::from_utf8_lossy(&out.stderr).contains("no training performed"));
    assert!(!d.path().join("m/model.json").exists());
    let log = fs::read_to_string(d.path().join("m/epoch_log.csv")).unwrap();
    assert_eq!(log.lines().count(), 1);
}

#[test]
fn missing_model_is_a_config_error() {
    let d = tempfile::tempdir().unwrap();
    small_config(d.path());
    ok(d.path(), &["gen", "--config", "small.toml", "--out", "c"]);
    let out = mbaq(d.path(), &["sweep", "--corpus", "c", "--model", "nope.json", "--out", "s"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn bad_config_and_missing_corpus_codes() {
    let d = tempfile::tempdir().unwrap();
    fs::write(d.path().join("bad.toml"), "scenes = 0\n").unwrap();
    assert_eq!(mbaq(d.path(), &["gen", "--config", "bad.toml", "--out", "c"]).status.code(), Some(3));
    assert_eq!(mbaq(d.path(), &["gen", "--config", "missing.toml", "--out", "c"]).status.code(), Some(4));
    let out = mbaq(d.path(), &["train", "--corpus", "nowhere", "--out", "m"]);
    assert_eq!(out.status.code(), Some(4));
    assert_eq!(mbaq(d.path(), &["frobnicate"]).status.code(), Some(2));
}

#[test]
fn heatmap_geometry_and_parse_error() {
    let d = tempfile::tempdir().unwrap();
    fs::write(d.path().join("em.json"), r#"{"rows":2,"cols":3,"levels":[0,1,2,3,4,0]}"#).unwrap();
    ok(d.path(), &["heatmap", "--map", "em.json", "--out", "h.ppm"]);
    let ppm = fs::read(d.path().join("h.ppm")).unwrap();
    assert!(ppm.starts_with(b"P6\n48 40\n255\n"));
    fs::write(d.path().join("bad.json"), "{\"rows\":2").unwrap();
    assert_eq!(mbaq(d.path(), &["heatmap", "--map", "bad.json", "--out", "x.ppm"]).status.code(), Some(6));
}

#[test]
fn qpmatrix_and_encode() {
    let d = tempfile::tempdir().unwrap();
    ok(d.path(), &["gen", "--seed", "4", "--out", "c"]);
    let levels: Vec<String> = (0..256).map(|k| (k % 5).to_string()).collect();
    fs::write(
        d.path().join("em.json"),
        format!(r#"{{"rows":16,"cols":16,"levels":[{}]}}"#, levels.join(",")),
    )
    .unwrap();
    ok(d.path(), &["qpmatrix", "--map", "em.json", "--map", "em.json", "--out", "qp.txt"]);
    let text = fs::read_to_string(d.path().join("qp.txt")).unwrap();
    assert!(text.contains("45") && text.contains("30"));

    let out = ok(d.path(), &["encode", "--frame", "c/scene_000_frame_000.pgm", "--map", "em.json", "--out", "r.pgm"]);
    let stats: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(stats["bits"].as_u64().unwrap() > 0);
    assert!(fs::read(d.path().join("r.pgm")).unwrap().starts_with(b"P5"));
}

#[test]
fn pet_prints_thresholds() {
    let d = tempfile::tempdir().unwrap();
    ok(d.path(), &["gen", "--seed", "4", "--out", "c"]);
    let out = ok(d.path(), &["pet", "--frame", "c/scene_001_frame_000.pgm"]);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(v["t_roi"].as_f64().unwrap() >= v["t_bg"].as_f64().unwrap());
}
