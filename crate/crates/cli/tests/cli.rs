use std::path::Path;
use std::process::{Command, Output};

fn fatigue(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fatigue"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Synthesises a small dataset and trains on it; returns (manifest, model).
fn trained(dir: &Path, frames: &str) -> (String, String) {
    let data = dir.join("data");
    let out = fatigue(&[
        "synth",
        "--out",
        s(&data),
        "--frames",
        frames,
        "--seed",
        "5",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let manifest = data.join("manifest.csv");
    let model_dir = dir.join("model");
    let out = fatigue(&[
        "train",
        "--manifest",
        s(&manifest),
        "--out-dir",
        s(&model_dir),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    (
        s(&manifest).to_owned(),
        s(&model_dir.join("model.pipe")).to_owned(),
    )
}

#[test]
fn help_and_version_succeed() {
    for args in [&["--help"][..], &["--version"], &["train", "--help"]] {
        let out = fatigue(args);
        assert_eq!(code(&out), 0, "{args:?}");
        assert!(!out.stdout.is_empty());
    }
}

#[test]
fn usage_errors_exit_1() {
    assert_eq!(code(&fatigue(&[])), 1);
    assert_eq!(code(&fatigue(&["no-such-command"])), 1);
    assert_eq!(code(&fatigue(&["synth"])), 1);
    let dir = tempfile::tempdir().unwrap();
    let out = fatigue(&[
        "detect-train",
        "--out",
        s(&dir.path().join("c.txt")),
        "--rounds",
        "3,x",
    ]);
    assert_eq!(code(&out), 1);
}

#[test]
fn bad_config_key_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let (manifest, _) = trained(dir.path(), "24");
    let out = fatigue(&[
        "train",
        "--manifest",
        &manifest,
        "--out-dir",
        s(&dir.path().join("m2")),
        "--set",
        "no_such_key=1",
    ]);
    assert_eq!(code(&out), 1);
    let out = fatigue(&[
        "train",
        "--manifest",
        &manifest,
        "--out-dir",
        s(&dir.path().join("m2")),
        "--set",
        "novalue",
    ]);
    assert_eq!(code(&out), 1);
}

#[test]
fn missing_manifest_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = fatigue(&[
        "train",
        "--manifest",
        s(&dir.path().join("absent.csv")),
        "--out-dir",
        s(dir.path()),
    ]);
    assert_eq!(code(&out), 2);
}

#[test]
fn corrupt_manifest_row_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = dir.path().join("manifest.csv");
    std::fs::write(&manifest, "path,label\nframe.pgm,+7\n").unwrap();
    let out = fatigue(&[
        "train",
        "--manifest",
        s(&manifest),
        "--out-dir",
        s(dir.path()),
    ]);
    assert_eq!(code(&out), 2);
}

#[test]
fn bad_model_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let (manifest, _) = trained(dir.path(), "24");
    let junk = dir.path().join("junk.pipe");
    std::fs::write(&junk, "NOT A MODEL\n").unwrap();
    for cmd in ["eval", "simulate"] {
        let out = fatigue(&[cmd, "--manifest", &manifest, "--model", s(&junk)]);
        assert_eq!(code(&out), 3, "{cmd}");
        let out = fatigue(&[
            cmd,
            "--manifest",
            &manifest,
            "--model",
            s(&dir.path().join("absent.pipe")),
        ]);
        assert_eq!(code(&out), 3, "{cmd} with missing model");
    }
}

#[test]
fn train_eval_simulate_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let (manifest, model) = trained(dir.path(), "60");
    for f in ["model.pca", "model.svm", "model.pipe"] {
        assert!(dir.path().join("model").join(f).is_file(), "{f}");
    }

    let report = dir.path().join("report.json");
    let out = fatigue(&[
        "eval",
        "--manifest",
        &manifest,
        "--model",
        &model,
        "--folds",
        "3",
        "--report",
        s(&report),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    let acc = json["holdout"]["accuracy"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&acc));
    assert_eq!(json["holdout"]["n"], 60);
    assert_eq!(
        json["cross_validation"]["folds"].as_array().unwrap().len(),
        3
    );

    let trace = dir.path().join("trace.txt");
    let out = fatigue(&[
        "simulate",
        "--manifest",
        &manifest,
        "--model",
        &model,
        "--out",
        s(&trace),
    ]);
    assert_eq!(code(&out), 0);
    let text = std::fs::read_to_string(&trace).unwrap();
    assert_eq!(text.lines().filter(|l| l.starts_with("FRAME")).count(), 60);
    let stdout = fatigue(&["simulate", "--manifest", &manifest, "--model", &model]).stdout;
    assert_eq!(stdout, text.as_bytes());
}

#[test]
fn synth_is_seed_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    for run in ["a", "b"] {
        let out = fatigue(&[
            "synth",
            "--out",
            s(&dir.path().join(run)),
            "--frames",
            "8",
            "--seed",
            "11",
        ]);
        assert_eq!(code(&out), 0);
    }
    for f in ["manifest.csv", "frame_00000.pgm", "frame_00007.pgm"] {
        let a = std::fs::read(dir.path().join("a").join(f)).unwrap();
        let b = std::fs::read(dir.path().join("b").join(f)).unwrap();
        assert_eq!(a, b, "{f}");
    }
}

#[test]
fn detect_train_writes_a_cascade() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("cascade.txt");
    let out = fatigue(&[
        "detect-train",
        "--out",
        s(&out_path),
        "--positives",
        "40",
        "--negatives",
        "80",
        "--rounds",
        "2,3",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&out_path).unwrap();
    assert!(text.starts_with("CASCADE1 24 24 "));
    let cascade = fatigue_core::detector::load_cascade(&text).unwrap();
    assert!(!cascade.stages.is_empty() && cascade.stages.len() <= 2);
}
