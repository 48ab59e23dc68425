//! End-to-end tests against the built `sclp` binary.

use std::path::Path;
use std::process::{Command, Output};

use sclp::{LabelMap, RasterImage};

fn sclp_cmd(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sclp"))
        .args(args)
        .current_dir(dir)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary should run")
}

fn assert_ok(out: &Output, what: &str) {
    assert!(
        out.status.success(),
        "{what} failed: {}\n{}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

/// Small-but-real settings so the whole pipeline runs in seconds.
const CONFIG: &str = "min_size = 20\n\
                      codebook_size = 12\n\
                      codebook_budget = 1500\n\
                      feature_count = 12\n\
                      max_iterations = 600\n\
                      seed = 11\n\
                      out_dir = run\n";

#[test]
fn synth_train_predict_evaluate_visualize_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    std::fs::write(root.join("run.cfg"), CONFIG).unwrap();

    let synth = sclp_cmd(
        root,
        &[
            "--config", "run.cfg", "synth", "data",
            "--train-images", "3", "--test-images", "2",
        ],
    );
    assert_ok(&synth, "synth");
    assert!(root.join("data/train.txt").is_file());
    assert!(root.join("data/images/test_0001.ppm").is_file());

    let train = sclp_cmd(root, &["--config", "run.cfg", "train", "data/train.txt"]);
    assert_ok(&train, "train");
    assert!(root.join("run/fusion.csv").is_file());
    assert!(root.join("run/classifiers/class_0.txt").is_file());

    let predict = sclp_cmd(
        root,
        &["--config", "run.cfg", "predict", "data/images/test_0000.ppm"],
    );
    assert_ok(&predict, "predict");
    let grid = LabelMap::read(root.join("run/test_0000_labels.txt"), 4).unwrap();
    assert_eq!((grid.width(), grid.height()), (96, 96));

    let evaluate = sclp_cmd(root, &["--config", "run.cfg", "evaluate", "data/test.txt"]);
    assert_ok(&evaluate, "evaluate");
    let table = String::from_utf8_lossy(&evaluate.stdout);
    assert!(table.contains("global accuracy"), "metrics table missing: {table}");
    assert!(table.contains("confusion.csv"));
    let csv = std::fs::read_to_string(root.join("run/confusion.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);

    let visualize = sclp_cmd(
        root,
        &[
            "--config", "run.cfg", "visualize", "data/test.txt",
            "data/images/test_0000.ppm", "run/test_0000_labels.txt", "run/overlay.ppm",
            "--alpha", "0.6",
        ],
    );
    assert_ok(&visualize, "visualize");
    let overlay = RasterImage::read(root.join("run/overlay.ppm")).unwrap();
    assert_eq!((overlay.width(), overlay.height()), (96, 96));
}

#[test]
fn staged_commands_produce_artifacts_in_order() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    std::fs::write(root.join("run.cfg"), CONFIG).unwrap();
    assert_ok(
        &sclp_cmd(root, &["--config", "run.cfg", "synth", "data", "--train-images", "2", "--test-images", "1"]),
        "synth",
    );

    // features before segment must report the missing superpixel maps
    let early = sclp_cmd(root, &["--config", "run.cfg", "features", "data/train.txt"]);
    assert_eq!(early.status.code(), Some(3), "expected missing-artifact exit");

    for stage in ["segment", "codebook", "features", "select", "train-clf", "prior", "train-fusion"] {
        let out = sclp_cmd(root, &["--config", "run.cfg", stage, "data/train.txt"]);
        assert_ok(&out, stage);
    }
    assert!(root.join("run/maps/0000.txt").is_file());
    assert!(root.join("run/selected.txt").is_file());
    assert!(root.join("run/fusion.csv").is_file());
}

#[test]
fn failures_use_the_documented_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();

    // unknown config key -> invalid input
    std::fs::write(root.join("bad.cfg"), "mystery = 1\n").unwrap();
    let bad = sclp_cmd(root, &["--config", "bad.cfg", "synth", "data"]);
    assert_eq!(bad.status.code(), Some(2));

    // predicting without trained artifacts -> missing artifact
    let image = RasterImage::filled(32, 32, [90, 120, 90]).unwrap();
    image.write(root.join("img.ppm")).unwrap();
    let missing = sclp_cmd(root, &["predict", "img.ppm"]);
    assert_eq!(missing.status.code(), Some(3));

    // one uniform image yields one labeled superpixel: too few to split
    let labels = LabelMap::from_labels(32, 32, vec![0; 32 * 32], 2).unwrap();
    labels.write(root.join("img_labels.txt")).unwrap();
    std::fs::write(
        root.join("tiny.txt"),
        "classes a b\npalette 255,0,0 0,0,255\npair img.ppm img_labels.txt\n",
    )
    .unwrap();
    let starved = sclp_cmd(
        root,
        &["--out-dir", "run", "--config", "/dev/null", "train", "tiny.txt"],
    );
    assert_eq!(
        starved.status.code(),
        Some(4),
        "stderr: {}",
        String::from_utf8_lossy(&starved.stderr)
    );

    // clap usage errors share the invalid-input code
    let usage = sclp_cmd(root, &["no-such-command"]);
    assert_eq!(usage.status.code(), Some(2));
}
