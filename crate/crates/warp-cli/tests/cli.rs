use std::fs;
use std::path::PathBuf;
use std::process::Command;

use warp_cli::commands::{cmd_analyze, cmd_eval, cmd_generate, cmd_train};
use warp_cli::config::ExperimentConfig;
use warp_cli::resolve_config;
use warp_core::dynamics::Dataset;
use warp_core::numkit::RngStream;
use warp_core::trainer::Checkpoint;

fn desk_config(out: &std::path::Path, extra: &str) -> ExperimentConfig {
    let text = format!(
        "output.dir = {}\n\
         dataset.system = msd\n\
         dataset.train_n = 4\n\
         dataset.test_n = 4\n\
         dataset.t = 16\n\
         dataset.l = 8\n\
         model.width = 4\n\
         model.depth = 1\n\
         model.init = direct\n\
         train.epochs = 2\n\
         train.batch_size = 4\n\
         train.checkpoint_every = 1\n\
         {extra}",
        out.display()
    );
    ExperimentConfig::parse(&text).unwrap()
}

#[test]
fn sine_small_preset_split_sizes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = resolve_config(None, Some("sine-small"), None, Some(&dir.path().to_path_buf()))
        .unwrap();
    cmd_generate(&cfg, false).unwrap();
    let train = Dataset::load(&dir.path().join("dataset/train.bin")).unwrap();
    let test = Dataset::load(&dir.path().join("dataset/test.bin")).unwrap();
    assert_eq!(train.n, 10);
    assert_eq!(test.n, 100);
    assert_eq!(train.meta("split"), Some("train"));
    assert_eq!(test.meta("split"), Some("test"));
}

#[test]
fn generate_is_deterministic_and_respects_force() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = desk_config(dir.path(), "");
    cmd_generate(&cfg, false).unwrap();
    let first = fs::read(dir.path().join("dataset/train.bin")).unwrap();
    // Existing files are refused without --force.
    assert!(cmd_generate(&cfg, false).is_err());
    cmd_generate(&cfg, true).unwrap();
    let second = fs::read(dir.path().join("dataset/train.bin")).unwrap();
    assert_eq!(first, second);
    // The manifest's hash lines are stable; only the timestamp may move.
    let manifest = fs::read_to_string(dir.path().join("manifest.txt")).unwrap();
    let hashes: Vec<&str> = manifest.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(hashes.len(), 2);
    cmd_generate(&cfg, true).unwrap();
    let manifest2 = fs::read_to_string(dir.path().join("manifest.txt")).unwrap();
    let hashes2: Vec<&str> = manifest2.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(hashes, hashes2);
}

#[test]
fn zero_epoch_train_checkpoints_initialization() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = desk_config(dir.path(), "train.epochs = 0\n");
    cmd_generate(&cfg, false).unwrap();
    cmd_train(&cfg, false).unwrap();
    let ck = Checkpoint::load(&dir.path().join("checkpoints/latest.bin")).unwrap();
    let mut rng = RngStream::new(cfg.train.seed, 0);
    let fresh = cfg.build_model(&mut rng).unwrap();
    let stored: Vec<f64> = ck
        .entries
        .iter()
        .flat_map(|(_, _, v)| v.iter().copied())
        .collect();
    assert_eq!(stored, fresh.params.data);
}

#[test]
fn train_eval_analyze_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = desk_config(dir.path(), "");
    cmd_generate(&cfg, false).unwrap();
    cmd_train(&cfg, false).unwrap();
    let trace = fs::read_to_string(dir.path().join("metrics/loss_trace.csv")).unwrap();
    assert_eq!(trace.lines().count(), 3);
    assert!(trace.starts_with("epoch,loss,lr\n"));

    cmd_eval(&cfg).unwrap();
    let metrics = fs::read_to_string(dir.path().join("metrics/forecast.csv")).unwrap();
    // Header, 4 sequences, and the aggregate row.
    assert_eq!(metrics.lines().count(), 6);
    assert!(metrics.lines().last().unwrap().starts_with("ALL,"));

    cmd_analyze(&cfg).unwrap();
    let corr = fs::read_to_string(dir.path().join("analysis/theta_tau_correlation.csv")).unwrap();
    let mut rng = RngStream::new(cfg.train.seed, 0);
    let model = cfg.build_model(&mut rng).unwrap();
    assert_eq!(corr.lines().count(), model.d_theta() + 1);
    assert!(dir.path().join("analysis/pca_projections.csv").exists());
    assert!(dir.path().join("analysis/successive_norms.csv").exists());
}

#[test]
fn fresh_model_has_zero_successive_norms() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = desk_config(dir.path(), "train.epochs = 0\n");
    cmd_generate(&cfg, false).unwrap();
    cmd_train(&cfg, false).unwrap();
    cmd_analyze(&cfg).unwrap();
    let norms = fs::read_to_string(dir.path().join("analysis/successive_norms.csv")).unwrap();
    for line in norms.lines().skip(1) {
        let v: f64 = line.rsplit(',').next().unwrap().parse().unwrap();
        assert_eq!(v, 0.0);
    }
}

#[test]
fn resume_continues_and_rejects_changed_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = desk_config(dir.path(), "");
    cmd_generate(&cfg, false).unwrap();
    cmd_train(&cfg, false).unwrap();
    // Same config resumes as a no-op (already at the target epoch).
    cmd_train(&cfg, true).unwrap();
    let other = desk_config(dir.path(), "train.lr = 0.001\n");
    assert!(cmd_train(&other, true).is_err());
}

#[test]
fn classification_eval_reports_accuracy() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!(
        "output.dir = {}\n\
         dataset.system = spirals\n\
         dataset.train_n = 4\n\
         dataset.test_n = 4\n\
         dataset.t = 64\n\
         dataset.l = 64\n\
         dataset.normalize = false\n\
         model.width = 4\n\
         model.depth = 1\n\
         model.head = raw\n\
         model.init = hypernet\n\
         train.mode = recurrent\n\
         train.loss = cce\n\
         train.epochs = 1\n\
         train.batch_size = 4\n",
        dir.path().display()
    );
    let cfg = ExperimentConfig::parse(&text).unwrap();
    cmd_generate(&cfg, false).unwrap();
    cmd_train(&cfg, false).unwrap();
    cmd_eval(&cfg).unwrap();
    let csv = fs::read_to_string(dir.path().join("metrics/accuracy.csv")).unwrap();
    assert!(csv.lines().nth(1).unwrap().starts_with("accuracy,"));
}

#[test]
fn exit_codes() {
    let bin = env!("CARGO_BIN_EXE_warp");
    let dir = tempfile::tempdir().unwrap();

    // Validation failure: invalid system name in a config file.
    let bad_cfg = dir.path().join("bad.cfg");
    fs::write(&bad_cfg, "dataset.system = pendulum\n").unwrap();
    let out = Command::new(bin)
        .args(["generate", "--config"])
        .arg(&bad_cfg)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));

    // I/O failure: config file that does not exist.
    let out = Command::new(bin)
        .args(["train", "--config"])
        .arg(dir.path().join("missing.cfg"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));

    // I/O failure: eval before any dataset or checkpoint exists.
    let out = Command::new(bin)
        .args(["eval", "--preset", "sine-small", "--out"])
        .arg(dir.path().join("empty"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));

    // Unknown preset is a validation failure.
    let out = Command::new(bin)
        .args(["generate", "--preset", "nope"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn seed_override_applies_to_both_blocks() {
    let dir = tempfile::tempdir().unwrap();
    let path: PathBuf = dir.path().join("c.cfg");
    fs::write(&path, "dataset.seed = 1\ntrain.seed = 2\n").unwrap();
    let cfg = resolve_config(Some(&path), None, Some(77), None).unwrap();
    assert_eq!(cfg.dataset.seed, 77);
    assert_eq!(cfg.train.seed, 77);
}
