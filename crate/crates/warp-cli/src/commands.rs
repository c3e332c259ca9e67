//! The four experiment commands: dataset generation, training, evaluation,
//! and weight-trajectory analysis, plus the content-hash manifest.

use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};
use warp_core::dynamics::{
    apply_repeat_copy, gen_lv, gen_msd, gen_msd_zero, gen_sine, gen_spirals, normalize_datasets,
    Dataset, Split,
};
use warp_core::error::{Result, WarpError};
use warp_core::evalkit::{metrics_csv, successive_norms, theta_tau_correlation, weight_pca};
use warp_core::numkit::RngStream;
use warp_core::trainer::{
    evaluate_classify, evaluate_forecast, train_with_state, Checkpoint, LossKind, TrainState,
};
use warp_core::warpcell::{ScanMode, WarpModel};

use crate::config::{ExperimentConfig, System};

fn sha256_hex(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(bytes);
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// Rewrite `manifest.txt`, replacing the hash entries for `written` while
/// keeping entries for other files. The timestamp header is the only
/// non-deterministic output.
fn update_manifest(out_dir: &Path, written: &[PathBuf]) -> Result<()> {
    let manifest = out_dir.join("manifest.txt");
    let mut entries: Vec<(String, String)> = Vec::new();
    if let Ok(text) = fs::read_to_string(&manifest) {
        for line in text.lines() {
            if line.starts_with('#') || line.is_empty() {
                continue;
            }
            if let Some((hash, rel)) = line.split_once("  ") {
                entries.push((rel.to_string(), hash.to_string()));
            }
        }
    }
    for path in written {
        let rel = path
            .strip_prefix(out_dir)
            .unwrap_or(path)
            .to_string_lossy()
            .to_string();
        let hash = sha256_hex(&fs::read(path)?);
        entries.retain(|(r, _)| *r != rel);
        entries.push((rel, hash));
    }
    entries.sort();
    let ts = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let mut text = format!("# written {ts}\n");
    for (rel, hash) in entries {
        text.push_str(&format!("{hash}  {rel}\n"));
    }
    fs::write(&manifest, text)?;
    Ok(())
}

fn generate_pair(cfg: &ExperimentConfig) -> Result<(Dataset, Dataset)> {
    let d = &cfg.dataset;
    let (train_seed, test_seed) = (d.seed, d.seed + 1);
    let (mut train, mut test) = match d.system {
        System::Msd => (
            gen_msd(d.train_n, Split::Train, d.t, train_seed)?,
            gen_msd(d.test_n, Split::Test, d.t, test_seed)?,
        ),
        System::MsdZero => (
            gen_msd_zero(d.train_n, Split::Train, d.t, train_seed)?,
            gen_msd_zero(d.test_n, Split::Test, d.t, test_seed)?,
        ),
        System::Lv | System::LvRepeat => {
            let mut pair = (
                gen_lv(d.train_n, Split::Train, d.t, train_seed)?,
                gen_lv(d.test_n, Split::Test, d.t, test_seed)?,
            );
            if d.system == System::LvRepeat {
                if d.normalize {
                    normalize_datasets(0, &mut [&mut pair.0, &mut pair.1])?;
                }
                apply_repeat_copy(&mut pair.0)?;
                apply_repeat_copy(&mut pair.1)?;
            }
            pair
        }
        System::Sine => (gen_sine(d.train_n, train_seed)?, gen_sine(d.test_n, test_seed)?),
        System::Spirals => (
            gen_spirals(d.train_n, train_seed)?,
            gen_spirals(d.test_n, test_seed)?,
        ),
    };
    if d.normalize
        && !d.system.is_classification()
        && !matches!(d.system, System::Sine | System::LvRepeat)
    {
        normalize_datasets(0, &mut [&mut train, &mut test])?;
    }
    test.set_meta("split", "test");
    for ds in [&mut train, &mut test] {
        ds.set_meta("L", &d.l.to_string());
    }
    Ok((train, test))
}

pub fn cmd_generate(cfg: &ExperimentConfig, force: bool) -> Result<()> {
    let dir = cfg.out_dir.join("dataset");
    let train_path = dir.join("train.bin");
    let test_path = dir.join("test.bin");
    if !force && (train_path.exists() || test_path.exists()) {
        return Err(WarpError::contract(format!(
            "dataset files already exist under {}; pass --force to overwrite",
            dir.display()
        )));
    }
    let (train, test) = generate_pair(cfg)?;
    fs::create_dir_all(&dir)?;
    train.save(&train_path)?;
    test.save(&test_path)?;
    update_manifest(&cfg.out_dir, &[train_path, test_path])?;
    println!(
        "generated {} train sequences and {} test sequences under {}",
        train.n,
        test.n,
        dir.display()
    );
    Ok(())
}

fn checkpoint_path(cfg: &ExperimentConfig) -> PathBuf {
    cfg.out_dir.join("checkpoints").join("latest.bin")
}

pub fn cmd_train(cfg: &ExperimentConfig, resume: bool) -> Result<()> {
    let data = Dataset::load(&cfg.out_dir.join("dataset").join("train.bin"))?;
    let view = data.view();
    let train_cfg = cfg.train_config();
    let mut rng = RngStream::new(cfg.train.seed, 0);
    let mut model = cfg.build_model(&mut rng)?;
    let ck_path = checkpoint_path(cfg);
    let mut state = if resume {
        Checkpoint::load(&ck_path)?.restore(&mut model, &train_cfg)?
    } else {
        TrainState::fresh(&model, &train_cfg)
    };

    fs::create_dir_all(cfg.out_dir.join("checkpoints"))?;
    fs::create_dir_all(cfg.out_dir.join("metrics"))?;
    let trace_path = cfg.out_dir.join("metrics").join("loss_trace.csv");
    let mut trace_rows = if resume && trace_path.exists() {
        fs::read_to_string(&trace_path)?
    } else {
        "epoch,loss,lr\n".to_string()
    };

    let mut since_save = 0usize;
    while state.epoch < train_cfg.epochs {
        let mut step_cfg = train_cfg.clone();
        step_cfg.epochs = state.epoch + 1;
        let losses = train_with_state(&mut model, &view, &step_cfg, &mut state)?;
        trace_rows.push_str(&format!(
            "{},{:.9e},{:.9e}\n",
            state.epoch - 1,
            losses[0],
            state.plateau.lr
        ));
        since_save += 1;
        if since_save >= cfg.train.checkpoint_every {
            Checkpoint::capture(&model, &train_cfg, &state).save(&ck_path)?;
            since_save = 0;
        }
    }
    Checkpoint::capture(&model, &train_cfg, &state).save(&ck_path)?;
    fs::write(&trace_path, &trace_rows)?;
    update_manifest(&cfg.out_dir, &[ck_path, trace_path])?;
    println!("trained to epoch {} (lr {:.3e})", state.epoch, state.plateau.lr);
    Ok(())
}

/// Load the checkpoint into a freshly built model.
fn load_model(cfg: &ExperimentConfig) -> Result<WarpModel> {
    let mut rng = RngStream::new(cfg.train.seed, 0);
    let mut model = cfg.build_model(&mut rng)?;
    let ck = Checkpoint::load(&checkpoint_path(cfg))?;
    ck.restore(&mut model, &cfg.train_config())?;
    Ok(model)
}

pub fn cmd_eval(cfg: &ExperimentConfig) -> Result<()> {
    let data = Dataset::load(&cfg.out_dir.join("dataset").join("test.bin"))?;
    let view = data.view();
    let model = load_model(cfg)?;
    fs::create_dir_all(cfg.out_dir.join("metrics"))?;
    let out_path;
    if cfg.train.loss == LossKind::Cce || data.labels.is_some() {
        let acc = evaluate_classify(&model, &view)?;
        out_path = cfg.out_dir.join("metrics").join("accuracy.csv");
        fs::write(&out_path, format!("metric,value\naccuracy,{acc:.9e}\n"))?;
        println!("accuracy {acc:.4}");
    } else {
        let per_seq = evaluate_forecast(&model, &view, cfg.dataset.l)?;
        let rows: Vec<Vec<f64>> = per_seq
            .iter()
            .map(|m| {
                vec![
                    m.mse.unwrap_or(f64::NAN),
                    m.mae.unwrap_or(f64::NAN),
                    m.mape.unwrap_or(f64::NAN),
                    m.mape_skipped as f64,
                    m.nll.unwrap_or(f64::NAN),
                    m.bpd.unwrap_or(f64::NAN),
                ]
            })
            .collect();
        let csv = metrics_csv(&["mse", "mae", "mape", "mape_skipped", "nll", "bpd"], &rows);
        out_path = cfg.out_dir.join("metrics").join("forecast.csv");
        fs::write(&out_path, csv)?;
        let mean_mse =
            per_seq.iter().filter_map(|m| m.mse).sum::<f64>() / per_seq.len().max(1) as f64;
        println!("forecast mse {mean_mse:.6e} over {} sequences", per_seq.len());
    }
    update_manifest(&cfg.out_dir, &[out_path])?;
    Ok(())
}

/// Number of test sequences whose weight trajectories feed the diagnostics.
const ANALYZE_MAX_SEQ: usize = 16;

pub fn cmd_analyze(cfg: &ExperimentConfig) -> Result<()> {
    let data = Dataset::load(&cfg.out_dir.join("dataset").join("test.bin"))?;
    let view = data.view();
    let model = load_model(cfg)?;
    let d_th = model.d_theta();
    let n = view.n.min(ANALYZE_MAX_SEQ);
    let mut trajectories = Vec::with_capacity(n);
    for i in 0..n {
        let out = model.scan_recurrent(view.seq_inputs(i), view.t, ScanMode::NonAr, cfg.dataset.t)?;
        trajectories.push(out.states);
    }
    let refs: Vec<&[f64]> = trajectories.iter().map(|t| t.as_slice()).collect();

    let dir = cfg.out_dir.join("analysis");
    fs::create_dir_all(&dir)?;
    let mut written = Vec::new();

    let pca = weight_pca(&refs, d_th)?;
    let mut proj = String::from("trajectory,step,pc1,pc2\n");
    for (i, traj) in pca.projections.iter().enumerate() {
        for (t, row) in traj.chunks(2).enumerate() {
            proj.push_str(&format!("{i},{t},{:.9e},{:.9e}\n", row[0], row[1]));
        }
    }
    let path = dir.join("pca_projections.csv");
    fs::write(&path, proj)?;
    written.push(path);
    let path = dir.join("pca_ratios.csv");
    fs::write(
        &path,
        format!(
            "component,variance_ratio\n1,{:.9e}\n2,{:.9e}\n",
            pca.ratios[0], pca.ratios[1]
        ),
    )?;
    written.push(path);

    let mut norms = String::from("trajectory,step,delta_norm\n");
    for (i, traj) in trajectories.iter().enumerate() {
        for (t, v) in successive_norms(traj, d_th)?.iter().enumerate() {
            norms.push_str(&format!("{i},{},{v:.9e}\n", t + 1));
        }
    }
    let path = dir.join("successive_norms.csv");
    fs::write(&path, norms)?;
    written.push(path);

    let corr = theta_tau_correlation(&refs, d_th, view.t)?;
    let mut corr_csv = String::from("coordinate,pearson_r\n");
    for (j, r) in corr.iter().enumerate() {
        corr_csv.push_str(&format!("{j},{r:.9e}\n"));
    }
    let path = dir.join("theta_tau_correlation.csv");
    fs::write(&path, corr_csv)?;
    written.push(path);

    update_manifest(&cfg.out_dir, &written)?;
    println!(
        "analysis written for {n} trajectories (top-2 variance {:.3}%)",
        100.0 * (pca.ratios[0] + pca.ratios[1])
    );
    Ok(())
}
