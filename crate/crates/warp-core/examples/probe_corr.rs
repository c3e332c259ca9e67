// Scratch probe: theta-tau correlation distributions for the trained MSD
// models under different scan modes and test-set sizes.
use warp_core::dynamics::{gen_msd, normalize_datasets, Split};
use warp_core::evalkit::theta_tau_correlation;
use warp_core::numkit::RngStream;
use warp_core::rootnet::{Activation, RootHead, RootSpec};
use warp_core::trainer::{train_with_state, LossKind, TrainConfig, TrainMode, TrainState};
use warp_core::warpcell::{InitMode, ScanMode, TransitionKind, WarpModel};

fn train_msd(head: RootHead, ar_epochs: usize) -> WarpModel {
    let mut train = gen_msd(2000, Split::Train, 256, 0).unwrap();
    let mut test = gen_msd(200, Split::Test, 256, 1).unwrap();
    normalize_datasets(0, &mut [&mut train, &mut test]).unwrap();
    let root = RootSpec::new(24, 1, 2, Activation::Swish, head).unwrap();
    let mut rng = RngStream::new(0, 0);
    let mut model = WarpModel::new(
        2,
        2,
        root,
        TransitionKind::Dense,
        InitMode::DirectTheta0,
        None,
        &mut rng,
    )
    .unwrap();
    let mut cfg = TrainConfig {
        epochs: 5,
        batch_size: 256,
        lr: 1e-3,
        p_forcing: 0.25,
        loss: LossKind::Mse,
        mode: TrainMode::RecurrentNonAr,
        seed: 0,
        g_lim: 1.0,
        context_len: 100,
        train_t: 256,
    };
    let mut state = TrainState::fresh(&model, &cfg);
    train_with_state(&mut model, &train.view(), &cfg, &mut state).unwrap();
    cfg.mode = TrainMode::RecurrentAr;
    cfg.epochs = ar_epochs;
    train_with_state(&mut model, &train.view(), &cfg, &mut state).unwrap();
    model
}

fn probe(label: &str, model: &WarpModel, n_seq: usize, ar: bool, context: usize) {
    let mut test = gen_msd(n_seq, Split::Test, 256, 1).unwrap();
    let mut train = gen_msd(2000, Split::Train, 256, 0).unwrap();
    normalize_datasets(0, &mut [&mut train, &mut test]).unwrap();
    let d_th = model.d_theta();
    let mut trajs = Vec::new();
    let mut rng = RngStream::new(99, 0);
    for i in 0..test.n {
        let mode = if ar {
            ScanMode::Ar { p_forcing: 0.0, rng: &mut rng }
        } else {
            ScanMode::NonAr
        };
        let out = model
            .scan_recurrent(test.view().seq_inputs(i), 256, mode, context)
            .unwrap();
        trajs.push(out.states);
    }
    let refs: Vec<&[f64]> = trajs.iter().map(|t| t.as_slice()).collect();
    let corr = theta_tau_correlation(&refs, d_th, 256).unwrap();
    let mut abs: Vec<f64> = corr.iter().map(|r| r.abs()).collect();
    abs.sort_by(f64::total_cmp);
    let strong = abs.iter().filter(|r| **r >= 0.5).count();
    println!(
        "{label}: n={n_seq} strong {strong}/{} ({:.1}%), |r| p50 {:.3} p75 {:.3} p90 {:.3} max {:.3}",
        abs.len(),
        100.0 * strong as f64 / abs.len() as f64,
        abs[abs.len() / 2],
        abs[abs.len() * 3 / 4],
        abs[abs.len() * 9 / 10],
        abs[abs.len() - 1]
    );
}

fn main() {
    let warp = train_msd(RootHead::Raw, 80);
    println!("warp trained");
    for (n, ar, ctx, tag) in [
        (16usize, false, 256usize, "warp nonar"),
        (200, false, 256, "warp nonar"),
        (16, true, 100, "warp ar"),
        (200, true, 100, "warp ar"),
    ] {
        probe(tag, &warp, n, ar, ctx);
    }
    drop(warp);
    let phys = train_msd(RootHead::MsdExpm, 70);
    println!("phys trained");
    for (n, ar, ctx, tag) in [
        (16usize, false, 256usize, "phys nonar"),
        (200, false, 256, "phys nonar"),
        (16, true, 100, "phys ar"),
        (200, true, 100, "phys ar"),
    ] {
        probe(tag, &phys, n, ar, ctx);
    }
}
