//! Loss functions, the epoch loop with teacher forcing, evaluation
//! protocols (context conditioning then autoregressive rollout, or
//! final-token classification), and binary checkpointing.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use crate::error::{Result, WarpError};
use crate::evalkit;
use crate::gradengine::{adabelief_step, clip_grad_norm, NodeId, OptState, PlateauState, Tape};
use crate::numkit::RngStream;
use crate::warpcell::{RecordedScan, ScanMode, WarpModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    Mse,
    Nll,
    Cce,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrainMode {
    RecurrentAr,
    RecurrentNonAr,
    Convolutional,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub p_forcing: f64,
    pub loss: LossKind,
    pub mode: TrainMode,
    pub seed: u64,
    /// Gradient-norm ceiling applied before every optimizer step.
    pub g_lim: f64,
    /// Context length used by the evaluation protocol.
    pub context_len: usize,
    /// Sequence length the decode clock is normalized to.
    pub train_t: usize,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.p_forcing) {
            return Err(WarpError::contract("p_forcing must lie in [0, 1]"));
        }
        if self.context_len > self.train_t {
            return Err(WarpError::contract("context length must not exceed train length"));
        }
        if self.train_t == 0 {
            return Err(WarpError::contract("train length must be >= 1"));
        }
        if self.batch_size == 0 {
            return Err(WarpError::contract("batch size must be >= 1"));
        }
        if self.lr <= 0.0 || !self.lr.is_finite() {
            return Err(WarpError::contract("learning rate must be positive"));
        }
        if self.g_lim <= 0.0 {
            return Err(WarpError::contract("gradient clip limit must be positive"));
        }
        if self.mode == TrainMode::Convolutional && self.loss == LossKind::Cce {
            return Err(WarpError::contract(
                "convolutional mode supports mse or nll losses only",
            ));
        }
        Ok(())
    }

    /// Stable hash of the fields that define a run, for checkpoint pairing.
    pub fn hash(&self) -> u64 {
        let text = format!(
            "epochs={};batch={};lr={:e};pf={:e};loss={:?};mode={:?};seed={};glim={:e};L={};T={}",
            self.epochs,
            self.batch_size,
            self.lr,
            self.p_forcing,
            self.loss,
            self.mode,
            self.seed,
            self.g_lim,
            self.context_len,
            self.train_t
        );
        fnv1a(text.as_bytes())
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= *b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Borrowed view of a sequence dataset in flat row-major layout.
#[derive(Debug, Clone, Copy)]
pub struct SeqData<'a> {
    pub n: usize,
    pub t: usize,
    pub d_x: usize,
    pub d_y: usize,
    /// `n * t * d_x` observations.
    pub inputs: &'a [f64],
    /// `n * t * d_y` targets (`y_t` is the next observation for forecasting).
    pub targets: &'a [f64],
    pub labels: Option<&'a [u16]>,
}

impl<'a> SeqData<'a> {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.t == 0 {
            return Err(WarpError::contract("dataset must contain sequences"));
        }
        if self.inputs.len() != self.n * self.t * self.d_x {
            return Err(WarpError::DimMismatch {
                context: "dataset inputs",
                expected: self.n * self.t * self.d_x,
                got: self.inputs.len(),
            });
        }
        if !self.targets.is_empty() && self.targets.len() != self.n * self.t * self.d_y {
            return Err(WarpError::DimMismatch {
                context: "dataset targets",
                expected: self.n * self.t * self.d_y,
                got: self.targets.len(),
            });
        }
        if let Some(labels) = self.labels {
            if labels.len() != self.n {
                return Err(WarpError::DimMismatch {
                    context: "dataset labels",
                    expected: self.n,
                    got: labels.len(),
                });
            }
        }
        Ok(())
    }

    pub fn seq_inputs(&self, i: usize) -> &'a [f64] {
        &self.inputs[i * self.t * self.d_x..(i + 1) * self.t * self.d_x]
    }

    pub fn seq_targets(&self, i: usize) -> &'a [f64] {
        &self.targets[i * self.t * self.d_y..(i + 1) * self.t * self.d_y]
    }
}

/// `(1/T) sum_t ||y_t - yhat_t||^2`.
pub fn loss_mse(y: &[f64], yhat: &[f64], t_len: usize) -> f64 {
    assert_eq!(y.len(), yhat.len());
    y.iter().zip(yhat).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / t_len as f64
}

/// Simplified Gaussian NLL used for training:
/// `(1/T) sum_t [||y_t - mu_t||^2 / (2 sigma_t^2) + sum_d ln sigma_{t,d}]`
/// with elementwise sigma.
pub fn loss_nll(y: &[f64], mu: &[f64], sigma: &[f64], t_len: usize) -> f64 {
    assert_eq!(y.len(), mu.len());
    assert_eq!(y.len(), sigma.len());
    let mut s = 0.0;
    for i in 0..y.len() {
        let r = y[i] - mu[i];
        s += r * r / (2.0 * sigma[i] * sigma[i]) + sigma[i].ln();
    }
    s / t_len as f64
}

/// `-log softmax(logits)[label]` with max subtraction.
pub fn loss_cce(label: usize, logits: &[f64]) -> Result<f64> {
    if label >= logits.len() {
        return Err(WarpError::contract(format!(
            "label {label} out of range for {} classes",
            logits.len()
        )));
    }
    let m = logits.iter().fold(f64::NEG_INFINITY, |a, &x| a.max(x));
    let lse = m + logits.iter().map(|x| (x - m).exp()).sum::<f64>().ln();
    Ok(lse - logits[label])
}

/// Target of one sequence's loss.
pub enum Target<'a> {
    Dense(&'a [f64]),
    Label(u16),
}

/// Record the training loss of a recorded scan on the tape.
pub fn record_loss(
    tape: &mut Tape,
    rec: &RecordedScan,
    loss: LossKind,
    target: &Target,
    d_y: usize,
) -> Result<NodeId> {
    let t_len = rec.means.len();
    match (loss, target) {
        (LossKind::Mse, Target::Dense(y)) => {
            let mut total: Option<NodeId> = None;
            for (t, &mean) in rec.means.iter().enumerate() {
                let y_t = tape.constant(y[t * d_y..(t + 1) * d_y].to_vec());
                let diff = tape.sub(mean, y_t);
                let sq = tape.sum_sq(diff);
                total = Some(match total {
                    None => sq,
                    Some(acc) => tape.add(acc, sq),
                });
            }
            Ok(tape.scale(total.unwrap(), 1.0 / t_len as f64))
        }
        (LossKind::Nll, Target::Dense(y)) => {
            let sigmas = rec
                .sigmas
                .as_ref()
                .ok_or_else(|| WarpError::contract("nll loss requires a probabilistic head"))?;
            let mut total: Option<NodeId> = None;
            for t in 0..t_len {
                let term = tape.gaussian_nll(
                    y[t * d_y..(t + 1) * d_y].to_vec(),
                    rec.means[t],
                    sigmas[t],
                );
                total = Some(match total {
                    None => term,
                    Some(acc) => tape.add(acc, term),
                });
            }
            Ok(tape.scale(total.unwrap(), 1.0 / t_len as f64))
        }
        (LossKind::Cce, Target::Label(label)) => {
            let logits = *rec.means.last().unwrap();
            if *label as usize >= tape.value(logits).len() {
                return Err(WarpError::contract(format!(
                    "label {label} out of range for {} classes",
                    tape.value(logits).len()
                )));
            }
            Ok(tape.cce(logits, *label as usize))
        }
        _ => Err(WarpError::contract("loss kind does not match target kind")),
    }
}

/// Mutable training state, checkpointable mid-run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainState {
    pub opt: OptState,
    pub plateau: PlateauState,
    pub rng: RngStream,
    pub epoch: usize,
}

impl TrainState {
    pub fn fresh(model: &WarpModel, cfg: &TrainConfig) -> TrainState {
        TrainState {
            opt: OptState::new(model.params.len()),
            plateau: PlateauState::new(cfg.lr),
            rng: RngStream::new(cfg.seed, 1),
            epoch: 0,
        }
    }
}

fn record_run(
    model: &WarpModel,
    tape: &mut Tape,
    inputs: &[f64],
    cfg: &TrainConfig,
    rng: &mut RngStream,
) -> Result<RecordedScan> {
    match cfg.mode {
        TrainMode::RecurrentNonAr => {
            model.record_scan(tape, inputs, cfg.train_t, ScanMode::NonAr, cfg.train_t)
        }
        TrainMode::RecurrentAr => model.record_scan(
            tape,
            inputs,
            cfg.train_t,
            ScanMode::Ar {
                p_forcing: cfg.p_forcing,
                rng,
            },
            cfg.train_t,
        ),
        TrainMode::Convolutional => model.record_conv(tape, inputs, cfg.train_t, cfg.train_t),
    }
}

/// Loss value and parameter gradient of one sequence under the configured
/// mode; autoregressive draws come from `rng`.
pub fn sequence_loss_grad(
    model: &WarpModel,
    inputs: &[f64],
    target: &Target,
    cfg: &TrainConfig,
    rng: &mut RngStream,
) -> Result<(f64, Vec<f64>)> {
    let mut tape = Tape::new(model.params.len());
    let rec = record_run(model, &mut tape, inputs, cfg, rng)?;
    let loss_node = record_loss(&mut tape, &rec, cfg.loss, target, model.d_y)?;
    let loss = tape.value(loss_node)[0];
    let mut grad = vec![0.0; model.params.len()];
    tape.backward(loss_node, &mut grad)?;
    Ok((loss, grad))
}

/// Run the epoch loop from `state.epoch` to `cfg.epochs`, mutating the model
/// in place. Returns the per-epoch mean loss trace of the epochs run.
pub fn train_with_state(
    model: &mut WarpModel,
    data: &SeqData,
    cfg: &TrainConfig,
    state: &mut TrainState,
) -> Result<Vec<f64>> {
    cfg.validate()?;
    data.validate()?;
    if cfg.train_t != data.t {
        return Err(WarpError::DimMismatch {
            context: "train length vs dataset",
            expected: data.t,
            got: cfg.train_t,
        });
    }
    if data.d_x != model.d_x || data.d_y != model.d_y {
        return Err(WarpError::contract("model and dataset dimensions disagree"));
    }
    if cfg.loss == LossKind::Cce && data.labels.is_none() {
        return Err(WarpError::contract("cce loss requires labels"));
    }

    let p = model.params.len();
    let mut trace = Vec::new();
    let mut grad = vec![0.0; p];

    while state.epoch < cfg.epochs {
        let mut epoch_loss = 0.0;
        let mut start = 0usize;
        while start < data.n {
            let end = (start + cfg.batch_size).min(data.n);
            grad.iter_mut().for_each(|g| *g = 0.0);
            let mut batch_loss = 0.0;
            for i in start..end {
                let mut tape = Tape::new(p);
                let rec = record_run(model, &mut tape, data.seq_inputs(i), cfg, &mut state.rng)?;
                let target = match cfg.loss {
                    LossKind::Cce => Target::Label(data.labels.unwrap()[i]),
                    _ => Target::Dense(data.seq_targets(i)),
                };
                let loss_node = record_loss(&mut tape, &rec, cfg.loss, &target, model.d_y)?;
                let loss = tape.value(loss_node)[0];
                if !loss.is_finite() {
                    return Err(WarpError::Divergence {
                        context: "train loss",
                        step: state.epoch,
                    });
                }
                batch_loss += loss;
                tape.backward(loss_node, &mut grad)?;
            }
            let n_batch = (end - start) as f64;
            for g in grad.iter_mut() {
                *g /= n_batch;
            }
            clip_grad_norm(&mut grad, cfg.g_lim);
            adabelief_step(&mut model.params.data, &grad, &mut state.opt, state.plateau.lr)?;
            epoch_loss += batch_loss;
            start = end;
        }
        let mean_loss = epoch_loss / data.n as f64;
        trace.push(mean_loss);
        state.plateau.update(mean_loss);
        state.epoch += 1;
    }
    Ok(trace)
}

/// Train from a fresh optimizer state.
pub fn train(model: &mut WarpModel, data: &SeqData, cfg: &TrainConfig) -> Result<Vec<f64>> {
    let mut state = TrainState::fresh(model, cfg);
    train_with_state(model, data, cfg, &mut state)
}

/// Per-sequence forecast metrics over the window `[L, T)`. `None` fields
/// mean the window was empty.
#[derive(Debug, Clone, PartialEq)]
pub struct ForecastMetrics {
    pub mse: Option<f64>,
    pub mae: Option<f64>,
    pub mape: Option<f64>,
    pub mape_skipped: usize,
    pub nll: Option<f64>,
    pub bpd: Option<f64>,
}

/// Teacher-force through `[0, L)`, then feed the mean prediction back;
/// metrics are computed on `[L, T)` against the normalized targets.
pub fn evaluate_forecast(model: &WarpModel, data: &SeqData, l: usize) -> Result<Vec<ForecastMetrics>> {
    data.validate()?;
    if l < 1 || l > data.t {
        return Err(WarpError::contract("context length must satisfy 1 <= L <= T"));
    }
    let (t_len, d_x, d_y) = (data.t, data.d_x, data.d_y);
    let mut reports = Vec::with_capacity(data.n);
    for i in 0..data.n {
        let inputs = data.seq_inputs(i);
        let targets = data.seq_targets(i);
        let x0 = &inputs[..d_x];
        let mut theta = model.init_state(x0)?;
        let mut out = model.decode(&theta, model.tau(0, t_len), x0)?;
        let mut means = out.mean.clone();
        let mut sigmas = out.sigma.clone();
        let mut u_prev = x0.to_vec();
        for t in 1..t_len {
            let token = if t < l {
                inputs[t * d_x..(t + 1) * d_x].to_vec()
            } else {
                if d_y != d_x {
                    return Err(WarpError::contract(
                        "autoregressive rollout requires d_y == d_x",
                    ));
                }
                out.mean.clone()
            };
            let dx: Vec<f64> = token.iter().zip(&u_prev).map(|(a, b)| a - b).collect();
            theta = model.step(&theta, &dx, t)?;
            out = model.decode(&theta, model.tau(t, t_len), x0)?;
            means.extend_from_slice(&out.mean);
            if let (Some(list), Some(s)) = (sigmas.as_mut(), &out.sigma) {
                list.extend_from_slice(s);
            }
            u_prev = token;
        }
        let window = l * d_y..t_len * d_y;
        if window.is_empty() {
            reports.push(ForecastMetrics {
                mse: None,
                mae: None,
                mape: None,
                mape_skipped: 0,
                nll: None,
                bpd: None,
            });
            continue;
        }
        let y = &targets[window.clone()];
        let yhat = &means[window.clone()];
        let (mape_val, skipped) = evalkit::mape(y, yhat);
        let (nll, bpd) = match &sigmas {
            Some(s) => {
                let sw = &s[window];
                (Some(evalkit::nll_eval(y, yhat, sw)), Some(evalkit::bpd(y, yhat, sw)))
            }
            None => (None, None),
        };
        reports.push(ForecastMetrics {
            mse: Some(evalkit::mse(y, yhat)),
            mae: Some(evalkit::mae(y, yhat)),
            mape: Some(mape_val),
            mape_skipped: skipped,
            nll,
            bpd,
        });
    }
    Ok(reports)
}

/// Teacher-forced classification accuracy: argmax of the final-token logits,
/// ties broken toward the lowest class index.
pub fn evaluate_classify(model: &WarpModel, data: &SeqData) -> Result<f64> {
    data.validate()?;
    let labels = data
        .labels
        .ok_or_else(|| WarpError::contract("classification needs labels"))?;
    if data.n == 0 {
        return Err(WarpError::contract("classification needs a nonempty set"));
    }
    let (t_len, d_x) = (data.t, data.d_x);
    let mut correct = 0usize;
    for i in 0..data.n {
        let inputs = data.seq_inputs(i);
        let x0 = &inputs[..d_x];
        let mut theta = model.init_state(x0)?;
        let mut u_prev = x0;
        for t in 1..t_len {
            let x_t = &inputs[t * d_x..(t + 1) * d_x];
            let dx: Vec<f64> = x_t.iter().zip(u_prev).map(|(a, b)| a - b).collect();
            theta = model.step(&theta, &dx, t)?;
            u_prev = x_t;
        }
        let logits = model.decode(&theta, 1.0, x0)?.mean;
        let mut best = 0usize;
        for (c, v) in logits.iter().enumerate() {
            if *v > logits[best] {
                best = c;
            }
        }
        if best == labels[i] as usize {
            correct += 1;
        }
    }
    Ok(correct as f64 / data.n as f64)
}


const CKPT_MAGIC: &[u8; 8] = b"WARPCK1\0";
const CKPT_VERSION: u16 = 1;

/// Serializable snapshot of a training run.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub epoch: u64,
    pub config_hash: u64,
    /// Named parameter arrays in the model's enumeration order.
    pub entries: Vec<(String, Vec<usize>, Vec<f64>)>,
    pub opt: OptState,
    pub plateau: PlateauState,
    pub rng_seed: u64,
    pub rng_stream: u64,
    pub rng_counter: u64,
}

impl Checkpoint {
    pub fn capture(model: &WarpModel, cfg: &TrainConfig, state: &TrainState) -> Checkpoint {
        let entries = model
            .params
            .entries()
            .iter()
            .map(|e| {
                (
                    e.name.clone(),
                    e.dims.clone(),
                    model.params.data[e.offset..e.offset + e.len].to_vec(),
                )
            })
            .collect();
        Checkpoint {
            epoch: state.epoch as u64,
            config_hash: cfg.hash(),
            entries,
            opt: state.opt.clone(),
            plateau: state.plateau.clone(),
            rng_seed: cfg.seed,
            rng_stream: 1,
            rng_counter: state.rng.counter(),
        }
    }

    /// Write the model values and training state back. The parameter table
    /// must match the model's enumeration exactly.
    pub fn restore(&self, model: &mut WarpModel, cfg: &TrainConfig) -> Result<TrainState> {
        if self.config_hash != cfg.hash() {
            return Err(WarpError::contract(
                "checkpoint was produced by a different configuration",
            ));
        }
        let model_entries = model.params.entries().to_vec();
        if model_entries.len() != self.entries.len() {
            return Err(WarpError::contract("checkpoint parameter table mismatch"));
        }
        for (e, (name, dims, values)) in model_entries.iter().zip(&self.entries) {
            if e.name != *name || e.dims != *dims || e.len != values.len() {
                return Err(WarpError::contract(format!(
                    "checkpoint block {name} does not match model layout"
                )));
            }
            model.params.data[e.offset..e.offset + e.len].copy_from_slice(values);
        }
        let mut rng = RngStream::new(self.rng_seed, self.rng_stream);
        rng.set_counter(self.rng_counter);
        Ok(TrainState {
            opt: self.opt.clone(),
            plateau: self.plateau.clone(),
            rng,
            epoch: self.epoch as usize,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::new();
        buf.extend_from_slice(CKPT_MAGIC);
        buf.extend_from_slice(&CKPT_VERSION.to_le_bytes());
        buf.extend_from_slice(&self.epoch.to_le_bytes());
        buf.extend_from_slice(&self.config_hash.to_le_bytes());

        buf.extend_from_slice(&(self.entries.len() as u32).to_le_bytes());
        for (name, dims, values) in &self.entries {
            let name_bytes = name.as_bytes();
            buf.extend_from_slice(&(name_bytes.len() as u16).to_le_bytes());
            buf.extend_from_slice(name_bytes);
            buf.push(dims.len() as u8);
            for d in dims {
                buf.extend_from_slice(&(*d as u32).to_le_bytes());
            }
            for v in values {
                buf.extend_from_slice(&v.to_le_bytes());
            }
        }

        buf.extend_from_slice(&self.opt.t.to_le_bytes());
        buf.extend_from_slice(&self.opt.beta1.to_le_bytes());
        buf.extend_from_slice(&self.opt.beta2.to_le_bytes());
        buf.extend_from_slice(&self.opt.eps.to_le_bytes());
        buf.extend_from_slice(&(self.opt.m.len() as u32).to_le_bytes());
        for v in self.opt.m.iter().chain(&self.opt.s) {
            buf.extend_from_slice(&v.to_le_bytes());
        }

        buf.extend_from_slice(&self.plateau.lr.to_le_bytes());
        buf.push(self.plateau.best.is_some() as u8);
        buf.extend_from_slice(&self.plateau.best.unwrap_or(0.0).to_le_bytes());
        buf.extend_from_slice(&self.plateau.bad_epochs.to_le_bytes());
        buf.extend_from_slice(&self.plateau.patience.to_le_bytes());
        buf.extend_from_slice(&self.plateau.threshold.to_le_bytes());
        buf.extend_from_slice(&self.plateau.factor.to_le_bytes());
        buf.extend_from_slice(&(self.plateau.window.len() as u32).to_le_bytes());
        for v in &self.plateau.window {
            buf.extend_from_slice(&v.to_le_bytes());
        }

        buf.extend_from_slice(&self.rng_seed.to_le_bytes());
        buf.extend_from_slice(&self.rng_stream.to_le_bytes());
        buf.extend_from_slice(&self.rng_counter.to_le_bytes());

        let mut file = fs::File::create(path)?;
        file.write_all(&buf)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Checkpoint> {
        let bytes = fs::read(path)?;
        let mut r = ByteReader::new(&bytes);
        let magic = r.take(8)?;
        if magic != CKPT_MAGIC {
            return Err(WarpError::Format("bad checkpoint magic".into()));
        }
        let version = r.u16()?;
        if version != CKPT_VERSION {
            return Err(WarpError::Format(format!("unsupported checkpoint version {version}")));
        }
        let epoch = r.u64()?;
        let config_hash = r.u64()?;

        let n_entries = r.u32()? as usize;
        let mut entries = Vec::with_capacity(n_entries);
        for _ in 0..n_entries {
            let name_len = r.u16()? as usize;
            let name = String::from_utf8(r.take(name_len)?.to_vec())
                .map_err(|_| WarpError::Format("checkpoint name not utf-8".into()))?;
            let rank = r.u8()? as usize;
            let mut dims = Vec::with_capacity(rank);
            for _ in 0..rank {
                dims.push(r.u32()? as usize);
            }
            let len: usize = dims.iter().product();
            let mut values = Vec::with_capacity(len);
            for _ in 0..len {
                values.push(r.f64()?);
            }
            entries.push((name, dims, values));
        }

        let t = r.u64()?;
        let beta1 = r.f64()?;
        let beta2 = r.f64()?;
        let eps = r.f64()?;
        let p = r.u32()? as usize;
        let mut m = Vec::with_capacity(p);
        for _ in 0..p {
            m.push(r.f64()?);
        }
        let mut s = Vec::with_capacity(p);
        for _ in 0..p {
            s.push(r.f64()?);
        }
        let opt = OptState {
            m,
            s,
            t,
            beta1,
            beta2,
            eps,
        };

        let lr = r.f64()?;
        let has_best = r.u8()? != 0;
        let best_val = r.f64()?;
        let bad_epochs = r.u32()?;
        let patience = r.u32()?;
        let threshold = r.f64()?;
        let factor = r.f64()?;
        let w = r.u32()? as usize;
        let mut window = Vec::with_capacity(w);
        for _ in 0..w {
            window.push(r.f64()?);
        }
        let plateau = PlateauState {
            lr,
            window,
            best: has_best.then_some(best_val),
            bad_epochs,
            patience,
            threshold,
            factor,
        };

        let rng_seed = r.u64()?;
        let rng_stream = r.u64()?;
        let rng_counter = r.u64()?;
        r.expect_end()?;

        Ok(Checkpoint {
            epoch,
            config_hash,
            entries,
            opt,
            plateau,
            rng_seed,
            rng_stream,
            rng_counter,
        })
    }
}

/// Little-endian cursor over a byte buffer.
pub(crate) struct ByteReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> ByteReader<'a> {
    pub fn new(bytes: &'a [u8]) -> Self {
        ByteReader { bytes, pos: 0 }
    }

    pub fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(WarpError::Format("truncated file".into()));
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    pub fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    pub fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    pub fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub fn f32(&mut self) -> Result<f32> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }

    pub fn expect_end(&self) -> Result<()> {
        if self.remaining() != 0 {
            return Err(WarpError::Format("trailing bytes".into()));
        }
        Ok(())
    }
}
