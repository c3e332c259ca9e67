//! Experiment configuration: a line-oriented `section.key = value` format
//! with full validation up front, plus shipped presets.

use std::path::PathBuf;

use warp_core::error::{Result, WarpError};
use warp_core::numkit::RngStream;
use warp_core::rootnet::{Activation, RootHead, RootSpec};
use warp_core::trainer::{LossKind, TrainConfig, TrainMode};
use warp_core::warpcell::{InitMode, TransitionKind, WarpModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum System {
    Msd,
    MsdZero,
    Lv,
    LvRepeat,
    Sine,
    Spirals,
}

impl System {
    pub fn dims(&self) -> (usize, usize) {
        match self {
            System::Sine => (1, 1),
            _ => (2, 2),
        }
    }

    pub fn is_classification(&self) -> bool {
        matches!(self, System::Spirals)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetBlock {
    pub system: System,
    pub train_n: usize,
    pub test_n: usize,
    pub seed: u64,
    pub t: usize,
    pub l: usize,
    pub normalize: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelBlock {
    pub width: usize,
    pub depth: usize,
    pub activation: Activation,
    pub head: String,
    pub d_lim: f64,
    pub sigma_min: f64,
    pub transition: TransitionKind,
    pub init: InitMode,
    pub w_lim: Option<f64>,
    pub fixed_tau: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainBlock {
    pub mode: TrainMode,
    pub loss: LossKind,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub p_forcing: f64,
    pub seed: u64,
    pub g_lim: f64,
    pub checkpoint_every: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub out_dir: PathBuf,
    pub dataset: DatasetBlock,
    pub model: ModelBlock,
    pub train: TrainBlock,
}

fn bad(msg: String) -> WarpError {
    WarpError::Contract(msg)
}

fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| bad(format!("config key {key}: cannot parse value {v:?}")))
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(bad(format!("config key {key}: expected true or false, got {v:?}"))),
    }
}

fn parse_opt_f64(key: &str, v: &str) -> Result<Option<f64>> {
    if v == "none" {
        Ok(None)
    } else {
        parse_num::<f64>(key, v).map(Some)
    }
}

impl ExperimentConfig {
    fn defaults() -> ExperimentConfig {
        ExperimentConfig {
            out_dir: PathBuf::from("runs/experiment"),
            dataset: DatasetBlock {
                system: System::Msd,
                train_n: 1024,
                test_n: 102,
                seed: 0,
                t: 256,
                l: 100,
                normalize: true,
            },
            model: ModelBlock {
                width: 48,
                depth: 3,
                activation: Activation::Swish,
                head: "gaussian".into(),
                d_lim: 1.0,
                sigma_min: 1e-4,
                transition: TransitionKind::Dense,
                init: InitMode::DirectTheta0,
                w_lim: None,
                fixed_tau: None,
            },
            train: TrainBlock {
                mode: TrainMode::RecurrentAr,
                loss: LossKind::Nll,
                epochs: 1000,
                batch_size: 1024,
                lr: 1e-5,
                p_forcing: 0.25,
                seed: 0,
                g_lim: 1e-7,
                checkpoint_every: 100,
            },
        }
    }

    /// Parse from the text format. Every line is empty, a `#` comment, or
    /// `section.key = value`; unknown keys are rejected.
    pub fn parse(text: &str) -> Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig::defaults();
        let mut rank: Option<usize> = None;
        let mut transition_name: Option<String> = None;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| bad(format!("config line {}: expected key = value", lineno + 1)))?;
            let (key, v) = (key.trim(), value.trim());
            match key {
                "output.dir" => cfg.out_dir = PathBuf::from(v),
                "dataset.system" => {
                    cfg.dataset.system = match v {
                        "msd" => System::Msd,
                        "msd-zero" => System::MsdZero,
                        "lv" => System::Lv,
                        "lv-repeat" => System::LvRepeat,
                        "sine" => System::Sine,
                        "spirals" => System::Spirals,
                        _ => return Err(bad(format!("unknown dataset.system {v:?}"))),
                    }
                }
                "dataset.train_n" => cfg.dataset.train_n = parse_num(key, v)?,
                "dataset.test_n" => cfg.dataset.test_n = parse_num(key, v)?,
                "dataset.seed" => cfg.dataset.seed = parse_num(key, v)?,
                "dataset.t" => cfg.dataset.t = parse_num(key, v)?,
                "dataset.l" => cfg.dataset.l = parse_num(key, v)?,
                "dataset.normalize" => cfg.dataset.normalize = parse_bool(key, v)?,
                "model.width" => cfg.model.width = parse_num(key, v)?,
                "model.depth" => cfg.model.depth = parse_num(key, v)?,
                "model.activation" => {
                    cfg.model.activation = match v {
                        "relu" => Activation::Relu,
                        "swish" => Activation::Swish,
                        "identity" => Activation::Identity,
                        _ => return Err(bad(format!("unknown model.activation {v:?}"))),
                    }
                }
                "model.head" => {
                    match v {
                        "raw" | "minmax-clip" | "dyn-tanh" | "gaussian" | "sine-phase"
                        | "msd-expm" => cfg.model.head = v.into(),
                        _ => return Err(bad(format!("unknown model.head {v:?}"))),
                    };
                }
                "model.d_lim" => cfg.model.d_lim = parse_num(key, v)?,
                "model.sigma_min" => cfg.model.sigma_min = parse_num(key, v)?,
                "model.transition" => match v {
                    "dense" | "diagonal" | "low-rank" => transition_name = Some(v.into()),
                    _ => return Err(bad(format!("unknown model.transition {v:?}"))),
                },
                "model.rank" => rank = Some(parse_num(key, v)?),
                "model.init" => {
                    cfg.model.init = match v {
                        "direct" => InitMode::DirectTheta0,
                        "hypernet" => InitMode::Hypernet,
                        _ => return Err(bad(format!("unknown model.init {v:?}"))),
                    }
                }
                "model.w_lim" => cfg.model.w_lim = parse_opt_f64(key, v)?,
                "model.fixed_tau" => cfg.model.fixed_tau = parse_opt_f64(key, v)?,
                "train.mode" => {
                    cfg.train.mode = match v {
                        "recurrent-ar" => TrainMode::RecurrentAr,
                        "recurrent" => TrainMode::RecurrentNonAr,
                        "conv" => TrainMode::Convolutional,
                        _ => return Err(bad(format!("unknown train.mode {v:?}"))),
                    }
                }
                "train.loss" => {
                    cfg.train.loss = match v {
                        "mse" => LossKind::Mse,
                        "nll" => LossKind::Nll,
                        "cce" => LossKind::Cce,
                        _ => return Err(bad(format!("unknown train.loss {v:?}"))),
                    }
                }
                "train.epochs" => cfg.train.epochs = parse_num(key, v)?,
                "train.batch_size" => cfg.train.batch_size = parse_num(key, v)?,
                "train.lr" => cfg.train.lr = parse_num(key, v)?,
                "train.p_forcing" => cfg.train.p_forcing = parse_num(key, v)?,
                "train.seed" => cfg.train.seed = parse_num(key, v)?,
                "train.g_lim" => cfg.train.g_lim = parse_num(key, v)?,
                "train.checkpoint_every" => cfg.train.checkpoint_every = parse_num(key, v)?,
                _ => return Err(bad(format!("unknown config key {key:?}"))),
            }
        }
        if let Some(name) = transition_name {
            cfg.model.transition = match name.as_str() {
                "dense" => TransitionKind::Dense,
                "diagonal" => TransitionKind::Diagonal,
                _ => TransitionKind::LowRank {
                    rank: rank.ok_or_else(|| bad("model.transition = low-rank requires model.rank".into()))?,
                },
            };
        } else if let Some(r) = rank {
            cfg.model.transition = TransitionKind::LowRank { rank: r };
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dataset.train_n == 0 || self.dataset.test_n == 0 {
            return Err(bad("dataset split sizes must be positive".into()));
        }
        if self.dataset.t == 0 || self.dataset.l > self.dataset.t {
            return Err(bad("dataset needs t >= 1 and l <= t".into()));
        }
        if self.dataset.system == System::Spirals && self.dataset.train_n % 2 != 0 {
            return Err(bad("spirals needs an even train_n".into()));
        }
        if self.train.checkpoint_every == 0 {
            return Err(bad("train.checkpoint_every must be positive".into()));
        }
        // Root and training-config construction run their own checks; the
        // transition rank check needs the state dimension, nothing more.
        let (_, d_y) = self.dataset.system.dims();
        let root = RootSpec::new(
            self.model.width,
            self.model.depth,
            d_y,
            self.model.activation,
            self.head(),
        )?;
        if let TransitionKind::LowRank { rank } = self.model.transition {
            if rank == 0 || rank > root.param_count() {
                return Err(bad(format!(
                    "model.rank {rank} out of range 1..={}",
                    root.param_count()
                )));
            }
        }
        if let Some(w) = self.model.w_lim {
            if w <= 0.0 {
                return Err(bad("model.w_lim must be positive".into()));
            }
        }
        self.train_config().validate()?;
        Ok(())
    }

    pub fn head(&self) -> RootHead {
        match self.model.head.as_str() {
            "raw" => RootHead::Raw,
            "minmax-clip" => RootHead::MinMaxClip {
                d_lim: self.model.d_lim,
            },
            "dyn-tanh" => RootHead::DynamicTanh,
            "gaussian" => RootHead::Gaussian {
                sigma_min: self.model.sigma_min,
            },
            "sine-phase" => RootHead::SinePhase,
            _ => RootHead::MsdExpm,
        }
    }

    pub fn build_model(&self, rng: &mut RngStream) -> Result<WarpModel> {
        let (d_x, d_y) = self.dataset.system.dims();
        let root = RootSpec::new(
            self.model.width,
            self.model.depth,
            d_y,
            self.model.activation,
            self.head(),
        )?;
        let mut model = WarpModel::new(
            d_x,
            d_y,
            root,
            self.model.transition,
            self.model.init,
            self.model.w_lim,
            rng,
        )?;
        model.fixed_tau = self.model.fixed_tau;
        Ok(model)
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.train.epochs,
            batch_size: self.train.batch_size,
            lr: self.train.lr,
            p_forcing: self.train.p_forcing,
            loss: self.train.loss,
            mode: self.train.mode,
            seed: self.train.seed,
            g_lim: self.train.g_lim,
            context_len: self.dataset.l,
            train_t: self.dataset.t,
        }
    }
}

/// Shipped preset configurations, keyed by name.
pub fn preset(name: &str) -> Option<String> {
    let sine = |n: usize, split: &str, phys: bool| {
        let head = if phys { "\ntrain.loss = mse\nmodel.head = sine-phase" } else { "" };
        let suffix = if phys { "-phys" } else { "" };
        format!(
            "output.dir = runs/sine-{split}{suffix}\n\
             dataset.system = sine\n\
             dataset.train_n = {n}\n\
             dataset.test_n = 100\n\
             dataset.t = 16\n\
             dataset.l = 1\n\
             dataset.normalize = false\n\
             model.init = hypernet\n\
             train.epochs = 1000\n\
             train.batch_size = {n}\n\
             train.p_forcing = 0.25{head}\n"
        )
    };
    let msd = |system: &str, phys: bool| {
        let head = if phys { "\ntrain.loss = mse\nmodel.head = msd-expm" } else { "" };
        let suffix = if phys { "-phys" } else { "" };
        let init = if system == "msd-zero" { "hypernet" } else { "direct" };
        format!(
            "output.dir = runs/{system}-warp{suffix}\n\
             dataset.system = {system}\n\
             dataset.train_n = 1024\n\
             dataset.test_n = 102\n\
             dataset.t = 256\n\
             dataset.l = 100\n\
             model.init = {init}\n\
             train.epochs = 1000\n\
             train.batch_size = 1024\n\
             train.p_forcing = 0.25{head}\n"
        )
    };
    let lv = |system: &str| {
        format!(
            "output.dir = runs/{system}-warp\n\
             dataset.system = {system}\n\
             dataset.train_n = 1024\n\
             dataset.test_n = 102\n\
             dataset.t = 256\n\
             dataset.l = 100\n\
             model.init = direct\n\
             train.epochs = 1500\n\
             train.batch_size = 1024\n\
             train.p_forcing = 1.0\n"
        )
    };
    let text = match name {
        "msd-warp" => msd("msd", false),
        "msd-warp-phys" => msd("msd", true),
        "msd-zero-warp" => msd("msd-zero", false),
        "msd-zero-warp-phys" => msd("msd-zero", true),
        "lv-warp" => lv("lv"),
        "lv-repeat-warp" => lv("lv-repeat"),
        "sine-tiny" => sine(1, "tiny", false),
        "sine-small" => sine(10, "small", false),
        "sine-medium" => sine(100, "medium", false),
        "sine-large" => sine(1000, "large", false),
        "sine-huge" => sine(10000, "huge", false),
        "sine-tiny-phys" => sine(1, "tiny", true),
        "sine-small-phys" => sine(10, "small", true),
        "sine-medium-phys" => sine(100, "medium", true),
        "sine-large-phys" => sine(1000, "large", true),
        "sine-huge-phys" => sine(10000, "huge", true),
        "spirals-warp" => "output.dir = runs/spirals-warp\n\
             dataset.system = spirals\n\
             dataset.train_n = 10000\n\
             dataset.test_n = 1000\n\
             dataset.t = 64\n\
             dataset.l = 64\n\
             dataset.normalize = false\n\
             model.width = 24\n\
             model.depth = 1\n\
             model.head = raw\n\
             model.init = hypernet\n\
             train.mode = recurrent\n\
             train.loss = cce\n\
             train.epochs = 4000\n\
             train.batch_size = 10000\n"
            .to_string(),
        "msd-warp-fixed-tau" => format!("{}model.fixed_tau = 0.5\n", msd("msd", false)),
        "msd-zero-warp-direct-theta0" => {
            format!("{}model.init = direct\n", msd("msd-zero", false))
        }
        "msd-warp-diagonal" => format!("{}model.transition = diagonal\n", msd("msd", false)),
        "msd-warp-lowrank" => {
            format!("{}model.transition = low-rank\nmodel.rank = 16\n", msd("msd", false))
        }
        _ => return None,
    };
    Some(text)
}

pub fn preset_names() -> Vec<&'static str> {
    vec![
        "msd-warp",
        "msd-warp-phys",
        "msd-zero-warp",
        "msd-zero-warp-phys",
        "lv-warp",
        "lv-repeat-warp",
        "sine-tiny",
        "sine-small",
        "sine-medium",
        "sine-large",
        "sine-huge",
        "sine-tiny-phys",
        "sine-small-phys",
        "sine-medium-phys",
        "sine-large-phys",
        "sine-huge-phys",
        "spirals-warp",
        "msd-warp-fixed-tau",
        "msd-zero-warp-direct-theta0",
        "msd-warp-diagonal",
        "msd-warp-lowrank",
    ]
}
