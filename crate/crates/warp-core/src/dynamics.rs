//! Synthetic dataset generation: adaptive Runge-Kutta integration of the
//! mass-spring-damper and Lotka-Volterra systems, closed-form sine curves,
//! spiral classification samples, the repeat-copy transform, min-max
//! normalization, and the dataset file format.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use crate::error::{Result, WarpError};
use crate::numkit::RngStream;
use crate::trainer::{ByteReader, SeqData};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn tag(&self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

/// Adaptive step-control settings for the integrator.
#[derive(Debug, Clone, Copy)]
pub struct Rk45Config {
    pub atol: f64,
    pub rtol: f64,
    pub h_init: f64,
    pub h_max: f64,
}

impl Default for Rk45Config {
    fn default() -> Self {
        Rk45Config {
            atol: 1e-8,
            rtol: 1e-6,
            h_init: 1e-3,
            h_max: 0.1,
        }
    }
}

// Dormand-Prince 5(4) tableau.
const C: [f64; 6] = [1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 6] = [
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Integrate `field` over a strictly increasing time grid with a
/// Dormand-Prince 5(4) pair and cubic Hermite dense output at grid points.
pub fn rk45_integrate<F: Fn(f64, &[f64], &mut [f64])>(
    field: F,
    x0: &[f64],
    grid: &[f64],
    cfg: &Rk45Config,
) -> Result<Vec<f64>> {
    let dim = x0.len();
    if grid.len() < 2 {
        return Err(WarpError::contract("rk45 grid needs at least 2 points"));
    }
    for w in grid.windows(2) {
        if w[1] <= w[0] {
            return Err(WarpError::contract("rk45 grid must be strictly increasing"));
        }
    }
    let mut out = vec![0.0; grid.len() * dim];
    out[..dim].copy_from_slice(x0);

    let mut t = grid[0];
    let t_end = *grid.last().unwrap();
    let mut y = x0.to_vec();
    let mut f0 = vec![0.0; dim];
    field(t, &y, &mut f0);
    if f0.iter().any(|v| !v.is_finite()) {
        return Err(WarpError::Integration {
            time: t,
            reason: "non-finite derivative at start".into(),
        });
    }
    let mut h = cfg.h_init.min(cfg.h_max).min(t_end - t);
    let mut next_grid = 1usize;

    let mut k = vec![vec![0.0; dim]; 7];
    let mut y_stage = vec![0.0; dim];
    let mut y1 = vec![0.0; dim];

    // Local error is controlled per step but accumulates over the whole
    // horizon, so run the controller well below the requested tolerance to
    // keep the global trajectory error within it.
    let atol = cfg.atol / 200.0;
    let rtol = cfg.rtol / 200.0;

    while t < t_end {
        if h < 1e-14 * t.abs().max(1.0) {
            return Err(WarpError::Integration {
                time: t,
                reason: "step size underflow".into(),
            });
        }
        if t + h > t_end {
            h = t_end - t;
        }
        k[0].copy_from_slice(&f0);
        for s in 0..6 {
            for i in 0..dim {
                let mut acc = y[i];
                for (j, kj) in k.iter().enumerate().take(s + 1) {
                    acc += h * A[s][j] * kj[i];
                }
                y_stage[i] = acc;
            }
            field(t + C[s] * h, &y_stage, &mut k[s + 1]);
        }
        // The 5th-order solution reuses the last stage row (FSAL pair).
        for i in 0..dim {
            let mut acc = y[i];
            for (j, aj) in A[5].iter().enumerate() {
                acc += h * aj * k[j][i];
            }
            y1[i] = acc;
        }
        if y1.iter().any(|v| !v.is_finite()) {
            h *= 0.5;
            continue;
        }
        let mut err_sq = 0.0;
        for i in 0..dim {
            let mut y4 = y[i];
            for (j, bj) in B4.iter().enumerate() {
                y4 += h * bj * k[j][i];
            }
            let scale = atol + rtol * y[i].abs().max(y1[i].abs());
            let e = (y1[i] - y4) / scale;
            err_sq += e * e;
        }
        let err = (err_sq / dim as f64).sqrt();

        if err <= 1.0 {
            // Accepted: emit dense output for grid points inside [t, t+h]
            // via cubic Hermite on (y, f0) and (y1, k7).
            while next_grid < grid.len() && grid[next_grid] <= t + h + 1e-15 {
                let theta = ((grid[next_grid] - t) / h).clamp(0.0, 1.0);
                let h00 = (1.0 + 2.0 * theta) * (1.0 - theta) * (1.0 - theta);
                let h10 = theta * (1.0 - theta) * (1.0 - theta);
                let h01 = theta * theta * (3.0 - 2.0 * theta);
                let h11 = theta * theta * (theta - 1.0);
                for i in 0..dim {
                    out[next_grid * dim + i] =
                        h00 * y[i] + h10 * h * k[0][i] + h01 * y1[i] + h11 * h * k[6][i];
                }
                next_grid += 1;
            }
            t += h;
            y.copy_from_slice(&y1);
            f0.copy_from_slice(&k[6]);
        }
        let factor = if err == 0.0 {
            10.0
        } else {
            (0.9 * err.powf(-0.2)).clamp(0.2, 10.0)
        };
        h = (h * factor).min(cfg.h_max);
    }
    Ok(out)
}

/// Mass-spring-damper vector field.
pub fn msd_field(m: f64, kk: f64, c: f64) -> impl Fn(f64, &[f64], &mut [f64]) {
    move |_t, x, dx| {
        dx[0] = x[1];
        dx[1] = -(kk / m) * x[0] - (c / m) * x[1];
    }
}

/// Lotka-Volterra vector field.
pub fn lv_field(alpha: f64, beta: f64, gamma: f64, delta: f64) -> impl Fn(f64, &[f64], &mut [f64]) {
    move |_t, x, dx| {
        dx[0] = alpha * x[0] - beta * x[0] * x[1];
        dx[1] = delta * x[0] * x[1] - gamma * x[1];
    }
}

/// Draw mass-spring-damper parameters `(m, k, c)` for a split.
pub fn draw_msd_params(split: Split, rng: &mut RngStream) -> (f64, f64, f64) {
    match split {
        Split::Train => (
            rng.uniform(0.02, 0.04),
            rng.uniform(4.0, 16.0),
            rng.uniform(0.01, 0.2),
        ),
        Split::Test => (
            rng.uniform(0.01, 0.05),
            rng.uniform(2.0, 18.0),
            rng.uniform(0.01, 0.3),
        ),
    }
}

/// Draw Lotka-Volterra parameters `(alpha, beta, gamma, delta)` for a split.
pub fn draw_lv_params(split: Split, rng: &mut RngStream) -> (f64, f64, f64, f64) {
    match split {
        Split::Train => (
            rng.uniform(20.0, 50.0),
            rng.uniform(80.0, 120.0),
            rng.uniform(80.0, 120.0),
            rng.uniform(20.0, 50.0),
        ),
        Split::Test => (
            rng.uniform(10.0, 60.0),
            rng.uniform(70.0, 130.0),
            rng.uniform(70.0, 130.0),
            rng.uniform(10.0, 60.0),
        ),
    }
}

/// In-memory dataset: inputs, next-step targets or labels, and metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub n: usize,
    pub t: usize,
    pub d_x: usize,
    pub d_y: usize,
    pub inputs: Vec<f64>,
    pub targets: Vec<f64>,
    pub labels: Option<Vec<u16>>,
    pub metadata: Vec<(String, String)>,
}

impl Dataset {
    pub fn view(&self) -> SeqData<'_> {
        SeqData {
            n: self.n,
            t: self.t,
            d_x: self.d_x,
            d_y: self.d_y,
            inputs: &self.inputs,
            targets: &self.targets,
            labels: self.labels.as_deref(),
        }
    }

    pub fn meta(&self, key: &str) -> Option<&str> {
        self.metadata
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn set_meta(&mut self, key: &str, value: &str) {
        if let Some(slot) = self.metadata.iter_mut().find(|(k, _)| k == key) {
            slot.1 = value.to_string();
            return;
        }
        self.metadata.push((key.to_string(), value.to_string()));
    }
}

/// Integrate one trajectory and split it into inputs (steps `0..T`) and
/// next-step targets (steps `1..=T`).
fn trajectory<F: Fn(f64, &[f64], &mut [f64])>(
    field: F,
    x0: &[f64],
    t_len: usize,
    cfg: &Rk45Config,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let dim = x0.len();
    let grid: Vec<f64> = (0..=t_len).map(|kk| kk as f64 / t_len as f64).collect();
    let raw = rk45_integrate(field, x0, &grid, cfg)?;
    let inputs = raw[..t_len * dim].to_vec();
    let targets = raw[dim..].to_vec();
    Ok((inputs, targets))
}

fn base_meta(system: &str, split: Split, seed: u64, l: usize) -> Vec<(String, String)> {
    vec![
        ("system".into(), system.into()),
        ("split".into(), split.tag().into()),
        ("seed".into(), seed.to_string()),
        ("L".into(), l.to_string()),
    ]
}

fn gen_msd_like(
    n: usize,
    split: Split,
    t_len: usize,
    seed: u64,
    zero_style: bool,
) -> Result<Dataset> {
    let cfg = Rk45Config::default();
    let mut inputs = Vec::with_capacity(n * t_len * 2);
    let mut targets = Vec::with_capacity(n * t_len * 2);
    let mut resampled = 0usize;
    for i in 0..n {
        let mut rng = RngStream::new(seed, i as u64);
        loop {
            let (m, kk, c) = draw_msd_params(split, &mut rng);
            let x0 = if zero_style {
                [rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)]
            } else {
                [1.0, 0.0]
            };
            match trajectory(msd_field(m, kk, c), &x0, t_len, &cfg) {
                Ok((xi, yi)) => {
                    inputs.extend_from_slice(&xi);
                    targets.extend_from_slice(&yi);
                    break;
                }
                Err(WarpError::Integration { .. }) => {
                    resampled += 1;
                    continue;
                }
                Err(e) => return Err(e),
            }
        }
    }
    let system = if zero_style { "msd-zero" } else { "msd" };
    let mut metadata = base_meta(system, split, seed, 100);
    metadata.push(("resampled".into(), resampled.to_string()));
    Ok(Dataset {
        n,
        t: t_len,
        d_x: 2,
        d_y: 2,
        inputs,
        targets,
        labels: None,
        metadata,
    })
}

/// Mass-spring-damper trajectories from the fixed initial condition (1, 0).
pub fn gen_msd(n: usize, split: Split, t_len: usize, seed: u64) -> Result<Dataset> {
    gen_msd_like(n, split, t_len, seed, false)
}

/// Mass-spring-damper with the initial condition drawn uniformly in [-1,1]^2.
pub fn gen_msd_zero(n: usize, split: Split, t_len: usize, seed: u64) -> Result<Dataset> {
    gen_msd_like(n, split, t_len, seed, true)
}

/// Lotka-Volterra trajectories from the initial condition (1, 1).
pub fn gen_lv(n: usize, split: Split, t_len: usize, seed: u64) -> Result<Dataset> {
    let cfg = Rk45Config::default();
    let mut inputs = Vec::with_capacity(n * t_len * 2);
    let mut targets = Vec::with_capacity(n * t_len * 2);
    let mut resampled = 0usize;
    for i in 0..n {
        let mut rng = RngStream::new(seed, i as u64);
        loop {
            let (alpha, beta, gamma, delta) = draw_lv_params(split, &mut rng);
            match trajectory(lv_field(alpha, beta, gamma, delta), &[1.0, 1.0], t_len, &cfg) {
                Ok((xi, yi)) => {
                    inputs.extend_from_slice(&xi);
                    targets.extend_from_slice(&yi);
                    break;
                }
                Err(WarpError::Integration { .. }) => {
                    resampled += 1;
                    continue;
                }
                Err(e) => return Err(e),
            }
        }
    }
    let mut metadata = base_meta("lv", split, seed, 100);
    metadata.push(("resampled".into(), resampled.to_string()));
    Ok(Dataset {
        n,
        t: t_len,
        d_x: 2,
        d_y: 2,
        inputs,
        targets,
        labels: None,
        metadata,
    })
}

/// Segment length of the repeat-copy layout: 3 copies + 2 ten-token
/// delimiters + 2 trailing pad tokens fill T = 256 exactly.
pub const REPEAT_COPY_SEG: usize = 78;
pub const REPEAT_COPY_DELIM: usize = 10;

/// Triplicate the leading segment of a 256 x 2 sequence, delimited by
/// ten-token runs of -1 in both channels, padded with -1 to length 256.
pub fn repeat_copy_lv(input: &[f64]) -> Result<Vec<f64>> {
    let d = 2;
    if input.len() != 256 * d {
        return Err(WarpError::DimMismatch {
            context: "repeat_copy_lv",
            expected: 256 * d,
            got: input.len(),
        });
    }
    let seg = &input[..REPEAT_COPY_SEG * d];
    let mut out = Vec::with_capacity(256 * d);
    for copy in 0..3 {
        out.extend_from_slice(seg);
        if copy < 2 {
            out.extend(std::iter::repeat(-1.0).take(REPEAT_COPY_DELIM * d));
        }
    }
    out.extend(std::iter::repeat(-1.0).take(2 * d));
    debug_assert_eq!(out.len(), 256 * d);
    Ok(out)
}

/// Replace a Lotka-Volterra dataset's targets with the repeat-copy layout.
pub fn apply_repeat_copy(data: &mut Dataset) -> Result<()> {
    if data.t != 256 || data.d_x != 2 {
        return Err(WarpError::contract("repeat-copy needs 256 x 2 sequences"));
    }
    let mut targets = Vec::with_capacity(data.inputs.len());
    for i in 0..data.n {
        let seq = &data.inputs[i * 256 * 2..(i + 1) * 256 * 2];
        targets.extend_from_slice(&repeat_copy_lv(seq)?);
    }
    data.targets = targets;
    data.set_meta("task", "repeat-copy");
    Ok(())
}

/// Named sine split sizes.
pub fn sine_split_size(name: &str) -> Option<usize> {
    match name {
        "tiny" => Some(1),
        "small" => Some(10),
        "medium" => Some(100),
        "large" => Some(1000),
        "huge" => Some(10000),
        _ => None,
    }
}

/// Sine curves `sin(2 pi t + phase)` sampled at t_k = k/15, T = 16, with the
/// phase drawn uniformly in [-pi/6, pi/6].
pub fn gen_sine(n: usize, seed: u64) -> Result<Dataset> {
    if n == 0 {
        return Err(WarpError::contract("sine split must be nonempty"));
    }
    let t_len = 16;
    let mut inputs = Vec::with_capacity(n * t_len);
    let mut targets = Vec::with_capacity(n * t_len);
    for i in 0..n {
        let mut rng = RngStream::new(seed, i as u64);
        let phase = rng.uniform(-std::f64::consts::FRAC_PI_6, std::f64::consts::FRAC_PI_6);
        for kk in 0..=t_len {
            let v = (std::f64::consts::TAU * kk as f64 / (t_len - 1) as f64 + phase).sin();
            if kk < t_len {
                inputs.push(v);
            }
            if kk > 0 {
                targets.push(v);
            }
        }
    }
    let mut metadata = base_meta("sine", Split::Train, seed, 1);
    metadata.push(("T".into(), t_len.to_string()));
    Ok(Dataset {
        n,
        t: t_len,
        d_x: 1,
        d_y: 1,
        inputs,
        targets,
        labels: None,
        metadata,
    })
}

/// Decaying spirals, 64 2-D points each: half clockwise (label 0), half
/// counterclockwise (label 1), order shuffled.
pub fn gen_spirals(n: usize, seed: u64) -> Result<Dataset> {
    if n == 0 || n % 2 != 0 {
        return Err(WarpError::contract("spirals needs a positive even count"));
    }
    let t_len = 64;
    let mut seqs: Vec<(Vec<f64>, u16)> = Vec::with_capacity(n);
    for i in 0..n {
        let mut rng = RngStream::new(seed, i as u64);
        let psi = rng.uniform(0.0, std::f64::consts::TAU);
        let label: u16 = if i < n / 2 { 0 } else { 1 };
        let mut seq = Vec::with_capacity(t_len * 2);
        for kk in 0..t_len {
            let angle = kk as f64 * 4.0 * std::f64::consts::PI / 63.0 + psi;
            let r = 1.0 - 0.85 * kk as f64 / 63.0;
            let (x, y) = (r * angle.cos(), r * angle.sin());
            seq.push(x);
            seq.push(if label == 1 { y } else { -y });
        }
        seqs.push((seq, label));
    }
    // Fisher-Yates over the sequence order.
    let mut shuffle_rng = RngStream::new(seed, n as u64 + 1);
    for i in (1..n).rev() {
        let j = (shuffle_rng.next_u64() % (i as u64 + 1)) as usize;
        seqs.swap(i, j);
    }
    let mut inputs = Vec::with_capacity(n * t_len * 2);
    let mut labels = Vec::with_capacity(n);
    for (seq, label) in seqs {
        inputs.extend_from_slice(&seq);
        labels.push(label);
    }
    let metadata = base_meta("spirals", Split::Train, seed, t_len);
    Ok(Dataset {
        n,
        t: t_len,
        d_x: 2,
        d_y: 2,
        inputs,
        targets: Vec::new(),
        labels: Some(labels),
        metadata,
    })
}

/// Per-feature min-max statistics fitted on a train split.
#[derive(Debug, Clone, PartialEq)]
pub struct NormStats {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

/// Fit per-feature `[min, max]` over flat `rows x d` data.
pub fn normalize_fit(data: &[f64], d: usize) -> Result<NormStats> {
    if data.is_empty() || data.len() % d != 0 {
        return Err(WarpError::contract("normalize_fit needs nonempty rows x d data"));
    }
    let mut min = vec![f64::INFINITY; d];
    let mut max = vec![f64::NEG_INFINITY; d];
    for row in data.chunks(d) {
        for (j, v) in row.iter().enumerate() {
            min[j] = min[j].min(*v);
            max[j] = max[j].max(*v);
        }
    }
    Ok(NormStats { min, max })
}

/// Affine map sending the fitted `[min, max]` to `[-1, 1]` per feature;
/// constant features map to 0.
pub fn normalize_apply(stats: &NormStats, data: &mut [f64]) {
    let d = stats.min.len();
    for row in data.chunks_mut(d) {
        for (j, v) in row.iter_mut().enumerate() {
            let span = stats.max[j] - stats.min[j];
            *v = if span == 0.0 {
                0.0
            } else {
                2.0 * (*v - stats.min[j]) / span - 1.0
            };
        }
    }
}

/// Inverse of [`normalize_apply`] for non-degenerate features.
pub fn denormalize_apply(stats: &NormStats, data: &mut [f64]) {
    let d = stats.min.len();
    for row in data.chunks_mut(d) {
        for (j, v) in row.iter_mut().enumerate() {
            let span = stats.max[j] - stats.min[j];
            if span != 0.0 {
                *v = (*v + 1.0) / 2.0 * span + stats.min[j];
            }
        }
    }
}

/// Fit stats on the train split's inputs and apply them to the inputs and
/// targets of every given dataset, recording the stats in metadata.
pub fn normalize_datasets(train_idx: usize, datasets: &mut [&mut Dataset]) -> Result<NormStats> {
    let stats = normalize_fit(&datasets[train_idx].inputs, datasets[train_idx].d_x)?;
    let fmt = |v: &[f64]| {
        v.iter()
            .map(|x| format!("{x:e}"))
            .collect::<Vec<_>>()
            .join(",")
    };
    let (min_s, max_s) = (fmt(&stats.min), fmt(&stats.max));
    for ds in datasets.iter_mut() {
        normalize_apply(&stats, &mut ds.inputs);
        normalize_apply(&stats, &mut ds.targets);
        ds.set_meta("norm.min", &min_s);
        ds.set_meta("norm.max", &max_s);
    }
    Ok(stats)
}

const DS_MAGIC: &[u8; 8] = b"WARPDS1\0";
const DS_VERSION: u16 = 1;

impl Dataset {
    pub fn save(&self, path: &Path) -> Result<()> {
        let labeled = self.labels.is_some();
        let mut buf = Vec::new();
        buf.extend_from_slice(DS_MAGIC);
        buf.extend_from_slice(&DS_VERSION.to_le_bytes());
        buf.extend_from_slice(&(self.n as u32).to_le_bytes());
        buf.extend_from_slice(&(self.t as u32).to_le_bytes());
        buf.extend_from_slice(&(self.d_x as u32).to_le_bytes());
        buf.extend_from_slice(&(self.d_y as u32).to_le_bytes());
        buf.push(labeled as u8);
        for v in &self.inputs {
            buf.extend_from_slice(&(*v as f32).to_le_bytes());
        }
        if let Some(labels) = &self.labels {
            for l in labels {
                buf.extend_from_slice(&l.to_le_bytes());
            }
        } else {
            for v in &self.targets {
                buf.extend_from_slice(&(*v as f32).to_le_bytes());
            }
        }
        for (k, v) in &self.metadata {
            buf.extend_from_slice(k.as_bytes());
            buf.push(b'=');
            buf.extend_from_slice(v.as_bytes());
            buf.push(b'\n');
        }
        let mut file = fs::File::create(path)?;
        file.write_all(&buf)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Dataset> {
        let bytes = fs::read(path)?;
        let mut r = ByteReader::new(&bytes);
        if r.take(8)? != DS_MAGIC {
            return Err(WarpError::Format("bad dataset magic".into()));
        }
        let version = r.u16()?;
        if version != DS_VERSION {
            return Err(WarpError::Format(format!("unsupported dataset version {version}")));
        }
        let n = r.u32()? as usize;
        let t = r.u32()? as usize;
        let d_x = r.u32()? as usize;
        let d_y = r.u32()? as usize;
        let labeled = r.u8()? != 0;
        let mut inputs = Vec::with_capacity(n * t * d_x);
        for _ in 0..n * t * d_x {
            inputs.push(r.f32()? as f64);
        }
        let (targets, labels) = if labeled {
            let mut labels = Vec::with_capacity(n);
            for _ in 0..n {
                labels.push(r.u16()?);
            }
            (Vec::new(), Some(labels))
        } else {
            let mut targets = Vec::with_capacity(n * t * d_y);
            for _ in 0..n * t * d_y {
                targets.push(r.f32()? as f64);
            }
            (targets, None)
        };
        let tail = r.take(r.remaining())?;
        let text = std::str::from_utf8(tail)
            .map_err(|_| WarpError::Format("dataset metadata not utf-8".into()))?;
        let mut metadata = Vec::new();
        for line in text.lines() {
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| WarpError::Format(format!("bad metadata line: {line}")))?;
            metadata.push((k.to_string(), v.to_string()));
        }
        Ok(Dataset {
            n,
            t,
            d_x,
            d_y,
            inputs,
            targets,
            labels,
            metadata,
        })
    }
}
