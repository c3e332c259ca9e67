//! Python bindings for the weight-space linear RNN: model construction,
//! recurrent/convolutional scans, training, evaluation, and the synthetic
//! dataset generators. All arrays cross the boundary as flat `list[float]`
//! with explicit dimensions.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use warp_core::dynamics;
use warp_core::error::WarpError;
use warp_core::evalkit;
use warp_core::numkit::RngStream;
use warp_core::rootnet::{Activation, RootHead, RootSpec};
use warp_core::trainer::{
    self, LossKind, SeqData, TrainConfig, TrainMode,
};
use warp_core::warpcell::{InitMode, ScanMode, TransitionKind, WarpModel};

fn err(e: WarpError) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn parse_activation(s: &str) -> PyResult<Activation> {
    match s {
        "relu" => Ok(Activation::Relu),
        "swish" => Ok(Activation::Swish),
        "identity" => Ok(Activation::Identity),
        _ => Err(PyValueError::new_err(format!("unknown activation {s:?}"))),
    }
}

fn parse_head(s: &str, d_lim: f64, sigma_min: f64) -> PyResult<RootHead> {
    match s {
        "raw" => Ok(RootHead::Raw),
        "minmax-clip" => Ok(RootHead::MinMaxClip { d_lim }),
        "dyn-tanh" => Ok(RootHead::DynamicTanh),
        "gaussian" => Ok(RootHead::Gaussian { sigma_min }),
        "sine-phase" => Ok(RootHead::SinePhase),
        "msd-expm" => Ok(RootHead::MsdExpm),
        _ => Err(PyValueError::new_err(format!("unknown head {s:?}"))),
    }
}

fn parse_loss(s: &str) -> PyResult<LossKind> {
    match s {
        "mse" => Ok(LossKind::Mse),
        "nll" => Ok(LossKind::Nll),
        "cce" => Ok(LossKind::Cce),
        _ => Err(PyValueError::new_err(format!("unknown loss {s:?}"))),
    }
}

fn parse_mode(s: &str) -> PyResult<TrainMode> {
    match s {
        "recurrent-ar" => Ok(TrainMode::RecurrentAr),
        "recurrent" => Ok(TrainMode::RecurrentNonAr),
        "conv" => Ok(TrainMode::Convolutional),
        _ => Err(PyValueError::new_err(format!("unknown mode {s:?}"))),
    }
}

/// A weight-space linear RNN model.
#[pyclass(name = "Model")]
struct PyModel {
    inner: WarpModel,
}

#[pymethods]
impl PyModel {
    #[new]
    #[pyo3(signature = (d_x, d_y, width, depth, activation="swish", head="gaussian",
        d_lim=1.0, sigma_min=1e-4, transition="dense", rank=0, init="direct",
        w_lim=None, fixed_tau=None, seed=0))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        d_x: usize,
        d_y: usize,
        width: usize,
        depth: usize,
        activation: &str,
        head: &str,
        d_lim: f64,
        sigma_min: f64,
        transition: &str,
        rank: usize,
        init: &str,
        w_lim: Option<f64>,
        fixed_tau: Option<f64>,
        seed: u64,
    ) -> PyResult<Self> {
        let root = RootSpec::new(
            width,
            depth,
            d_y,
            parse_activation(activation)?,
            parse_head(head, d_lim, sigma_min)?,
        )
        .map_err(err)?;
        let transition = match transition {
            "dense" => TransitionKind::Dense,
            "diagonal" => TransitionKind::Diagonal,
            "low-rank" => TransitionKind::LowRank { rank },
            _ => return Err(PyValueError::new_err(format!("unknown transition {transition:?}"))),
        };
        let init = match init {
            "direct" => InitMode::DirectTheta0,
            "hypernet" => InitMode::Hypernet,
            _ => return Err(PyValueError::new_err(format!("unknown init {init:?}"))),
        };
        let mut rng = RngStream::new(seed, 0);
        let mut inner =
            WarpModel::new(d_x, d_y, root, transition, init, w_lim, &mut rng).map_err(err)?;
        inner.fixed_tau = fixed_tau;
        Ok(PyModel { inner })
    }

    /// Dimension of the weight state (the flattened root network).
    fn d_theta(&self) -> usize {
        self.inner.d_theta()
    }

    /// Total number of learnable parameters.
    fn param_count(&self) -> usize {
        self.inner.params.len()
    }

    /// Flat parameter vector.
    fn get_params(&self) -> Vec<f64> {
        self.inner.params.data.clone()
    }

    fn set_params(&mut self, params: Vec<f64>) -> PyResult<()> {
        if params.len() != self.inner.params.len() {
            return Err(PyValueError::new_err("parameter length mismatch"));
        }
        self.inner.params.data = params;
        Ok(())
    }

    /// Named parameter blocks as `(name, dims, offset)` tuples.
    fn param_layout(&self) -> Vec<(String, Vec<usize>, usize)> {
        self.inner
            .params
            .entries()
            .iter()
            .map(|e| (e.name.clone(), e.dims.clone(), e.offset))
            .collect()
    }

    /// Teacher-forced recurrent scan over one flat `t_len * d_x` sequence.
    /// Returns `(states, means, sigmas)`; `sigmas` is None for
    /// deterministic heads.
    #[pyo3(signature = (inputs, t_len, train_t=None))]
    fn scan(
        &self,
        inputs: Vec<f64>,
        t_len: usize,
        train_t: Option<usize>,
    ) -> PyResult<(Vec<f64>, Vec<f64>, Option<Vec<f64>>)> {
        let out = self
            .inner
            .scan_recurrent(&inputs, t_len, ScanMode::NonAr, train_t.unwrap_or(t_len))
            .map_err(err)?;
        Ok((out.states, out.means, out.sigmas))
    }

    /// Convolutional evaluation of the same map as `scan`.
    #[pyo3(signature = (inputs, t_len, train_t=None))]
    fn conv_forward(
        &self,
        inputs: Vec<f64>,
        t_len: usize,
        train_t: Option<usize>,
    ) -> PyResult<(Vec<f64>, Vec<f64>, Option<Vec<f64>>)> {
        let out = self
            .inner
            .conv_forward(&inputs, t_len, train_t.unwrap_or(t_len))
            .map_err(err)?;
        Ok((out.states, out.means, out.sigmas))
    }

    /// Train on `n` flat sequences; returns the per-epoch mean losses.
    #[pyo3(signature = (inputs, targets, n, t, epochs, lr=1e-5, batch_size=0,
        p_forcing=0.25, loss="nll", mode="recurrent-ar", seed=0, g_lim=1e-7,
        labels=None, context_len=1))]
    #[allow(clippy::too_many_arguments)]
    fn train(
        &mut self,
        inputs: Vec<f64>,
        targets: Vec<f64>,
        n: usize,
        t: usize,
        epochs: usize,
        lr: f64,
        batch_size: usize,
        p_forcing: f64,
        loss: &str,
        mode: &str,
        seed: u64,
        g_lim: f64,
        labels: Option<Vec<u16>>,
        context_len: usize,
    ) -> PyResult<Vec<f64>> {
        let cfg = TrainConfig {
            epochs,
            batch_size: if batch_size == 0 { n } else { batch_size },
            lr,
            p_forcing,
            loss: parse_loss(loss)?,
            mode: parse_mode(mode)?,
            seed,
            g_lim,
            context_len,
            train_t: t,
        };
        let data = SeqData {
            n,
            t,
            d_x: self.inner.d_x,
            d_y: self.inner.d_y,
            inputs: &inputs,
            targets: &targets,
            labels: labels.as_deref(),
        };
        trainer::train(&mut self.inner, &data, &cfg).map_err(err)
    }

    /// Forecast evaluation: teacher-forced through `[0, l)`, mean fed back
    /// on `[l, t)`. Returns one metrics dict per sequence.
    fn evaluate_forecast(
        &self,
        py: Python<'_>,
        inputs: Vec<f64>,
        targets: Vec<f64>,
        n: usize,
        t: usize,
        l: usize,
    ) -> PyResult<Vec<Py<PyAny>>> {
        let data = SeqData {
            n,
            t,
            d_x: self.inner.d_x,
            d_y: self.inner.d_y,
            inputs: &inputs,
            targets: &targets,
            labels: None,
        };
        let metrics = trainer::evaluate_forecast(&self.inner, &data, l).map_err(err)?;
        metrics
            .into_iter()
            .map(|m| {
                let d = pyo3::types::PyDict::new(py);
                d.set_item("mse", m.mse)?;
                d.set_item("mae", m.mae)?;
                d.set_item("mape", m.mape)?;
                d.set_item("mape_skipped", m.mape_skipped)?;
                d.set_item("nll", m.nll)?;
                d.set_item("bpd", m.bpd)?;
                Ok(d.into_any().unbind())
            })
            .collect()
    }

    /// Classification accuracy from the final weight state.
    fn evaluate_classify(
        &self,
        inputs: Vec<f64>,
        labels: Vec<u16>,
        n: usize,
        t: usize,
    ) -> PyResult<f64> {
        let data = SeqData {
            n,
            t,
            d_x: self.inner.d_x,
            d_y: self.inner.d_y,
            inputs: &inputs,
            targets: &[],
            labels: Some(&labels),
        };
        trainer::evaluate_classify(&self.inner, &data).map_err(err)
    }
}

fn split_of(s: &str) -> PyResult<dynamics::Split> {
    match s {
        "train" => Ok(dynamics::Split::Train),
        "test" => Ok(dynamics::Split::Test),
        _ => Err(PyValueError::new_err(format!("unknown split {s:?}"))),
    }
}

/// Mass-spring-damper sequences; returns `(inputs, targets)` flattened.
#[pyfunction]
#[pyo3(signature = (n, t, seed, split="train", zero_init=false))]
fn generate_msd(
    n: usize,
    t: usize,
    seed: u64,
    split: &str,
    zero_init: bool,
) -> PyResult<(Vec<f64>, Vec<f64>)> {
    let split = split_of(split)?;
    let ds = if zero_init {
        dynamics::gen_msd_zero(n, split, t, seed)
    } else {
        dynamics::gen_msd(n, split, t, seed)
    }
    .map_err(err)?;
    Ok((ds.inputs, ds.targets))
}

/// Lotka-Volterra sequences; returns `(inputs, targets)` flattened.
#[pyfunction]
#[pyo3(signature = (n, t, seed, split="train"))]
fn generate_lv(n: usize, t: usize, seed: u64, split: &str) -> PyResult<(Vec<f64>, Vec<f64>)> {
    let ds = dynamics::gen_lv(n, split_of(split)?, t, seed).map_err(err)?;
    Ok((ds.inputs, ds.targets))
}

/// Phase-shifted sine sequences, 16 steps each.
#[pyfunction]
fn generate_sine(n: usize, seed: u64) -> PyResult<(Vec<f64>, Vec<f64>)> {
    let ds = dynamics::gen_sine(n, seed).map_err(err)?;
    Ok((ds.inputs, ds.targets))
}

/// Spiral classification sequences; returns `(inputs, labels)`.
#[pyfunction]
fn generate_spirals(n: usize, seed: u64) -> PyResult<(Vec<f64>, Vec<u16>)> {
    let ds = dynamics::gen_spirals(n, seed).map_err(err)?;
    let labels = ds.labels.unwrap();
    Ok((ds.inputs, labels))
}

#[pyfunction]
fn mse(y: Vec<f64>, yhat: Vec<f64>) -> f64 {
    evalkit::mse(&y, &yhat)
}

#[pyfunction]
fn mae(y: Vec<f64>, yhat: Vec<f64>) -> f64 {
    evalkit::mae(&y, &yhat)
}

/// Percentage error skipping near-zero truths; returns `(mape, skipped)`.
#[pyfunction]
fn mape(y: Vec<f64>, yhat: Vec<f64>) -> (f64, usize) {
    evalkit::mape(&y, &yhat)
}

/// Bits-per-dimension of a Gaussian prediction.
#[pyfunction]
fn bpd(y: Vec<f64>, mu: Vec<f64>, sigma: Vec<f64>) -> f64 {
    evalkit::bpd(&y, &mu, &sigma)
}

#[pymodule]
fn warp_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyModel>()?;
    m.add_function(wrap_pyfunction!(generate_msd, m)?)?;
    m.add_function(wrap_pyfunction!(generate_lv, m)?)?;
    m.add_function(wrap_pyfunction!(generate_sine, m)?)?;
    m.add_function(wrap_pyfunction!(generate_spirals, m)?)?;
    m.add_function(wrap_pyfunction!(mse, m)?)?;
    m.add_function(wrap_pyfunction!(mae, m)?)?;
    m.add_function(wrap_pyfunction!(mape, m)?)?;
    m.add_function(wrap_pyfunction!(bpd, m)?)?;
    Ok(())
}
