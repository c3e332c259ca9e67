//! The self-decoding root network: a small MLP whose flattened weights are the
//! recurrent hidden state. It maps the normalized time `tau` to the output
//! head (point prediction, Gaussian mean/std, logits, or a physics head).

use crate::error::{Result, WarpError};
use crate::numkit::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Swish,
    /// Test fixture only: keeps the network exactly linear.
    Identity,
}

impl Activation {
    #[inline]
    pub fn eval(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Swish => x * sigmoid(x),
            Activation::Identity => x,
        }
    }

    #[inline]
    pub fn grad(self, x: f64) -> f64 {
        match self {
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Swish => {
                let s = sigmoid(x);
                s + x * s * (1.0 - s)
            }
            Activation::Identity => 1.0,
        }
    }
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[inline]
pub fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else if x < -30.0 {
        x.exp()
    } else {
        x.exp().ln_1p()
    }
}

/// Output head of the root network.
#[derive(Debug, Clone, PartialEq)]
pub enum RootHead {
    /// Raw network output as the prediction.
    Raw,
    /// Symmetric min-max clipping of the prediction to `[-d_lim, d_lim]`.
    MinMaxClip { d_lim: f64 },
    /// `alpha * tanh((x - b)/a) + beta` with learnable scalars owned by the
    /// enclosing model and passed in at call time.
    DynamicTanh,
    /// Mean plus positivity-enforced standard deviation; raw arity `2 * D_y`.
    Gaussian { sigma_min: f64 },
    /// The root predicts a phase; the prediction is `sin(2*pi*tau + phase)`.
    SinePhase,
    /// The root predicts the four entries of a 2x2 flow-map matrix `E(tau)`
    /// applied to the known initial condition `x0`.
    MsdExpm,
}

impl RootHead {
    /// Raw output arity required from the root MLP for a `d_y`-dimensional
    /// prediction.
    pub fn raw_dim(&self, d_y: usize) -> usize {
        match self {
            RootHead::Gaussian { .. } => 2 * d_y,
            RootHead::SinePhase => 1,
            RootHead::MsdExpm => 4,
            _ => d_y,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            RootHead::MinMaxClip { d_lim } if *d_lim <= 0.0 => {
                Err(WarpError::contract("minmax-clip requires d_lim > 0"))
            }
            RootHead::Gaussian { sigma_min } if *sigma_min <= 0.0 => {
                Err(WarpError::contract("gaussian head requires sigma_min > 0"))
            }
            _ => Ok(()),
        }
    }
}

/// Architecture of the root MLP. `depth` counts hidden layers; the input is
/// always the scalar `tau`.
#[derive(Debug, Clone, PartialEq)]
pub struct RootSpec {
    pub width: usize,
    pub depth: usize,
    pub out_dim: usize,
    pub activation: Activation,
    pub head: RootHead,
}

impl RootSpec {
    pub fn new(width: usize, depth: usize, d_y: usize, activation: Activation, head: RootHead) -> Result<Self> {
        head.validate()?;
        let spec = RootSpec {
            width,
            depth,
            out_dim: head.raw_dim(d_y),
            activation,
            head,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.width < 1 || self.depth < 1 {
            return Err(WarpError::contract("root spec requires width >= 1 and depth >= 1"));
        }
        if self.out_dim == 0 {
            return Err(WarpError::contract("root spec requires out_dim >= 1"));
        }
        Ok(())
    }

    /// Exact count of learnable scalars (weights and biases, head scalars
    /// excluded).
    pub fn param_count(&self) -> usize {
        let w = self.width;
        (1 + 1) * w + (self.depth - 1) * (w + 1) * w + (w + 1) * self.out_dim
    }

    /// `(in_dim, out_dim)` of each affine layer, input to output.
    pub fn layer_dims(&self) -> Vec<(usize, usize)> {
        let mut dims = vec![(1, self.width)];
        for _ in 1..self.depth {
            dims.push((self.width, self.width));
        }
        dims.push((self.width, self.out_dim));
        dims
    }

    /// Byte offsets of each layer's (weights, bias) block in the flat state.
    /// Flattening is layer-major: row-major weight matrix, then bias.
    pub fn layer_offsets(&self) -> Vec<(usize, usize, usize)> {
        // (weight_offset, bias_offset, end)
        let mut offsets = Vec::new();
        let mut cursor = 0;
        for (ind, outd) in self.layer_dims() {
            let w_off = cursor;
            let b_off = cursor + ind * outd;
            cursor = b_off + outd;
            offsets.push((w_off, b_off, cursor));
        }
        offsets
    }
}

/// One affine layer in unflattened form.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub weight: Matrix,
    pub bias: Vec<f64>,
}

/// Flatten layers into a weight state, layer-major, row-major weights then
/// bias per layer.
pub fn flatten(layers: &[Layer]) -> Vec<f64> {
    let mut out = Vec::new();
    for layer in layers {
        out.extend_from_slice(layer.weight.data());
        out.extend_from_slice(&layer.bias);
    }
    out
}

/// Inverse of [`flatten`] for the given spec.
pub fn unflatten(theta: &[f64], spec: &RootSpec) -> Result<Vec<Layer>> {
    if theta.len() != spec.param_count() {
        return Err(WarpError::DimMismatch {
            context: "unflatten",
            expected: spec.param_count(),
            got: theta.len(),
        });
    }
    let mut layers = Vec::new();
    for ((ind, outd), (w_off, b_off, end)) in spec.layer_dims().into_iter().zip(spec.layer_offsets()) {
        layers.push(Layer {
            weight: Matrix::from_vec(outd, ind, theta[w_off..b_off].to_vec())?,
            bias: theta[b_off..end].to_vec(),
        });
    }
    Ok(layers)
}

/// Head output: a mean prediction plus an optional standard deviation.
#[derive(Debug, Clone, PartialEq)]
pub struct HeadOut {
    pub mean: Vec<f64>,
    pub sigma: Option<Vec<f64>>,
}

/// Context the head may need beyond the raw network output.
#[derive(Debug, Clone, Copy)]
pub struct HeadCtx<'a> {
    pub tau: f64,
    /// Known initial condition, required by the msd-expm head.
    pub x0: Option<&'a [f64]>,
    /// Dynamic-tanh scalars `(a, b, alpha, beta)`, required by that head.
    pub dyn_tanh: Option<[f64; 4]>,
}

impl Default for HeadCtx<'_> {
    fn default() -> Self {
        HeadCtx {
            tau: 0.0,
            x0: None,
            dyn_tanh: None,
        }
    }
}

pub fn apply_head(head: &RootHead, raw: &[f64], ctx: &HeadCtx) -> Result<HeadOut> {
    match head {
        RootHead::Raw => Ok(HeadOut {
            mean: raw.to_vec(),
            sigma: None,
        }),
        RootHead::MinMaxClip { d_lim } => Ok(HeadOut {
            mean: raw.iter().map(|x| x.clamp(-d_lim, *d_lim)).collect(),
            sigma: None,
        }),
        RootHead::DynamicTanh => {
            let [a, b, alpha, beta] = ctx
                .dyn_tanh
                .ok_or_else(|| WarpError::contract("dynamic-tanh head needs its scalars"))?;
            Ok(HeadOut {
                mean: raw.iter().map(|x| alpha * ((x - b) / a).tanh() + beta).collect(),
                sigma: None,
            })
        }
        RootHead::Gaussian { sigma_min } => {
            if raw.len() % 2 != 0 {
                return Err(WarpError::contract("gaussian head needs raw arity 2*D_y"));
            }
            let d = raw.len() / 2;
            Ok(HeadOut {
                mean: raw[..d].to_vec(),
                sigma: Some(raw[d..].iter().map(|s| softplus(*s).max(*sigma_min)).collect()),
            })
        }
        RootHead::SinePhase => {
            if raw.len() != 1 {
                return Err(WarpError::contract("sine-phase head needs raw arity 1"));
            }
            Ok(HeadOut {
                mean: vec![(std::f64::consts::TAU * ctx.tau + raw[0]).sin()],
                sigma: None,
            })
        }
        RootHead::MsdExpm => {
            if raw.len() != 4 {
                return Err(WarpError::contract("msd-expm head needs raw arity 4"));
            }
            let x0 = ctx
                .x0
                .ok_or_else(|| WarpError::contract("msd-expm head needs the initial condition"))?;
            if x0.len() != 2 {
                return Err(WarpError::contract("msd-expm head needs a 2-dimensional x0"));
            }
            Ok(HeadOut {
                mean: vec![
                    raw[0] * x0[0] + raw[1] * x0[1],
                    raw[2] * x0[0] + raw[3] * x0[1],
                ],
                sigma: None,
            })
        }
    }
}

/// Raw MLP evaluation of the weight state at `tau`, before the head.
pub fn forward_raw(theta: &[f64], spec: &RootSpec, tau: f64) -> Result<Vec<f64>> {
    if theta.len() != spec.param_count() {
        return Err(WarpError::DimMismatch {
            context: "forward_raw",
            expected: spec.param_count(),
            got: theta.len(),
        });
    }
    let dims = spec.layer_dims();
    let offsets = spec.layer_offsets();
    let last = dims.len() - 1;
    let mut x = vec![tau];
    for (layer, (&(ind, outd), &(w_off, b_off, end))) in dims.iter().zip(&offsets).enumerate() {
        let w = &theta[w_off..b_off];
        let b = &theta[b_off..end];
        let mut y = vec![0.0; outd];
        for i in 0..outd {
            let mut s = b[i];
            let row = &w[i * ind..(i + 1) * ind];
            for (rw, xv) in row.iter().zip(&x) {
                s += rw * xv;
            }
            y[i] = if layer == last { s } else { spec.activation.eval(s) };
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(WarpError::RootOverflow { layer });
        }
        x = y;
    }
    Ok(x)
}

/// Full decode: MLP evaluation followed by the head.
pub fn forward(theta: &[f64], spec: &RootSpec, ctx: &HeadCtx) -> Result<HeadOut> {
    let raw = forward_raw(theta, spec, ctx.tau)?;
    apply_head(&spec.head, &raw, ctx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkit::RngStream;

    #[test]
    fn param_count_msd_paper_config() {
        // Width-48 depth-3 root with 2 outputs.
        let spec = RootSpec::new(48, 3, 2, Activation::Swish, RootHead::Raw).unwrap();
        assert_eq!(spec.param_count(), 4898);
    }

    #[test]
    fn param_count_minimal() {
        let spec = RootSpec::new(1, 1, 1, Activation::Relu, RootHead::Raw).unwrap();
        assert_eq!(spec.param_count(), 4);
    }

    #[test]
    fn zero_output_dim_rejected() {
        assert!(RootSpec::new(4, 1, 0, Activation::Relu, RootHead::Raw).is_err());
    }

    #[test]
    fn flatten_roundtrip() {
        let spec = RootSpec::new(4, 2, 3, Activation::Swish, RootHead::Raw).unwrap();
        let mut rng = RngStream::new(1, 0);
        let theta = rng.randn(spec.param_count());
        let layers = unflatten(&theta, &spec).unwrap();
        assert_eq!(flatten(&layers), theta);
    }

    #[test]
    fn zero_state_gives_zero_layers() {
        let spec = RootSpec::new(3, 1, 2, Activation::Relu, RootHead::Raw).unwrap();
        let layers = unflatten(&vec![0.0; spec.param_count()], &spec).unwrap();
        for l in &layers {
            assert!(l.weight.data().iter().all(|&x| x == 0.0));
            assert!(l.bias.iter().all(|&x| x == 0.0));
        }
    }

    #[test]
    fn permuted_flattening_order_is_detected() {
        // Adversarial fixture: bias-before-weights flattening must not
        // roundtrip through the documented layer-major order.
        let spec = RootSpec::new(2, 1, 1, Activation::Identity, RootHead::Raw).unwrap();
        let mut rng = RngStream::new(9, 0);
        let layers = unflatten(&rng.randn(spec.param_count()), &spec).unwrap();
        let mut permuted = Vec::new();
        for l in &layers {
            permuted.extend_from_slice(&l.bias);
            permuted.extend_from_slice(l.weight.data());
        }
        let reparsed = unflatten(&permuted, &spec).unwrap();
        assert_ne!(flatten(&reparsed), flatten(&layers));
        assert_eq!(flatten(&reparsed), permuted);
    }

    #[test]
    fn zero_network_outputs_zero() {
        let spec = RootSpec::new(5, 2, 2, Activation::Relu, RootHead::Raw).unwrap();
        let theta = vec![0.0; spec.param_count()];
        for tau in [0.0, 0.3, 1.0, 2.5] {
            let out = forward_raw(&theta, &spec, tau).unwrap();
            assert_eq!(out, vec![0.0, 0.0]);
        }
    }

    #[test]
    fn single_linear_layer_hand_eval() {
        // One "hidden" layer of width 1 with identity activation, then a
        // pass-through output layer: f(tau) = 1*(2*tau + 1) + 0.
        let spec = RootSpec::new(1, 1, 1, Activation::Identity, RootHead::Raw).unwrap();
        let theta = vec![2.0, 1.0, 1.0, 0.0];
        let out = forward_raw(&theta, &spec, 0.5).unwrap();
        assert!((out[0] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn dead_relu_outputs_final_bias() {
        let spec = RootSpec::new(3, 2, 1, Activation::Relu, RootHead::Raw).unwrap();
        let mut theta = vec![0.0; spec.param_count()];
        let offsets = spec.layer_offsets();
        // First layer: strongly negative pre-activations for any tau >= 0.
        let (w0, b0, _) = offsets[0];
        for k in 0..3 {
            theta[w0 + k] = -1.0;
            theta[b0 + k] = -5.0;
        }
        // Final bias.
        let (_, b_last, _) = offsets[2];
        theta[b_last] = 0.75;
        let out = forward_raw(&theta, &spec, 0.7).unwrap();
        assert_eq!(out[0], 0.75);
    }

    #[test]
    fn forward_linear_in_tau_without_activation() {
        let spec = RootSpec::new(6, 3, 2, Activation::Identity, RootHead::Raw).unwrap();
        let mut rng = RngStream::new(4, 0);
        let theta = rng.randn(spec.param_count());
        let f = |tau: f64| forward_raw(&theta, &spec, tau).unwrap();
        let slope0: Vec<f64> = f(0.1).iter().zip(f(0.0)).map(|(a, b)| (a - b) / 0.1).collect();
        for tau in [0.25, 0.5, 0.9] {
            let slope: Vec<f64> = f(tau + 0.1)
                .iter()
                .zip(f(tau))
                .map(|(a, b)| (a - b) / 0.1)
                .collect();
            for (s, s0) in slope.iter().zip(&slope0) {
                assert!((s - s0).abs() < 1e-9, "slope varies: {s} vs {s0}");
            }
        }
    }

    #[test]
    fn gaussian_head_softplus_values() {
        let head = RootHead::Gaussian { sigma_min: 1e-4 };
        let out = apply_head(&head, &[0.5, 0.0], &HeadCtx::default()).unwrap();
        let sigma = out.sigma.unwrap();
        assert!((sigma[0] - 2.0f64.ln()).abs() < 1e-12);
        let out = apply_head(&head, &[0.5, -20.0], &HeadCtx::default()).unwrap();
        assert_eq!(out.sigma.unwrap()[0], 1e-4);
    }

    #[test]
    fn gaussian_sigma_floor_holds() {
        let head = RootHead::Gaussian { sigma_min: 1e-4 };
        let mut rng = RngStream::new(21, 0);
        for _ in 0..1000 {
            let raw = [0.0, 10.0 * rng.normal()];
            let out = apply_head(&head, &raw, &HeadCtx::default()).unwrap();
            assert!(out.sigma.unwrap()[0] >= 1e-4);
        }
    }

    #[test]
    fn minmax_clip_bounds() {
        let head = RootHead::MinMaxClip { d_lim: 0.9 };
        for x in [-1e300, -2.0, 0.3, 5.0, 1e300] {
            let out = apply_head(&head, &[x], &HeadCtx::default()).unwrap();
            assert!(out.mean[0].abs() <= 0.9);
        }
    }

    #[test]
    fn dynamic_tanh_origin() {
        let ctx = HeadCtx {
            dyn_tanh: Some([1.0, 0.0, 1.0, 0.0]),
            ..HeadCtx::default()
        };
        let out = apply_head(&RootHead::DynamicTanh, &[0.0], &ctx).unwrap();
        assert_eq!(out.mean[0], 0.0);
    }

    #[test]
    fn sine_phase_quarter_period() {
        let ctx = HeadCtx {
            tau: 0.25,
            ..HeadCtx::default()
        };
        let out = apply_head(&RootHead::SinePhase, &[0.0], &ctx).unwrap();
        assert!((out.mean[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn msd_expm_identity_returns_x0() {
        let x0 = [0.4, -1.3];
        for tau in [0.0, 0.5, 1.0] {
            let ctx = HeadCtx {
                tau,
                x0: Some(&x0),
                ..HeadCtx::default()
            };
            let out = apply_head(&RootHead::MsdExpm, &[1.0, 0.0, 0.0, 1.0], &ctx).unwrap();
            assert_eq!(out.mean, vec![0.4, -1.3]);
        }
    }

    #[test]
    fn head_arity_mismatch_rejected() {
        assert!(apply_head(&RootHead::SinePhase, &[0.0, 1.0], &HeadCtx::default()).is_err());
        assert!(apply_head(&RootHead::MsdExpm, &[1.0; 3], &HeadCtx::default()).is_err());
    }

    #[test]
    fn overflow_names_the_layer() {
        let spec = RootSpec::new(2, 2, 1, Activation::Identity, RootHead::Raw).unwrap();
        let mut theta = vec![1e308; spec.param_count()];
        theta[0] = 1e308;
        match forward_raw(&theta, &spec, 1.0) {
            Err(WarpError::RootOverflow { layer }) => assert!(layer <= 2),
            other => panic!("expected overflow, got {other:?}"),
        }
    }
}
