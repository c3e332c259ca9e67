//! The weight-space recurrence: state initialization (hypernetwork or direct
//! learnable state), the linear update step with optional weight clipping,
//! recurrent scans in teacher-forced and autoregressive modes, and the
//! equivalent convolutional evaluation.

use crate::error::{Result, WarpError};
use crate::gradengine::{conv_scan_forward, NodeId, Tape, TransitionRef, UnaryKind};
use crate::numkit::matrix::matvec_into;
use crate::numkit::RngStream;
use crate::rootnet::{self, Activation, HeadCtx, HeadOut, RootHead, RootSpec};

/// Parameterization of the state-transition operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransitionKind {
    Dense,
    Diagonal,
    LowRank { rank: usize },
}

/// How the initial weight state is produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitMode {
    /// A learnable state vector; the first observation is ignored.
    DirectTheta0,
    /// A two-hidden-layer MLP mapping the first observation to the state.
    Hypernet,
}

/// Hidden widths of the initial network, growing toward the output.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HyperNetSpec {
    pub input_dim: usize,
    pub output_dim: usize,
    pub hidden: (usize, usize),
}

impl HyperNetSpec {
    pub fn new(input_dim: usize, output_dim: usize) -> Self {
        let (h_in, h_out) = (input_dim, output_dim);
        let w1 = (2 * h_in / 3 + h_out / 3).max(1);
        let w2 = (h_in / 3 + 2 * h_out / 3).max(1);
        // Width grows toward the output regardless of which formula is larger.
        let hidden = (w1.min(w2), w1.max(w2));
        HyperNetSpec {
            input_dim,
            output_dim,
            hidden,
        }
    }

    /// `(in, out)` dimensions of the three affine layers.
    pub fn layer_dims(&self) -> [(usize, usize); 3] {
        [
            (self.input_dim, self.hidden.0),
            (self.hidden.0, self.hidden.1),
            (self.hidden.1, self.output_dim),
        ]
    }
}

/// One named block in the flat parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamEntry {
    pub name: String,
    pub dims: Vec<usize>,
    pub offset: usize,
    pub len: usize,
}

/// Flat parameter vector with a stable named-block layout. The enumeration
/// order is fixed at construction and is the serialization contract.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamStore {
    entries: Vec<ParamEntry>,
    pub data: Vec<f64>,
}

impl ParamStore {
    pub fn new() -> Self {
        ParamStore {
            entries: Vec::new(),
            data: Vec::new(),
        }
    }

    pub fn add(&mut self, name: &str, dims: Vec<usize>, values: Vec<f64>) -> usize {
        let len: usize = dims.iter().product();
        assert_eq!(len, values.len(), "param block {name} size");
        let offset = self.data.len();
        self.data.extend_from_slice(&values);
        self.entries.push(ParamEntry {
            name: name.to_string(),
            dims,
            offset,
            len,
        });
        offset
    }

    pub fn entries(&self) -> &[ParamEntry] {
        &self.entries
    }

    pub fn find(&self, name: &str) -> Option<&ParamEntry> {
        self.entries.iter().find(|e| e.name == name)
    }

    pub fn offset_of(&self, name: &str) -> Option<usize> {
        self.find(name).map(|e| e.offset)
    }

    pub fn slice(&self, name: &str) -> Option<&[f64]> {
        self.find(name).map(|e| &self.data[e.offset..e.offset + e.len])
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
}

impl Default for ParamStore {
    fn default() -> Self {
        ParamStore::new()
    }
}

/// Scan mode: teacher-forced throughout, or autoregressive with Bernoulli
/// forcing and (for probabilistic heads) reparameterized feedback samples.
pub enum ScanMode<'a> {
    NonAr,
    Ar { p_forcing: f64, rng: &'a mut RngStream },
}

/// Scan result: all weight states, decoded means, and standard deviations
/// when the head produces them.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanOut {
    pub states: Vec<f64>,
    pub means: Vec<f64>,
    pub sigmas: Option<Vec<f64>>,
}

/// The full model: transition, input matrix, initializer, root network
/// architecture, and all learnable values in a stable flat layout.
#[derive(Debug, Clone, PartialEq)]
pub struct WarpModel {
    pub d_x: usize,
    pub d_y: usize,
    pub transition: TransitionKind,
    pub init_mode: InitMode,
    pub root: RootSpec,
    pub w_lim: Option<f64>,
    /// Decode at this constant evaluation point instead of t/(T-1).
    pub fixed_tau: Option<f64>,
    pub params: ParamStore,
    d_theta: usize,
    b_offset: usize,
}

fn glorot_layer(rng: &mut RngStream, ind: usize, outd: usize, act: Activation) -> (Vec<f64>, Vec<f64>) {
    let scale = match act {
        Activation::Relu => (2.0 / ind as f64).sqrt(),
        _ => (2.0 / (ind + outd) as f64).sqrt(),
    };
    let w: Vec<f64> = rng.randn(outd * ind).into_iter().map(|g| scale * g).collect();
    (w, vec![0.0; outd])
}

impl WarpModel {
    /// Build a model with the canonical initialization: identity transition,
    /// zero input matrix, and classically initialized root weights.
    pub fn new(
        d_x: usize,
        d_y: usize,
        root: RootSpec,
        transition: TransitionKind,
        init_mode: InitMode,
        w_lim: Option<f64>,
        rng: &mut RngStream,
    ) -> Result<WarpModel> {
        if d_x == 0 || d_y == 0 {
            return Err(WarpError::contract("model requires d_x >= 1 and d_y >= 1"));
        }
        if root.out_dim != root.head.raw_dim(d_y) {
            return Err(WarpError::DimMismatch {
                context: "root head arity",
                expected: root.head.raw_dim(d_y),
                got: root.out_dim,
            });
        }
        if let Some(w) = w_lim {
            if w <= 0.0 {
                return Err(WarpError::contract("w_lim must be positive"));
            }
        }
        let d_theta = root.param_count();
        let mut params = ParamStore::new();

        match transition {
            TransitionKind::Dense => {
                let mut a = vec![0.0; d_theta * d_theta];
                for i in 0..d_theta {
                    a[i * d_theta + i] = 1.0;
                }
                params.add("A", vec![d_theta, d_theta], a);
            }
            TransitionKind::Diagonal => {
                params.add("A_diag", vec![d_theta], vec![1.0; d_theta]);
            }
            TransitionKind::LowRank { rank } => {
                if rank == 0 || rank > d_theta {
                    return Err(WarpError::contract(format!(
                        "low-rank transition rank {rank} out of range 1..={d_theta}"
                    )));
                }
                let mut p = vec![0.0; d_theta * rank];
                let mut q = vec![0.0; rank * d_theta];
                let mut t = vec![0.0; rank * rank];
                for i in 0..rank {
                    p[i * rank + i] = 1.0;
                    q[i * d_theta + i] = 1.0;
                    t[i * rank + i] = 1.0;
                }
                params.add("A_P", vec![d_theta, rank], p);
                params.add("A_tilde", vec![rank, rank], t);
                params.add("A_Q", vec![rank, d_theta], q);
            }
        }

        let b_offset = params.add("B", vec![d_theta, d_x], vec![0.0; d_theta * d_x]);

        match init_mode {
            InitMode::DirectTheta0 => {
                let mut theta0 = Vec::with_capacity(d_theta);
                for (ind, outd) in root.layer_dims() {
                    let (w, b) = glorot_layer(rng, ind, outd, root.activation);
                    theta0.extend_from_slice(&w);
                    theta0.extend_from_slice(&b);
                }
                params.add("theta0", vec![d_theta], theta0);
            }
            InitMode::Hypernet => {
                let spec = HyperNetSpec::new(d_x, d_theta);
                for (i, (ind, outd)) in spec.layer_dims().into_iter().enumerate() {
                    let (w, b) = glorot_layer(rng, ind, outd, root.activation);
                    params.add(&format!("phi.{i}.w"), vec![outd, ind], w);
                    params.add(&format!("phi.{i}.b"), vec![outd], b);
                }
            }
        }

        if root.head == RootHead::DynamicTanh {
            params.add("head.a", vec![1], vec![1.0]);
            params.add("head.b", vec![1], vec![0.0]);
            params.add("head.alpha", vec![1], vec![1.0]);
            params.add("head.beta", vec![1], vec![0.0]);
        }

        Ok(WarpModel {
            d_x,
            d_y,
            transition,
            init_mode,
            root,
            w_lim,
            fixed_tau: None,
            params,
            d_theta,
            b_offset,
        })
    }

    pub fn d_theta(&self) -> usize {
        self.d_theta
    }

    /// Root evaluation point for step `t` of a length-`t_len` sequence.
    pub fn tau(&self, t: usize, t_len: usize) -> f64 {
        self.fixed_tau.unwrap_or_else(|| tau_of(t, t_len))
    }

    pub fn b_offset(&self) -> usize {
        self.b_offset
    }

    pub fn transition_ref(&self) -> TransitionRef {
        match self.transition {
            TransitionKind::Dense => TransitionRef::Dense {
                offset: self.params.offset_of("A").unwrap(),
                dim: self.d_theta,
            },
            TransitionKind::Diagonal => TransitionRef::Diagonal {
                offset: self.params.offset_of("A_diag").unwrap(),
                dim: self.d_theta,
            },
            TransitionKind::LowRank { rank } => TransitionRef::LowRank {
                p_off: self.params.offset_of("A_P").unwrap(),
                a_off: self.params.offset_of("A_tilde").unwrap(),
                q_off: self.params.offset_of("A_Q").unwrap(),
                dim: self.d_theta,
                rank,
            },
        }
    }

    fn dyn_tanh_scalars(&self) -> Option<[f64; 4]> {
        if self.root.head == RootHead::DynamicTanh {
            Some([
                self.params.slice("head.a").unwrap()[0],
                self.params.slice("head.b").unwrap()[0],
                self.params.slice("head.alpha").unwrap()[0],
                self.params.slice("head.beta").unwrap()[0],
            ])
        } else {
            None
        }
    }

    /// Initial weight state from the first observation.
    pub fn init_state(&self, x0: &[f64]) -> Result<Vec<f64>> {
        if x0.len() != self.d_x {
            return Err(WarpError::DimMismatch {
                context: "init_state",
                expected: self.d_x,
                got: x0.len(),
            });
        }
        match self.init_mode {
            InitMode::DirectTheta0 => Ok(self.params.slice("theta0").unwrap().to_vec()),
            InitMode::Hypernet => {
                let spec = HyperNetSpec::new(self.d_x, self.d_theta);
                let mut x = x0.to_vec();
                for (i, (ind, outd)) in spec.layer_dims().into_iter().enumerate() {
                    let w = self.params.slice(&format!("phi.{i}.w")).unwrap();
                    let b = self.params.slice(&format!("phi.{i}.b")).unwrap();
                    let mut y = vec![0.0; outd];
                    matvec_into(w, outd, ind, &x, &mut y);
                    for (yv, bv) in y.iter_mut().zip(b) {
                        *yv += bv;
                        if i < 2 {
                            *yv = self.root.activation.eval(*yv);
                        }
                    }
                    x = y;
                }
                Ok(x)
            }
        }
    }

    /// One recurrence step: `theta = A theta_prev + B dx`, then optional
    /// elementwise clipping.
    pub fn step(&self, theta_prev: &[f64], dx: &[f64], step_idx: usize) -> Result<Vec<f64>> {
        step_kernel(
            &self.transition_ref(),
            &self.params.data,
            self.b_offset,
            self.d_x,
            theta_prev,
            dx,
            self.w_lim,
            step_idx,
        )
    }

    /// Decode the weight state at normalized time `tau`. `x0` is the
    /// sequence's first observation, needed by initial-condition heads.
    pub fn decode(&self, theta: &[f64], tau: f64, x0: &[f64]) -> Result<HeadOut> {
        let ctx = HeadCtx {
            tau,
            x0: Some(x0),
            dyn_tanh: self.dyn_tanh_scalars(),
        };
        rootnet::forward(theta, &self.root, &ctx)
    }

    /// Run the recurrence over `t_len` observations. Decoding uses
    /// `tau_t = t / (train_t - 1)`.
    pub fn scan_recurrent(
        &self,
        inputs: &[f64],
        t_len: usize,
        mode: ScanMode,
        train_t: usize,
    ) -> Result<ScanOut> {
        self.check_scan_args(inputs, t_len)?;
        if matches!(mode, ScanMode::Ar { .. }) && self.d_y != self.d_x {
            return Err(WarpError::contract(
                "autoregressive feedback requires d_y == d_x",
            ));
        }
        let (d_x, d_y, d_th) = (self.d_x, self.d_y, self.d_theta);
        let x0 = &inputs[..d_x];
        let mut theta = self.init_state(x0)?;
        let mut states = Vec::with_capacity(t_len * d_th);
        let mut means = Vec::with_capacity(t_len * d_y);
        let mut sigmas: Option<Vec<f64>> = None;

        let mut out = self.decode(&theta, self.tau(0, train_t), x0)?;
        states.extend_from_slice(&theta);
        push_decoded(&mut means, &mut sigmas, &out);

        let mut mode = mode;
        let mut u_prev = x0.to_vec();
        for t in 1..t_len {
            let x_t = &inputs[t * d_x..(t + 1) * d_x];
            let token = match &mut mode {
                ScanMode::NonAr => x_t.to_vec(),
                ScanMode::Ar { p_forcing, rng } => {
                    if rng.bernoulli(*p_forcing) {
                        x_t.to_vec()
                    } else {
                        feedback_token(&out, rng)
                    }
                }
            };
            let dx: Vec<f64> = token.iter().zip(&u_prev).map(|(a, b)| a - b).collect();
            theta = self.step(&theta, &dx, t)?;
            out = self.decode(&theta, self.tau(t, train_t), x0)?;
            states.extend_from_slice(&theta);
            push_decoded(&mut means, &mut sigmas, &out);
            u_prev = token;
        }
        Ok(ScanOut {
            states,
            means,
            sigmas,
        })
    }

    /// Kernel sequence `K_l = A^l B`, layout `[l][i][j]`, length `t_len`.
    pub fn materialize_kernel(&self, t_len: usize) -> Vec<f64> {
        kernel_seq(
            &self.transition_ref(),
            &self.params.data,
            self.b_offset,
            self.d_x,
            t_len,
        )
    }

    /// Teacher-forced scan evaluated in convolutional form; matches
    /// `scan_recurrent(NonAr)` up to floating-point accumulation order.
    pub fn conv_forward(&self, inputs: &[f64], t_len: usize, train_t: usize) -> Result<ScanOut> {
        self.check_scan_args(inputs, t_len)?;
        if self.w_lim.is_some() {
            return Err(WarpError::UnsupportedMode(
                "convolutional mode cannot apply per-step weight clipping".into(),
            ));
        }
        let (d_x, d_y, d_th) = (self.d_x, self.d_y, self.d_theta);
        let x0 = &inputs[..d_x];
        let theta0 = self.init_state(x0)?;
        let mut dx = vec![0.0; (t_len - 1) * d_x];
        for t in 1..t_len {
            for j in 0..d_x {
                dx[(t - 1) * d_x + j] = inputs[t * d_x + j] - inputs[(t - 1) * d_x + j];
            }
        }
        let states = conv_scan_forward(
            &theta0,
            &self.transition_ref(),
            self.b_offset,
            &self.params.data,
            &dx,
            t_len,
            d_th,
            d_x,
        );
        for (t, chunk) in states.chunks(d_th).enumerate() {
            if chunk.iter().any(|v| !v.is_finite()) {
                return Err(WarpError::Divergence {
                    context: "conv_forward",
                    step: t,
                });
            }
        }
        let mut means = Vec::with_capacity(t_len * d_y);
        let mut sigmas: Option<Vec<f64>> = None;
        for t in 0..t_len {
            let out = self.decode(&states[t * d_th..(t + 1) * d_th], self.tau(t, train_t), x0)?;
            push_decoded(&mut means, &mut sigmas, &out);
        }
        Ok(ScanOut {
            states,
            means,
            sigmas,
        })
    }

    fn check_scan_args(&self, inputs: &[f64], t_len: usize) -> Result<()> {
        if t_len == 0 {
            return Err(WarpError::contract("scan requires t_len >= 1"));
        }
        if inputs.len() != t_len * self.d_x {
            return Err(WarpError::DimMismatch {
                context: "scan inputs",
                expected: t_len * self.d_x,
                got: inputs.len(),
            });
        }
        Ok(())
    }
}

fn tau_of(t: usize, train_t: usize) -> f64 {
    if train_t > 1 {
        t as f64 / (train_t - 1) as f64
    } else {
        0.0
    }
}

fn push_decoded(means: &mut Vec<f64>, sigmas: &mut Option<Vec<f64>>, out: &HeadOut) {
    means.extend_from_slice(&out.mean);
    if let Some(s) = &out.sigma {
        sigmas.get_or_insert_with(Vec::new).extend_from_slice(s);
    }
}

/// The token fed back into the recurrence when forcing fails: a
/// reparameterized sample for probabilistic heads, the mean otherwise.
fn feedback_token(out: &HeadOut, rng: &mut RngStream) -> Vec<f64> {
    match &out.sigma {
        Some(sigma) => {
            let eps = rng.randn(out.mean.len());
            out.mean
                .iter()
                .zip(sigma)
                .zip(&eps)
                .map(|((m, s), e)| m + s * e)
                .collect()
        }
        None => out.mean.clone(),
    }
}

/// Dimension-free single update `A theta_prev + B dx` with optional clipping
/// and divergence detection.
#[allow(clippy::too_many_arguments)]
pub fn step_kernel(
    transition: &TransitionRef,
    params: &[f64],
    b_offset: usize,
    d_x: usize,
    theta_prev: &[f64],
    dx: &[f64],
    w_lim: Option<f64>,
    step_idx: usize,
) -> Result<Vec<f64>> {
    let d_theta = transition.dim();
    if theta_prev.len() != d_theta {
        return Err(WarpError::DimMismatch {
            context: "step theta",
            expected: d_theta,
            got: theta_prev.len(),
        });
    }
    if dx.len() != d_x {
        return Err(WarpError::DimMismatch {
            context: "step dx",
            expected: d_x,
            got: dx.len(),
        });
    }
    let mut theta = vec![0.0; d_theta];
    transition.apply(params, theta_prev, &mut theta);
    let b = &params[b_offset..b_offset + d_theta * d_x];
    let mut drive = vec![0.0; d_theta];
    matvec_into(b, d_theta, d_x, dx, &mut drive);
    for (t, d) in theta.iter_mut().zip(&drive) {
        *t += d;
    }
    if let Some(w) = w_lim {
        for t in theta.iter_mut() {
            *t = t.clamp(-w, w);
        }
    }
    if theta.iter().any(|v| !v.is_finite()) {
        return Err(WarpError::Divergence {
            context: "step",
            step: step_idx,
        });
    }
    Ok(theta)
}

/// Kernel sequence `K_l = A^l B` on raw parameter storage, layout `[l][i][j]`.
pub fn kernel_seq(
    transition: &TransitionRef,
    params: &[f64],
    b_offset: usize,
    d_x: usize,
    t_len: usize,
) -> Vec<f64> {
    let d_theta = transition.dim();
    let mut kernel = vec![0.0; t_len * d_theta * d_x];
    kernel[..d_theta * d_x].copy_from_slice(&params[b_offset..b_offset + d_theta * d_x]);
    let mut col = vec![0.0; d_theta];
    let mut col_out = vec![0.0; d_theta];
    for l in 1..t_len {
        for j in 0..d_x {
            for i in 0..d_theta {
                col[i] = kernel[(l - 1) * d_theta * d_x + i * d_x + j];
            }
            transition.apply(params, &col, &mut col_out);
            for i in 0..d_theta {
                kernel[l * d_theta * d_x + i * d_x + j] = col_out[i];
            }
        }
    }
    kernel
}

/// Nodes referencing the model's learnable blocks on a tape.
pub struct ParamNodes {
    pub transition: TransNodes,
    pub b: NodeId,
    pub dyn_tanh: Option<[NodeId; 4]>,
}

pub enum TransNodes {
    Dense(NodeId),
    Diagonal(NodeId),
    LowRank { p: NodeId, a: NodeId, q: NodeId, rank: usize },
}

/// Node ids produced by a recorded scan, one per time step.
pub struct RecordedScan {
    pub thetas: Vec<NodeId>,
    pub means: Vec<NodeId>,
    pub sigmas: Option<Vec<NodeId>>,
}

impl WarpModel {
    /// Put the learnable blocks used by the recurrence on the tape.
    pub fn record_params(&self, tape: &mut Tape) -> ParamNodes {
        let data = &self.params.data;
        let transition = match self.transition {
            TransitionKind::Dense => {
                let e = self.params.find("A").unwrap();
                TransNodes::Dense(tape.param(data, e.offset, e.len))
            }
            TransitionKind::Diagonal => {
                let e = self.params.find("A_diag").unwrap();
                TransNodes::Diagonal(tape.param(data, e.offset, e.len))
            }
            TransitionKind::LowRank { rank } => {
                let p = self.params.find("A_P").unwrap();
                let a = self.params.find("A_tilde").unwrap();
                let q = self.params.find("A_Q").unwrap();
                TransNodes::LowRank {
                    p: tape.param(data, p.offset, p.len),
                    a: tape.param(data, a.offset, a.len),
                    q: tape.param(data, q.offset, q.len),
                    rank,
                }
            }
        };
        let be = self.params.find("B").unwrap();
        let b = tape.param(data, be.offset, be.len);
        let dyn_tanh = if self.root.head == RootHead::DynamicTanh {
            let ids = ["head.a", "head.b", "head.alpha", "head.beta"].map(|n| {
                let e = self.params.find(n).unwrap();
                tape.param(data, e.offset, e.len)
            });
            Some(ids)
        } else {
            None
        };
        ParamNodes {
            transition,
            b,
            dyn_tanh,
        }
    }

    /// Record the initial state as a tape node.
    pub fn record_init_state(&self, tape: &mut Tape, x0: &[f64]) -> Result<NodeId> {
        if x0.len() != self.d_x {
            return Err(WarpError::DimMismatch {
                context: "record_init_state",
                expected: self.d_x,
                got: x0.len(),
            });
        }
        match self.init_mode {
            InitMode::DirectTheta0 => {
                let e = self.params.find("theta0").unwrap();
                Ok(tape.param(&self.params.data, e.offset, e.len))
            }
            InitMode::Hypernet => {
                let spec = HyperNetSpec::new(self.d_x, self.d_theta);
                let mut x = tape.constant(x0.to_vec());
                for (i, (ind, outd)) in spec.layer_dims().into_iter().enumerate() {
                    let we = self.params.find(&format!("phi.{i}.w")).unwrap();
                    let be = self.params.find(&format!("phi.{i}.b")).unwrap();
                    let w = tape.param(&self.params.data, we.offset, we.len);
                    let b = tape.param(&self.params.data, be.offset, be.len);
                    let pre = tape.matvec(w, x, outd, ind);
                    x = tape.add(pre, b);
                    if i < 2 {
                        if let Some(kind) = UnaryKind::from_activation(self.root.activation) {
                            x = tape.unary(x, kind);
                        }
                    }
                }
                Ok(x)
            }
        }
    }

    fn record_transition_apply(&self, tape: &mut Tape, nodes: &ParamNodes, theta: NodeId) -> NodeId {
        let d = self.d_theta;
        match nodes.transition {
            TransNodes::Dense(a) => tape.matvec(a, theta, d, d),
            TransNodes::Diagonal(a) => tape.hadamard(a, theta),
            TransNodes::LowRank { p, a, q, rank } => {
                let u = tape.matvec(q, theta, rank, d);
                let w = tape.matvec(a, u, rank, rank);
                tape.matvec(p, w, d, rank)
            }
        }
    }

    /// Record one recurrence step.
    pub fn record_step(
        &self,
        tape: &mut Tape,
        nodes: &ParamNodes,
        theta_prev: NodeId,
        dx: NodeId,
        step_idx: usize,
    ) -> Result<NodeId> {
        let applied = self.record_transition_apply(tape, nodes, theta_prev);
        let drive = tape.matvec(nodes.b, dx, self.d_theta, self.d_x);
        let mut theta = tape.add(applied, drive);
        if let Some(w) = self.w_lim {
            theta = tape.clamp(theta, -w, w);
        }
        if tape.value(theta).iter().any(|v| !v.is_finite()) {
            return Err(WarpError::Divergence {
                context: "record_step",
                step: step_idx,
            });
        }
        Ok(theta)
    }

    /// Record the root-network decode of a weight-state node.
    pub fn record_decode(
        &self,
        tape: &mut Tape,
        nodes: &ParamNodes,
        theta: NodeId,
        tau: f64,
        x0: &[f64],
    ) -> Result<(NodeId, Option<NodeId>)> {
        let dims = self.root.layer_dims();
        let offsets = self.root.layer_offsets();
        let last = dims.len() - 1;
        let mut x = tape.constant(vec![tau]);
        for (layer, (&(ind, outd), &(w_off, b_off, _))) in dims.iter().zip(&offsets).enumerate() {
            x = tape.affine_slice(theta, w_off, b_off, outd, ind, x);
            if tape.value(x).iter().any(|v| !v.is_finite()) {
                return Err(WarpError::RootOverflow { layer });
            }
            if layer < last {
                if let Some(kind) = UnaryKind::from_activation(self.root.activation) {
                    x = tape.unary(x, kind);
                }
            }
        }
        match &self.root.head {
            RootHead::Raw => Ok((x, None)),
            RootHead::MinMaxClip { d_lim } => Ok((tape.clamp(x, -d_lim, *d_lim), None)),
            RootHead::DynamicTanh => {
                let [a, b, al, be] = nodes
                    .dyn_tanh
                    .ok_or_else(|| WarpError::contract("dynamic-tanh head nodes missing"))?;
                Ok((tape.dyn_tanh(x, a, b, al, be), None))
            }
            RootHead::Gaussian { sigma_min } => {
                let mean = tape.slice(x, 0, self.d_y);
                let raw_sigma = tape.slice(x, self.d_y, self.d_y);
                let sigma = tape.softplus_floor(raw_sigma, *sigma_min);
                Ok((mean, Some(sigma)))
            }
            RootHead::SinePhase => Ok((tape.sine_phase(x, tau), None)),
            RootHead::MsdExpm => {
                if x0.len() != 2 {
                    return Err(WarpError::contract("msd-expm head needs a 2-dimensional x0"));
                }
                Ok((tape.msd_expm(x, [x0[0], x0[1]]), None))
            }
        }
    }

    /// Record a full recurrent scan for differentiation. Random draws in the
    /// autoregressive mode enter the tape as constants.
    pub fn record_scan(
        &self,
        tape: &mut Tape,
        inputs: &[f64],
        t_len: usize,
        mode: ScanMode,
        train_t: usize,
    ) -> Result<RecordedScan> {
        self.check_scan_args(inputs, t_len)?;
        if matches!(mode, ScanMode::Ar { .. }) && self.d_y != self.d_x {
            return Err(WarpError::contract(
                "autoregressive feedback requires d_y == d_x",
            ));
        }
        let d_x = self.d_x;
        let x0 = &inputs[..d_x];
        let nodes = self.record_params(tape);
        let mut theta = self.record_init_state(tape, x0)?;
        let mut thetas = vec![theta];
        let (m0, s0) = self.record_decode(tape, &nodes, theta, self.tau(0, train_t), x0)?;
        let mut means = vec![m0];
        let mut sigmas = s0.map(|s| vec![s]);

        let mut mode = mode;
        let mut u_prev = tape.constant(x0.to_vec());
        for t in 1..t_len {
            let x_t = &inputs[t * d_x..(t + 1) * d_x];
            let token = match &mut mode {
                ScanMode::NonAr => tape.constant(x_t.to_vec()),
                ScanMode::Ar { p_forcing, rng } => {
                    if rng.bernoulli(*p_forcing) {
                        tape.constant(x_t.to_vec())
                    } else {
                        let mean = means[t - 1];
                        match sigmas.as_ref().map(|s| s[t - 1]) {
                            Some(sigma) => {
                                let eps = tape.constant(rng.randn(self.d_y));
                                let noise = tape.hadamard(sigma, eps);
                                tape.add(mean, noise)
                            }
                            None => mean,
                        }
                    }
                }
            };
            let dx = tape.sub(token, u_prev);
            theta = self.record_step(tape, &nodes, theta, dx, t)?;
            thetas.push(theta);
            let (m, s) = self.record_decode(tape, &nodes, theta, self.tau(t, train_t), x0)?;
            means.push(m);
            if let (Some(list), Some(s)) = (sigmas.as_mut(), s) {
                list.push(s);
            }
            u_prev = token;
        }
        Ok(RecordedScan {
            thetas,
            means,
            sigmas,
        })
    }

    /// Record the convolutional-mode scan for differentiation. Teacher-forced
    /// only, and incompatible with weight clipping.
    pub fn record_conv(
        &self,
        tape: &mut Tape,
        inputs: &[f64],
        t_len: usize,
        train_t: usize,
    ) -> Result<RecordedScan> {
        self.check_scan_args(inputs, t_len)?;
        if self.w_lim.is_some() {
            return Err(WarpError::UnsupportedMode(
                "convolutional mode cannot apply per-step weight clipping".into(),
            ));
        }
        let d_x = self.d_x;
        let x0 = &inputs[..d_x];
        let nodes = self.record_params(tape);
        let theta0 = self.record_init_state(tape, x0)?;
        let mut dx = vec![0.0; (t_len - 1) * d_x];
        for t in 1..t_len {
            for j in 0..d_x {
                dx[(t - 1) * d_x + j] = inputs[t * d_x + j] - inputs[(t - 1) * d_x + j];
            }
        }
        let scan = tape.linear_scan(
            theta0,
            self.transition_ref(),
            self.b_offset,
            &self.params.data,
            dx,
            t_len,
            d_x,
        );
        if tape.value(scan).iter().any(|v| !v.is_finite()) {
            return Err(WarpError::Divergence {
                context: "record_conv",
                step: 0,
            });
        }
        let d_th = self.d_theta;
        let mut thetas = Vec::with_capacity(t_len);
        let mut means = Vec::with_capacity(t_len);
        let mut sigmas: Option<Vec<NodeId>> = None;
        for t in 0..t_len {
            let theta = tape.slice(scan, t * d_th, d_th);
            thetas.push(theta);
            let (m, s) = self.record_decode(tape, &nodes, theta, self.tau(t, train_t), x0)?;
            means.push(m);
            if let Some(s) = s {
                sigmas.get_or_insert_with(Vec::new).push(s);
            }
        }
        Ok(RecordedScan {
            thetas,
            means,
            sigmas,
        })
    }
}
