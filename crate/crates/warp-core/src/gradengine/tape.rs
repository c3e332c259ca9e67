//! Operation tape for reverse-mode differentiation.
//!
//! A tape records a topologically ordered list of primitive vector operations.
//! Forward values are computed eagerly at record time; `backward` then walks
//! the record in reverse, accumulating vector-Jacobian products into node
//! gradients and, for `Param` nodes, into a flat gradient store aligned with
//! the model's parameter vector.

use crate::error::{Result, WarpError};
use crate::numkit::fft_causal_conv;
use crate::numkit::matrix::{dot, matvec_into, matvec_t_into, outer_acc};
use crate::rootnet::{sigmoid, softplus, Activation};

pub type NodeId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnaryKind {
    Relu,
    Swish,
    Tanh,
    Sigmoid,
    Softplus,
}

impl UnaryKind {
    pub fn from_activation(act: Activation) -> Option<UnaryKind> {
        match act {
            Activation::Relu => Some(UnaryKind::Relu),
            Activation::Swish => Some(UnaryKind::Swish),
            Activation::Identity => None,
        }
    }

    #[inline]
    fn eval(self, x: f64) -> f64 {
        match self {
            UnaryKind::Relu => x.max(0.0),
            UnaryKind::Swish => x * sigmoid(x),
            UnaryKind::Tanh => x.tanh(),
            UnaryKind::Sigmoid => sigmoid(x),
            UnaryKind::Softplus => softplus(x),
        }
    }

    #[inline]
    fn grad(self, x: f64) -> f64 {
        match self {
            UnaryKind::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            UnaryKind::Swish => {
                let s = sigmoid(x);
                s + x * s * (1.0 - s)
            }
            UnaryKind::Tanh => {
                let t = x.tanh();
                1.0 - t * t
            }
            UnaryKind::Sigmoid => {
                let s = sigmoid(x);
                s * (1.0 - s)
            }
            UnaryKind::Softplus => sigmoid(x),
        }
    }
}

/// Which learnable transition parameterization a `LinearScan` op uses.
/// Offsets index the flat parameter vector.
#[derive(Debug, Clone, Copy)]
pub enum TransitionRef {
    Dense { offset: usize, dim: usize },
    Diagonal { offset: usize, dim: usize },
    LowRank {
        p_off: usize,
        a_off: usize,
        q_off: usize,
        dim: usize,
        rank: usize,
    },
}

impl TransitionRef {
    pub fn dim(&self) -> usize {
        match *self {
            TransitionRef::Dense { dim, .. }
            | TransitionRef::Diagonal { dim, .. }
            | TransitionRef::LowRank { dim, .. } => dim,
        }
    }

    /// `out = A v`.
    pub fn apply(&self, params: &[f64], v: &[f64], out: &mut [f64]) {
        match *self {
            TransitionRef::Dense { offset, dim } => {
                matvec_into(&params[offset..offset + dim * dim], dim, dim, v, out);
            }
            TransitionRef::Diagonal { offset, dim } => {
                let d = &params[offset..offset + dim];
                for i in 0..dim {
                    out[i] = d[i] * v[i];
                }
            }
            TransitionRef::LowRank {
                p_off,
                a_off,
                q_off,
                dim,
                rank,
            } => {
                let mut u = vec![0.0; rank];
                let mut w = vec![0.0; rank];
                matvec_into(&params[q_off..q_off + rank * dim], rank, dim, v, &mut u);
                matvec_into(&params[a_off..a_off + rank * rank], rank, rank, &u, &mut w);
                matvec_into(&params[p_off..p_off + dim * rank], dim, rank, &w, out);
            }
        }
    }

    /// `out = A^T v`.
    pub fn apply_t(&self, params: &[f64], v: &[f64], out: &mut [f64]) {
        match *self {
            TransitionRef::Dense { offset, dim } => {
                matvec_t_into(&params[offset..offset + dim * dim], dim, dim, v, out);
            }
            TransitionRef::Diagonal { offset, dim } => {
                let d = &params[offset..offset + dim];
                for i in 0..dim {
                    out[i] = d[i] * v[i];
                }
            }
            TransitionRef::LowRank {
                p_off,
                a_off,
                q_off,
                dim,
                rank,
            } => {
                let mut u = vec![0.0; rank];
                let mut w = vec![0.0; rank];
                matvec_t_into(&params[p_off..p_off + dim * rank], dim, rank, v, &mut u);
                matvec_t_into(&params[a_off..a_off + rank * rank], rank, rank, &u, &mut w);
                matvec_t_into(&params[q_off..q_off + rank * dim], rank, dim, &w, out);
            }
        }
    }

    /// Accumulate `d(A theta_prev)/dA` contributions for adjoint `lambda`.
    fn acc_grad(&self, params: &[f64], grad: &mut [f64], lambda: &[f64], theta_prev: &[f64]) {
        match *self {
            TransitionRef::Dense { offset, dim } => {
                outer_acc(&mut grad[offset..offset + dim * dim], lambda, theta_prev, 1.0);
            }
            TransitionRef::Diagonal { offset, dim } => {
                for i in 0..dim {
                    grad[offset + i] += lambda[i] * theta_prev[i];
                }
            }
            TransitionRef::LowRank {
                p_off,
                a_off,
                q_off,
                dim,
                rank,
            } => {
                let mut u = vec![0.0; rank];
                let mut w = vec![0.0; rank];
                let mut pt_l = vec![0.0; rank];
                let mut at_pt_l = vec![0.0; rank];
                matvec_into(&params[q_off..q_off + rank * dim], rank, dim, theta_prev, &mut u);
                matvec_into(&params[a_off..a_off + rank * rank], rank, rank, &u, &mut w);
                matvec_t_into(&params[p_off..p_off + dim * rank], dim, rank, lambda, &mut pt_l);
                matvec_t_into(&params[a_off..a_off + rank * rank], rank, rank, &pt_l, &mut at_pt_l);
                outer_acc(&mut grad[p_off..p_off + dim * rank], lambda, &w, 1.0);
                outer_acc(&mut grad[a_off..a_off + rank * rank], &pt_l, &u, 1.0);
                outer_acc(&mut grad[q_off..q_off + rank * dim], &at_pt_l, theta_prev, 1.0);
            }
        }
    }
}

#[derive(Debug, Clone)]
pub enum Op {
    /// Constant; receives no gradient.
    Const,
    /// Grad-tracked leaf whose gradient can be read back after `backward`.
    Input,
    /// Learnable leaf; gradient accumulates into the flat store at `offset`.
    Param { offset: usize },
    MatVec { m: NodeId, v: NodeId, rows: usize, cols: usize },
    Add { a: NodeId, b: NodeId },
    Sub { a: NodeId, b: NodeId },
    Hadamard { a: NodeId, b: NodeId },
    ScaleConst { a: NodeId, c: f64 },
    Slice { src: NodeId, offset: usize },
    /// `W x + b` where `W` (row-major `rows x cols`) and `b` are read from a
    /// slice of the `theta` node.
    AffineSlice {
        theta: NodeId,
        w_off: usize,
        b_off: usize,
        rows: usize,
        cols: usize,
        x: NodeId,
    },
    Unary { src: NodeId, kind: UnaryKind },
    Clamp { src: NodeId, lo: f64, hi: f64 },
    /// `max(softplus(x), floor)` elementwise; zero gradient where floored.
    SoftplusFloor { src: NodeId, floor: f64 },
    /// `alpha * tanh((x - b)/a) + beta` with scalar nodes `a,b,alpha,beta`.
    DynTanh {
        x: NodeId,
        a: NodeId,
        b: NodeId,
        alpha: NodeId,
        beta: NodeId,
    },
    /// `sin(2 pi tau + phase)`, scalar.
    SinePhase { phase: NodeId, tau: f64 },
    /// 2x2 flow map from 4 raw values applied to a constant `x0`.
    MsdExpm { raw: NodeId, x0: [f64; 2] },
    /// `||a||^2`, scalar.
    SumSq { a: NodeId },
    Dot { a: NodeId, b: NodeId },
    /// Per-step simplified Gaussian NLL, summed over dimensions:
    /// `sum_d [(y_d - mu_d)^2 / (2 sigma_d^2) + ln sigma_d]`.
    GaussianNll { y: Vec<f64>, mu: NodeId, sigma: NodeId },
    /// `-log softmax(logits)[label]`, computed with max subtraction.
    Cce { logits: NodeId, label: usize },
    /// Whole-sequence linear recurrence in convolutional form: the output
    /// value packs `theta_{0:T}` as `T * d_theta` entries. Forward uses the
    /// FFT kernel of Theorem-1 style unrolling; backward runs the exact
    /// adjoint recurrence.
    LinearScan {
        theta0: NodeId,
        transition: TransitionRef,
        b_offset: usize,
        /// Input differences for t = 1..T-1, row-major `(T-1) x d_x`.
        dx: Vec<f64>,
        t_len: usize,
        d_theta: usize,
        d_x: usize,
    },
}

struct Node {
    op: Op,
    value: Vec<f64>,
}

/// Recorded computation. Parameter values are snapshotted at record time, so
/// a tape is self-contained once built.
pub struct Tape {
    nodes: Vec<Node>,
    param_len: usize,
    /// Parameter snapshots keyed by `LinearScan` node id; the adjoint pass
    /// re-applies the transition and so needs the values it was built with.
    scan_params: Vec<(NodeId, Vec<f64>)>,
}

impl Tape {
    pub fn new(param_len: usize) -> Self {
        Tape {
            nodes: Vec::new(),
            param_len,
            scan_params: Vec::new(),
        }
    }

    pub fn value(&self, id: NodeId) -> &[f64] {
        &self.nodes[id].value
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, op: Op, value: Vec<f64>) -> NodeId {
        self.nodes.push(Node { op, value });
        self.nodes.len() - 1
    }

    pub fn constant(&mut self, value: Vec<f64>) -> NodeId {
        self.push(Op::Const, value)
    }

    pub fn input(&mut self, value: Vec<f64>) -> NodeId {
        self.push(Op::Input, value)
    }

    /// Snapshot `params[offset..offset+len]` as a learnable leaf.
    pub fn param(&mut self, params: &[f64], offset: usize, len: usize) -> NodeId {
        self.push(Op::Param { offset }, params[offset..offset + len].to_vec())
    }

    pub fn matvec(&mut self, m: NodeId, v: NodeId, rows: usize, cols: usize) -> NodeId {
        let mut out = vec![0.0; rows];
        matvec_into(self.value(m), rows, cols, self.value(v), &mut out);
        self.push(Op::MatVec { m, v, rows, cols }, out)
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let out: Vec<f64> = self.value(a).iter().zip(self.value(b)).map(|(x, y)| x + y).collect();
        self.push(Op::Add { a, b }, out)
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let out: Vec<f64> = self.value(a).iter().zip(self.value(b)).map(|(x, y)| x - y).collect();
        self.push(Op::Sub { a, b }, out)
    }

    pub fn hadamard(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let out: Vec<f64> = self.value(a).iter().zip(self.value(b)).map(|(x, y)| x * y).collect();
        self.push(Op::Hadamard { a, b }, out)
    }

    pub fn scale(&mut self, a: NodeId, c: f64) -> NodeId {
        let out: Vec<f64> = self.value(a).iter().map(|x| c * x).collect();
        self.push(Op::ScaleConst { a, c }, out)
    }

    pub fn slice(&mut self, src: NodeId, offset: usize, len: usize) -> NodeId {
        let out = self.value(src)[offset..offset + len].to_vec();
        self.push(Op::Slice { src, offset }, out)
    }

    pub fn affine_slice(
        &mut self,
        theta: NodeId,
        w_off: usize,
        b_off: usize,
        rows: usize,
        cols: usize,
        x: NodeId,
    ) -> NodeId {
        let tv = self.value(theta);
        let xv = self.value(x);
        let w = &tv[w_off..w_off + rows * cols];
        let b = &tv[b_off..b_off + rows];
        let mut out = vec![0.0; rows];
        for i in 0..rows {
            out[i] = b[i] + dot(&w[i * cols..(i + 1) * cols], xv);
        }
        self.push(
            Op::AffineSlice {
                theta,
                w_off,
                b_off,
                rows,
                cols,
                x,
            },
            out,
        )
    }

    pub fn unary(&mut self, src: NodeId, kind: UnaryKind) -> NodeId {
        let out: Vec<f64> = self.value(src).iter().map(|&x| kind.eval(x)).collect();
        self.push(Op::Unary { src, kind }, out)
    }

    pub fn clamp(&mut self, src: NodeId, lo: f64, hi: f64) -> NodeId {
        let out: Vec<f64> = self.value(src).iter().map(|x| x.clamp(lo, hi)).collect();
        self.push(Op::Clamp { src, lo, hi }, out)
    }

    pub fn softplus_floor(&mut self, src: NodeId, floor: f64) -> NodeId {
        let out: Vec<f64> = self.value(src).iter().map(|&x| softplus(x).max(floor)).collect();
        self.push(Op::SoftplusFloor { src, floor }, out)
    }

    pub fn dyn_tanh(&mut self, x: NodeId, a: NodeId, b: NodeId, alpha: NodeId, beta: NodeId) -> NodeId {
        let (av, bv, alv, bev) = (
            self.value(a)[0],
            self.value(b)[0],
            self.value(alpha)[0],
            self.value(beta)[0],
        );
        let out: Vec<f64> = self
            .value(x)
            .iter()
            .map(|xv| alv * ((xv - bv) / av).tanh() + bev)
            .collect();
        self.push(Op::DynTanh { x, a, b, alpha, beta }, out)
    }

    pub fn sine_phase(&mut self, phase: NodeId, tau: f64) -> NodeId {
        let out = vec![(std::f64::consts::TAU * tau + self.value(phase)[0]).sin()];
        self.push(Op::SinePhase { phase, tau }, out)
    }

    pub fn msd_expm(&mut self, raw: NodeId, x0: [f64; 2]) -> NodeId {
        let r = self.value(raw);
        let out = vec![r[0] * x0[0] + r[1] * x0[1], r[2] * x0[0] + r[3] * x0[1]];
        self.push(Op::MsdExpm { raw, x0 }, out)
    }

    pub fn sum_sq(&mut self, a: NodeId) -> NodeId {
        let s: f64 = self.value(a).iter().map(|x| x * x).sum();
        self.push(Op::SumSq { a }, vec![s])
    }

    pub fn dot_prod(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let s = dot(self.value(a), self.value(b));
        self.push(Op::Dot { a, b }, vec![s])
    }

    pub fn gaussian_nll(&mut self, y: Vec<f64>, mu: NodeId, sigma: NodeId) -> NodeId {
        let mv = self.value(mu);
        let sv = self.value(sigma);
        let mut s = 0.0;
        for d in 0..y.len() {
            let r = y[d] - mv[d];
            s += r * r / (2.0 * sv[d] * sv[d]) + sv[d].ln();
        }
        self.push(Op::GaussianNll { y, mu, sigma }, vec![s])
    }

    pub fn cce(&mut self, logits: NodeId, label: usize) -> NodeId {
        let lv = self.value(logits);
        let m = lv.iter().fold(f64::NEG_INFINITY, |a, &x| a.max(x));
        let lse = m + lv.iter().map(|x| (x - m).exp()).sum::<f64>().ln();
        let loss = lse - lv[label];
        self.push(Op::Cce { logits, label }, vec![loss])
    }

    /// Record the convolutional-mode scan. `dx` carries the input differences
    /// for steps `1..T-1`; the output packs `theta_0..theta_{T-1}`.
    pub fn linear_scan(
        &mut self,
        theta0: NodeId,
        transition: TransitionRef,
        b_offset: usize,
        params: &[f64],
        dx: Vec<f64>,
        t_len: usize,
        d_x: usize,
    ) -> NodeId {
        let d_theta = transition.dim();
        debug_assert_eq!(dx.len(), (t_len - 1) * d_x);
        let value = conv_scan_forward(
            self.value(theta0),
            &transition,
            b_offset,
            params,
            &dx,
            t_len,
            d_theta,
            d_x,
        );
        // Snapshot the parameters the adjoint pass will need.
        let op = Op::LinearScan {
            theta0,
            transition,
            b_offset,
            dx,
            t_len,
            d_theta,
            d_x,
        };
        let id = self.push(op, value);
        // The adjoint needs A and B values; keep a snapshot alongside.
        self.scan_params.push((id, params.to_vec()));
        id
    }

    /// Reverse pass from a scalar seed node; accumulates parameter gradients
    /// into `grad_store` (length = parameter vector length).
    pub fn backward(&self, seed: NodeId, grad_store: &mut [f64]) -> Result<Grads> {
        if self.value(seed).len() != 1 {
            return Err(WarpError::contract("backward seed must be scalar"));
        }
        self.backward_seeded(seed, &[1.0], grad_store)
    }

    /// Reverse pass with an explicit seed gradient on any node.
    pub fn backward_seeded(&self, seed: NodeId, seed_grad: &[f64], grad_store: &mut [f64]) -> Result<Grads> {
        if grad_store.len() != self.param_len {
            return Err(WarpError::DimMismatch {
                context: "backward grad_store",
                expected: self.param_len,
                got: grad_store.len(),
            });
        }
        if seed_grad.len() != self.value(seed).len() {
            return Err(WarpError::DimMismatch {
                context: "backward seed",
                expected: self.value(seed).len(),
                got: seed_grad.len(),
            });
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        grads[seed] = Some(seed_grad.to_vec());

        for id in (0..=seed).rev() {
            let Some(g) = grads[id].take() else { continue };
            self.vjp(id, &g, &mut grads, grad_store);
            grads[id] = Some(g);
        }
        Ok(Grads { node_grads: grads })
    }

    fn vjp(&self, id: NodeId, g: &[f64], grads: &mut [Option<Vec<f64>>], store: &mut [f64]) {
        fn acc(grads: &mut [Option<Vec<f64>>], nid: NodeId, len: usize) -> &mut Vec<f64> {
            grads[nid].get_or_insert_with(|| vec![0.0; len])
        }
        match &self.nodes[id].op {
            Op::Const | Op::Input => {}
            Op::Param { offset } => {
                for (s, gi) in store[*offset..*offset + g.len()].iter_mut().zip(g) {
                    *s += gi;
                }
            }
            Op::MatVec { m, v, rows, cols } => {
                let mv = self.value(*m);
                let vv = self.value(*v);
                {
                    let gm = acc(grads, *m, rows * cols);
                    outer_acc(gm, g, vv, 1.0);
                }
                let mut gv = vec![0.0; *cols];
                matvec_t_into(mv, *rows, *cols, g, &mut gv);
                let dst = acc(grads, *v, *cols);
                for (d, s) in dst.iter_mut().zip(&gv) {
                    *d += s;
                }
            }
            Op::Add { a, b } => {
                for (d, s) in acc(grads, *a, g.len()).iter_mut().zip(g) {
                    *d += s;
                }
                for (d, s) in acc(grads, *b, g.len()).iter_mut().zip(g) {
                    *d += s;
                }
            }
            Op::Sub { a, b } => {
                for (d, s) in acc(grads, *a, g.len()).iter_mut().zip(g) {
                    *d += s;
                }
                for (d, s) in acc(grads, *b, g.len()).iter_mut().zip(g) {
                    *d -= s;
                }
            }
            Op::Hadamard { a, b } => {
                let av = self.value(*a).to_vec();
                let bv = self.value(*b).to_vec();
                for ((d, s), x) in acc(grads, *a, g.len()).iter_mut().zip(g).zip(&bv) {
                    *d += s * x;
                }
                for ((d, s), x) in acc(grads, *b, g.len()).iter_mut().zip(g).zip(&av) {
                    *d += s * x;
                }
            }
            Op::ScaleConst { a, c } => {
                for (d, s) in acc(grads, *a, g.len()).iter_mut().zip(g) {
                    *d += c * s;
                }
            }
            Op::Slice { src, offset } => {
                let src_len = self.value(*src).len();
                let dst = acc(grads, *src, src_len);
                for (d, s) in dst[*offset..*offset + g.len()].iter_mut().zip(g) {
                    *d += s;
                }
            }
            Op::AffineSlice {
                theta,
                w_off,
                b_off,
                rows,
                cols,
                x,
            } => {
                let tv = self.value(*theta);
                let xv = self.value(*x).to_vec();
                let w = tv[*w_off..*w_off + rows * cols].to_vec();
                {
                    let gt = acc(grads, *theta, tv.len());
                    outer_acc(&mut gt[*w_off..*w_off + rows * cols], g, &xv, 1.0);
                    for (d, s) in gt[*b_off..*b_off + rows].iter_mut().zip(g) {
                        *d += s;
                    }
                }
                let mut gx = vec![0.0; *cols];
                matvec_t_into(&w, *rows, *cols, g, &mut gx);
                let dst = acc(grads, *x, *cols);
                for (d, s) in dst.iter_mut().zip(&gx) {
                    *d += s;
                }
            }
            Op::Unary { src, kind } => {
                let sv = self.value(*src).to_vec();
                let kind = *kind;
                for ((d, s), x) in acc(grads, *src, g.len()).iter_mut().zip(g).zip(&sv) {
                    *d += s * kind.grad(*x);
                }
            }
            Op::Clamp { src, lo, hi } => {
                let sv = self.value(*src).to_vec();
                let (lo, hi) = (*lo, *hi);
                for ((d, s), x) in acc(grads, *src, g.len()).iter_mut().zip(g).zip(&sv) {
                    // Pass-through strictly inside; zero at and beyond bounds.
                    if *x > lo && *x < hi {
                        *d += s;
                    }
                }
            }
            Op::SoftplusFloor { src, floor } => {
                let sv = self.value(*src).to_vec();
                let floor = *floor;
                for ((d, s), x) in acc(grads, *src, g.len()).iter_mut().zip(g).zip(&sv) {
                    if softplus(*x) > floor {
                        *d += s * sigmoid(*x);
                    }
                }
            }
            Op::DynTanh { x, a, b, alpha, beta } => {
                let xv = self.value(*x).to_vec();
                let av = self.value(*a)[0];
                let bv = self.value(*b)[0];
                let alv = self.value(*alpha)[0];
                let (mut da, mut db, mut dal, mut dbe) = (0.0, 0.0, 0.0, 0.0);
                {
                    let gx = acc(grads, *x, xv.len());
                    for i in 0..xv.len() {
                        let u = (xv[i] - bv) / av;
                        let th = u.tanh();
                        let sech2 = 1.0 - th * th;
                        gx[i] += g[i] * alv * sech2 / av;
                        da += g[i] * alv * sech2 * (-u / av);
                        db += g[i] * alv * sech2 * (-1.0 / av);
                        dal += g[i] * th;
                        dbe += g[i];
                    }
                }
                acc(grads, *a, 1)[0] += da;
                acc(grads, *b, 1)[0] += db;
                acc(grads, *alpha, 1)[0] += dal;
                acc(grads, *beta, 1)[0] += dbe;
            }
            Op::SinePhase { phase, tau } => {
                let p = self.value(*phase)[0];
                acc(grads, *phase, 1)[0] += g[0] * (std::f64::consts::TAU * tau + p).cos();
            }
            Op::MsdExpm { raw, x0 } => {
                let gr = acc(grads, *raw, 4);
                gr[0] += g[0] * x0[0];
                gr[1] += g[0] * x0[1];
                gr[2] += g[1] * x0[0];
                gr[3] += g[1] * x0[1];
            }
            Op::SumSq { a } => {
                let av = self.value(*a).to_vec();
                for (d, x) in acc(grads, *a, av.len()).iter_mut().zip(&av) {
                    *d += 2.0 * g[0] * x;
                }
            }
            Op::Dot { a, b } => {
                let av = self.value(*a).to_vec();
                let bv = self.value(*b).to_vec();
                for (d, x) in acc(grads, *a, av.len()).iter_mut().zip(&bv) {
                    *d += g[0] * x;
                }
                for (d, x) in acc(grads, *b, bv.len()).iter_mut().zip(&av) {
                    *d += g[0] * x;
                }
            }
            Op::GaussianNll { y, mu, sigma } => {
                let mv = self.value(*mu).to_vec();
                let sv = self.value(*sigma).to_vec();
                {
                    let gm = acc(grads, *mu, mv.len());
                    for d in 0..y.len() {
                        gm[d] += g[0] * (mv[d] - y[d]) / (sv[d] * sv[d]);
                    }
                }
                let gs = acc(grads, *sigma, sv.len());
                for d in 0..y.len() {
                    let r = y[d] - mv[d];
                    gs[d] += g[0] * (1.0 / sv[d] - r * r / (sv[d] * sv[d] * sv[d]));
                }
            }
            Op::Cce { logits, label } => {
                let lv = self.value(*logits).to_vec();
                let m = lv.iter().fold(f64::NEG_INFINITY, |a, &x| a.max(x));
                let z: f64 = lv.iter().map(|x| (x - m).exp()).sum();
                let gl = acc(grads, *logits, lv.len());
                for (c, d) in gl.iter_mut().enumerate() {
                    let p = (lv[c] - m).exp() / z;
                    *d += g[0] * (p - if c == *label { 1.0 } else { 0.0 });
                }
            }
            Op::LinearScan {
                theta0,
                transition,
                b_offset,
                dx,
                t_len,
                d_theta,
                d_x,
            } => {
                let params = self
                    .scan_params
                    .iter()
                    .find(|(nid, _)| *nid == id)
                    .map(|(_, p)| p.as_slice())
                    .expect("scan snapshot");
                let thetas = self.value(id);
                // Adjoint recurrence: lambda_t = gbar_t + A^T lambda_{t+1}.
                let mut lambda = g[(t_len - 1) * d_theta..t_len * d_theta].to_vec();
                let mut tmp = vec![0.0; *d_theta];
                for t in (1..*t_len).rev() {
                    let theta_prev = &thetas[(t - 1) * d_theta..t * d_theta];
                    let dx_t = &dx[(t - 1) * d_x..t * d_x];
                    transition.acc_grad(params, store, &lambda, theta_prev);
                    outer_acc(&mut store[*b_offset..*b_offset + d_theta * d_x], &lambda, dx_t, 1.0);
                    transition.apply_t(params, &lambda, &mut tmp);
                    for i in 0..*d_theta {
                        lambda[i] = tmp[i] + g[(t - 1) * d_theta + i];
                    }
                }
                let g0 = acc(grads, *theta0, *d_theta);
                for (d, s) in g0.iter_mut().zip(&lambda) {
                    *d += s;
                }
            }
        }
    }
}

/// Node gradients produced by a backward pass.
pub struct Grads {
    node_grads: Vec<Option<Vec<f64>>>,
}

impl Grads {
    /// Gradient of the seed with respect to node `id` (zero vector if the
    /// node did not participate).
    pub fn get(&self, id: NodeId) -> Option<&[f64]> {
        self.node_grads[id].as_deref()
    }
}

/// FFT-based forward evaluation of the unrolled recurrence:
/// `theta_t = A^t theta_0 + sum_l K_l dx_{t-l}` with `K_l = A^l B`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn conv_scan_forward(
    theta0: &[f64],
    transition: &TransitionRef,
    b_offset: usize,
    params: &[f64],
    dx: &[f64],
    t_len: usize,
    d_theta: usize,
    d_x: usize,
) -> Vec<f64> {
    let mut out = vec![0.0; t_len * d_theta];

    // Affine part A^t theta_0 by iterated application.
    let mut pow = theta0.to_vec();
    out[..d_theta].copy_from_slice(&pow);
    let mut tmp = vec![0.0; d_theta];
    for t in 1..t_len {
        transition.apply(params, &pow, &mut tmp);
        std::mem::swap(&mut pow, &mut tmp);
        out[t * d_theta..(t + 1) * d_theta].copy_from_slice(&pow);
    }

    if t_len == 1 {
        return out;
    }

    // Kernel K_l = A^l B, layout [l][i][j].
    let b_mat = &params[b_offset..b_offset + d_theta * d_x];
    let mut kernel = vec![0.0; t_len * d_theta * d_x];
    kernel[..d_theta * d_x].copy_from_slice(b_mat);
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

    // Per-(i, j) scalar causal convolution over the time axis. The signal is
    // dx with dx_0 = 0 prepended.
    let mut signal = vec![0.0; t_len];
    let mut k_series = vec![0.0; t_len];
    for j in 0..d_x {
        for (t, s) in signal.iter_mut().enumerate().skip(1) {
            *s = dx[(t - 1) * d_x + j];
        }
        signal[0] = 0.0;
        for i in 0..d_theta {
            for (l, k) in k_series.iter_mut().enumerate() {
                *k = kernel[l * d_theta * d_x + i * d_x + j];
            }
            let conv = fft_causal_conv(&k_series, &signal);
            for (t, c) in conv.iter().enumerate() {
                out[t * d_theta + i] += c;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_gradient() {
        // f(w) = w^2 at w = 3 -> df/dw = 6.
        let params = vec![3.0];
        let mut tape = Tape::new(1);
        let w = tape.param(&params, 0, 1);
        let f = tape.sum_sq(w);
        let mut store = vec![0.0; 1];
        tape.backward(f, &mut store).unwrap();
        assert!((store[0] - 6.0).abs() < 1e-14);
    }

    #[test]
    fn saturated_clamp_gradient_is_zero() {
        let mut tape = Tape::new(0);
        let x = tape.input(vec![2.0]);
        let c = tape.clamp(x, -1.0, 1.0);
        let f = tape.sum_sq(c);
        let grads = tape.backward(f, &mut []).unwrap();
        assert!(grads.get(x).is_none_or(|g| g.iter().all(|v| *v == 0.0)));
    }

    #[test]
    fn clamp_boundary_gradient_is_zero() {
        let mut tape = Tape::new(0);
        let x = tape.input(vec![1.0, 0.5]);
        let c = tape.clamp(x, -1.0, 1.0);
        let s = tape.sum_sq(c);
        let grads = tape.backward(s, &mut []).unwrap();
        let gx = grads.get(x).unwrap();
        assert_eq!(gx[0], 0.0);
        assert!((gx[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn matvec_gradients() {
        let params = vec![1.0, 2.0, 3.0, 4.0];
        let mut tape = Tape::new(4);
        let m = tape.param(&params, 0, 4);
        let v = tape.input(vec![0.5, -1.0]);
        let y = tape.matvec(m, v, 2, 2);
        let f = tape.sum_sq(y);
        let mut store = vec![0.0; 4];
        let grads = tape.backward(f, &mut store).unwrap();
        // y = (-1.5, -2.5); f = 8.5; df/dy = (-3, -5).
        let gv = grads.get(v).unwrap();
        assert!((gv[0] - (-3.0 * 1.0 - 5.0 * 3.0)).abs() < 1e-12);
        assert!((gv[1] - (-3.0 * 2.0 - 5.0 * 4.0)).abs() < 1e-12);
        assert!((store[0] - (-3.0 * 0.5)).abs() < 1e-12);
        assert!((store[3] - (-5.0 * -1.0)).abs() < 1e-12);
    }

    #[test]
    fn cce_gradient_sums_to_zero() {
        let mut tape = Tape::new(0);
        let l = tape.input(vec![0.3, -0.7, 1.1]);
        let f = tape.cce(l, 2);
        let grads = tape.backward(f, &mut []).unwrap();
        let gl = grads.get(l).unwrap();
        assert!(gl.iter().sum::<f64>().abs() < 1e-12);
        assert!(gl[2] < 0.0);
    }

    #[test]
    fn backward_rejects_vector_seed() {
        let mut tape = Tape::new(0);
        let x = tape.input(vec![1.0, 2.0]);
        assert!(tape.backward(x, &mut []).is_err());
    }
}
