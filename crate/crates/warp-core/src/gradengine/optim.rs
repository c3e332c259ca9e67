//! Gradient clipping, the AdaBelief optimizer and the reduce-on-plateau
//! learning-rate schedule, plus a finite-difference gradient checker.

use crate::error::{Result, WarpError};

/// Rescale `g` in place to Euclidean norm `g_lim` if it exceeds it.
/// Returns the pre-clip norm.
pub fn clip_grad_norm(g: &mut [f64], g_lim: f64) -> f64 {
    let norm = g.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > g_lim && norm > 0.0 {
        let s = g_lim / norm;
        for x in g.iter_mut() {
            *x *= s;
        }
    }
    norm
}

/// AdaBelief moment estimates. `t` counts completed steps.
#[derive(Debug, Clone, PartialEq)]
pub struct OptState {
    pub m: Vec<f64>,
    pub s: Vec<f64>,
    pub t: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl OptState {
    pub fn new(n: usize) -> Self {
        OptState {
            m: vec![0.0; n],
            s: vec![0.0; n],
            t: 0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-16,
        }
    }
}

/// One AdaBelief update of `params` in place.
///
/// The second moment tracks the variance of the gradient around its running
/// mean rather than the raw second moment:
/// `s <- beta2 s + (1 - beta2)(g - m)^2 + eps`.
pub fn adabelief_step(params: &mut [f64], g: &[f64], state: &mut OptState, lr: f64) -> Result<()> {
    let n = params.len();
    if g.len() != n || state.m.len() != n {
        return Err(WarpError::DimMismatch {
            context: "adabelief_step",
            expected: n,
            got: if g.len() != n { g.len() } else { state.m.len() },
        });
    }
    state.t += 1;
    let (b1, b2, eps) = (state.beta1, state.beta2, state.eps);
    let bc1 = 1.0 - b1.powi(state.t as i32);
    let bc2 = 1.0 - b2.powi(state.t as i32);
    for i in 0..n {
        state.m[i] = b1 * state.m[i] + (1.0 - b1) * g[i];
        let diff = g[i] - state.m[i];
        state.s[i] = b2 * state.s[i] + (1.0 - b2) * diff * diff + eps;
        let m_hat = state.m[i] / bc1;
        let s_hat = state.s[i] / bc2;
        params[i] -= lr * m_hat / (s_hat.sqrt() + eps);
    }
    Ok(())
}

/// Reduce-on-plateau schedule over a running average of recent losses.
///
/// Each `update` call is one epoch. The epoch loss enters a 50-entry running
/// window; the window mean must improve on the best seen mean by a relative
/// margin of `threshold`, otherwise the epoch counts against `patience`.
/// Exhausting patience halves the learning rate and resets the counter.
#[derive(Debug, Clone, PartialEq)]
pub struct PlateauState {
    pub lr: f64,
    pub window: Vec<f64>,
    pub best: Option<f64>,
    pub bad_epochs: u32,
    pub patience: u32,
    pub threshold: f64,
    pub factor: f64,
}

impl PlateauState {
    pub fn new(lr: f64) -> Self {
        PlateauState {
            lr,
            window: Vec::new(),
            best: None,
            bad_epochs: 0,
            patience: 20,
            threshold: 1e-3,
            factor: 0.5,
        }
    }

    /// Record an epoch loss; returns true if the learning rate was reduced.
    pub fn update(&mut self, loss: f64) -> bool {
        self.window.push(loss);
        if self.window.len() > 50 {
            self.window.remove(0);
        }
        let avg = self.window.iter().sum::<f64>() / self.window.len() as f64;
        match self.best {
            None => {
                // The first epoch has nothing to improve on and counts
                // against patience.
                self.best = Some(avg);
                self.bad_epochs = 1;
            }
            Some(best) => {
                let scale = best.abs().max(1e-12);
                if (best - avg) / scale > self.threshold {
                    self.best = Some(avg);
                    self.bad_epochs = 0;
                } else {
                    self.bad_epochs += 1;
                }
            }
        }
        if self.bad_epochs >= self.patience {
            self.lr *= self.factor;
            self.bad_epochs = 0;
            return true;
        }
        false
    }
}

/// Maximum relative error between `analytic` and central finite differences
/// of `f` at `params`, with the denominator floored at 1e-8 so near-zero
/// coordinates compare by absolute error.
pub fn finite_diff_check<F: FnMut(&[f64]) -> f64>(
    mut f: F,
    params: &[f64],
    analytic: &[f64],
    eps: f64,
) -> f64 {
    assert_eq!(params.len(), analytic.len());
    let mut work = params.to_vec();
    let mut worst = 0.0f64;
    for i in 0..params.len() {
        let orig = work[i];
        work[i] = orig + eps;
        let fp = f(&work);
        work[i] = orig - eps;
        let fm = f(&work);
        work[i] = orig;
        let fd = (fp - fm) / (2.0 * eps);
        let an = analytic[i];
        let err = (fd - an).abs() / fd.abs().max(1e-8);
        worst = worst.max(err);
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clip_rescales_to_limit() {
        let mut g = vec![3.0, 4.0];
        let norm = clip_grad_norm(&mut g, 1.0);
        assert!((norm - 5.0).abs() < 1e-14);
        assert!((g[0] - 0.6).abs() < 1e-14);
        assert!((g[1] - 0.8).abs() < 1e-14);
        let post = (g[0] * g[0] + g[1] * g[1]).sqrt();
        assert!((post - 1.0).abs() < 1e-14);
    }

    #[test]
    fn clip_leaves_small_gradients_alone() {
        let mut g = vec![1e-3, -2e-3];
        clip_grad_norm(&mut g, 1.0);
        assert_eq!(g, vec![1e-3, -2e-3]);
    }

    #[test]
    fn clip_zero_gradient() {
        let mut g = vec![0.0, 0.0];
        assert_eq!(clip_grad_norm(&mut g, 1e-7), 0.0);
        assert_eq!(g, vec![0.0, 0.0]);
    }

    #[test]
    fn adabelief_descends_quadratic() {
        // f(p) = sum p_i^2; gradient 2p.
        let mut p = vec![1.0, -2.0, 0.5];
        let mut st = OptState::new(3);
        for _ in 0..500 {
            let g: Vec<f64> = p.iter().map(|x| 2.0 * x).collect();
            adabelief_step(&mut p, &g, &mut st, 0.05).unwrap();
        }
        let f: f64 = p.iter().map(|x| x * x).sum();
        assert!(f < 1e-4, "f = {f}");
    }

    #[test]
    fn adabelief_first_step_magnitude() {
        // With zero state the bias-corrected first step is
        // lr * g / (0.9 |g| + ...), about lr / 0.9 for order-one gradients.
        let mut p = vec![0.0];
        let mut st = OptState::new(1);
        adabelief_step(&mut p, &[1.0], &mut st, 0.01).unwrap();
        assert!(p[0] < 0.0);
        assert!((p[0].abs() - 0.01 / 0.9).abs() < 1e-6, "step = {}", p[0]);
    }

    #[test]
    fn adabelief_dim_mismatch() {
        let mut p = vec![0.0; 2];
        let mut st = OptState::new(2);
        assert!(adabelief_step(&mut p, &[1.0], &mut st, 0.1).is_err());
    }

    #[test]
    fn plateau_constant_loss_halves_at_patience() {
        let mut st = PlateauState::new(1.0);
        let mut reduced_at = Vec::new();
        for epoch in 1..=20 {
            if st.update(1.0) {
                reduced_at.push(epoch);
            }
        }
        assert_eq!(reduced_at, vec![20]);
        assert!((st.lr - 0.5).abs() < 1e-15);
    }

    #[test]
    fn plateau_decreasing_loss_never_reduces() {
        let mut st = PlateauState::new(1.0);
        let mut loss = 1.0;
        for _ in 0..200 {
            assert!(!st.update(loss));
            loss *= 0.99;
        }
        assert_eq!(st.lr, 1.0);
    }

    #[test]
    fn plateau_late_improvement_resets_patience() {
        let mut st = PlateauState::new(1.0);
        for _ in 0..19 {
            st.update(1.0);
        }
        // A strong improvement in epoch 20 drags the window mean down enough
        // to clear the threshold, so no reduction fires.
        assert!(!st.update(0.1));
        assert_eq!(st.lr, 1.0);
        assert_eq!(st.bad_epochs, 0);
    }

    #[test]
    fn finite_diff_agrees_on_cubic() {
        let p = vec![0.7, -1.3];
        let an = vec![3.0 * 0.7f64 * 0.7, 3.0 * 1.3f64 * 1.3];
        let err = finite_diff_check(
            |x| x[0].powi(3) + x[1].powi(3),
            &p,
            &an,
            1e-5,
        );
        assert!(err < 1e-8, "err = {err}");
    }

    #[test]
    fn finite_diff_flags_wrong_gradient() {
        let p = vec![1.0];
        let err = finite_diff_check(|x| x[0] * x[0], &p, &[1.0], 1e-5);
        assert!(err > 0.4);
    }
}
