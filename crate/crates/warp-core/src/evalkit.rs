//! Forecast metrics, probabilistic metrics, and weight-trajectory
//! diagnostics: principal components of the state trajectory, per-weight
//! correlation against normalized time, and successive-difference norms.

use crate::error::{Result, WarpError};
use crate::numkit::{symmetric_eigh_topk, Matrix};

/// Mean absolute error over all entries.
pub fn mae(y: &[f64], yhat: &[f64]) -> f64 {
    assert_eq!(y.len(), yhat.len());
    if y.is_empty() {
        return 0.0;
    }
    y.iter().zip(yhat).map(|(a, b)| (a - b).abs()).sum::<f64>() / y.len() as f64
}

/// Mean squared error over all entries.
pub fn mse(y: &[f64], yhat: &[f64]) -> f64 {
    assert_eq!(y.len(), yhat.len());
    if y.is_empty() {
        return 0.0;
    }
    y.iter().zip(yhat).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / y.len() as f64
}

/// Mean absolute percent error in percentage points. Entries whose target
/// magnitude is below 1e-8 are skipped; the skipped count is returned.
pub fn mape(y: &[f64], yhat: &[f64]) -> (f64, usize) {
    assert_eq!(y.len(), yhat.len());
    let mut sum = 0.0;
    let mut used = 0usize;
    let mut skipped = 0usize;
    for (a, b) in y.iter().zip(yhat) {
        if a.abs() < 1e-8 {
            skipped += 1;
        } else {
            sum += ((a - b) / a).abs();
            used += 1;
        }
    }
    if used == 0 {
        (0.0, skipped)
    } else {
        (100.0 * sum / used as f64, skipped)
    }
}

/// Evaluation negative log-likelihood with the full Gaussian constant,
/// averaged per entry: `(1/N) sum [0.5 ln(2 pi sigma^2) + 0.5 (y - mu)^2 / sigma^2]`.
/// Distinct from the simplified training loss.
pub fn nll_eval(y: &[f64], mu: &[f64], sigma: &[f64]) -> f64 {
    assert_eq!(y.len(), mu.len());
    assert_eq!(y.len(), sigma.len());
    if y.is_empty() {
        return 0.0;
    }
    let mut s = 0.0;
    for i in 0..y.len() {
        let r = y[i] - mu[i];
        s += 0.5 * (std::f64::consts::TAU * sigma[i] * sigma[i]).ln()
            + 0.5 * r * r / (sigma[i] * sigma[i]);
    }
    s / y.len() as f64
}

/// Bits per dimension: the evaluation NLL converted from nats to bits.
pub fn bpd(y: &[f64], mu: &[f64], sigma: &[f64]) -> f64 {
    nll_eval(y, mu, sigma) * std::f64::consts::LOG2_E
}

/// Top-2 principal components of pooled weight trajectories.
#[derive(Debug, Clone)]
pub struct TrajectoryStats {
    /// Per trajectory, `T x 2` projections onto the two components.
    pub projections: Vec<Vec<f64>>,
    /// Explained-variance ratios, descending.
    pub ratios: [f64; 2],
    /// The two components, unit norm, length `d_theta`.
    pub components: [Vec<f64>; 2],
}

/// PCA of concatenated trajectories (each `t_i x d_theta`, row-major),
/// centered by the global mean. Uses the Gram matrix when there are fewer
/// time points than weights.
pub fn weight_pca(trajectories: &[&[f64]], d_theta: usize) -> Result<TrajectoryStats> {
    let mut total_t = 0usize;
    for traj in trajectories {
        if traj.len() % d_theta != 0 {
            return Err(WarpError::contract("weight_pca: trajectory length not a multiple of d_theta"));
        }
        total_t += traj.len() / d_theta;
    }
    if total_t < 2 {
        return Err(WarpError::contract("weight_pca needs at least 2 time points"));
    }

    let mut mean = vec![0.0; d_theta];
    for traj in trajectories {
        for row in traj.chunks(d_theta) {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
    }
    for m in mean.iter_mut() {
        *m /= total_t as f64;
    }

    // Centered data, row-major total_t x d_theta.
    let mut x = Vec::with_capacity(total_t * d_theta);
    for traj in trajectories {
        for row in traj.chunks(d_theta) {
            for (v, m) in row.iter().zip(&mean) {
                x.push(v - m);
            }
        }
    }
    let total_var: f64 = x.iter().map(|v| v * v).sum();

    let zero_stats = |trajs: &[&[f64]]| TrajectoryStats {
        projections: trajs.iter().map(|t| vec![0.0; 2 * (t.len() / d_theta)]).collect(),
        ratios: [0.0, 0.0],
        components: [vec![0.0; d_theta], vec![0.0; d_theta]],
    };
    if total_var < 1e-30 {
        return Ok(zero_stats(trajectories));
    }

    let mut components: Vec<Vec<f64>> = Vec::new();
    let mut values: Vec<f64> = Vec::new();
    if total_t < d_theta {
        // Gram trick: eigenvectors of X X^T lift to X^T v.
        let mut gram = Matrix::zeros(total_t, total_t);
        for i in 0..total_t {
            for j in i..total_t {
                let g: f64 = (0..d_theta)
                    .map(|k| x[i * d_theta + k] * x[j * d_theta + k])
                    .sum();
                gram.set(i, j, g);
                gram.set(j, i, g);
            }
        }
        let k = 2.min(total_t);
        let (vals, vecs) = symmetric_eigh_topk(&gram, k)?;
        for (p, lam) in vals.iter().enumerate() {
            let mut u = vec![0.0; d_theta];
            for i in 0..total_t {
                let w = vecs.get(p, i);
                for kdim in 0..d_theta {
                    u[kdim] += w * x[i * d_theta + kdim];
                }
            }
            let norm = u.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 0.0 {
                u.iter_mut().for_each(|v| *v /= norm);
            }
            components.push(u);
            values.push(lam.max(0.0));
        }
    } else {
        let mut cov = Matrix::zeros(d_theta, d_theta);
        for row in x.chunks(d_theta) {
            for i in 0..d_theta {
                for j in i..d_theta {
                    let v = cov.get(i, j) + row[i] * row[j];
                    cov.set(i, j, v);
                    cov.set(j, i, v);
                }
            }
        }
        let k = 2.min(d_theta);
        let (vals, vecs) = symmetric_eigh_topk(&cov, k)?;
        for (p, lam) in vals.iter().enumerate() {
            components.push((0..d_theta).map(|c| vecs.get(p, c)).collect());
            values.push(lam.max(0.0));
        }
    }
    while components.len() < 2 {
        components.push(vec![0.0; d_theta]);
        values.push(0.0);
    }

    let ratios = [values[0] / total_var, values[1] / total_var];
    let mut projections = Vec::with_capacity(trajectories.len());
    let mut cursor = 0usize;
    for traj in trajectories {
        let t = traj.len() / d_theta;
        let mut proj = Vec::with_capacity(2 * t);
        for row in x[cursor * d_theta..(cursor + t) * d_theta].chunks(d_theta) {
            for comp in components.iter().take(2) {
                proj.push(row.iter().zip(comp).map(|(a, b)| a * b).sum());
            }
        }
        cursor += t;
        projections.push(proj);
    }
    let comp1 = components.swap_remove(1);
    let comp0 = components.swap_remove(0);
    Ok(TrajectoryStats {
        projections,
        ratios,
        components: [comp0, comp1],
    })
}

/// Pearson correlation of each weight coordinate against normalized time,
/// pooled over all trajectories (each `t x d_theta` with the same `t`).
/// Constant coordinates report 0.
pub fn theta_tau_correlation(trajectories: &[&[f64]], d_theta: usize, t_len: usize) -> Result<Vec<f64>> {
    if t_len < 3 {
        return Err(WarpError::contract("theta_tau_correlation needs t >= 3"));
    }
    for traj in trajectories {
        if traj.len() != t_len * d_theta {
            return Err(WarpError::DimMismatch {
                context: "theta_tau_correlation",
                expected: t_len * d_theta,
                got: traj.len(),
            });
        }
    }
    let n = trajectories.len() * t_len;
    let taus: Vec<f64> = (0..t_len).map(|t| t as f64 / (t_len - 1) as f64).collect();
    let tau_mean = taus.iter().sum::<f64>() / t_len as f64;
    let tau_var: f64 = taus.iter().map(|v| (v - tau_mean) * (v - tau_mean)).sum::<f64>()
        * trajectories.len() as f64;

    let mut out = vec![0.0; d_theta];
    for i in 0..d_theta {
        let mut mean = 0.0;
        for traj in trajectories {
            for t in 0..t_len {
                mean += traj[t * d_theta + i];
            }
        }
        mean /= n as f64;
        let mut cov = 0.0;
        let mut var = 0.0;
        for traj in trajectories {
            for t in 0..t_len {
                let d = traj[t * d_theta + i] - mean;
                cov += d * (taus[t] - tau_mean);
                var += d * d;
            }
        }
        out[i] = if var <= 1e-24 { 0.0 } else { cov / (var * tau_var).sqrt() };
    }
    Ok(out)
}

/// `||theta_t - theta_{t-1}||_2` for t = 1..T-1.
pub fn successive_norms(trajectory: &[f64], d_theta: usize) -> Result<Vec<f64>> {
    if trajectory.len() % d_theta != 0 || trajectory.len() / d_theta < 2 {
        return Err(WarpError::contract("successive_norms needs a T x d_theta trajectory, T >= 2"));
    }
    let t_len = trajectory.len() / d_theta;
    let mut out = Vec::with_capacity(t_len - 1);
    for t in 1..t_len {
        let a = &trajectory[(t - 1) * d_theta..t * d_theta];
        let b = &trajectory[t * d_theta..(t + 1) * d_theta];
        out.push(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt());
    }
    Ok(out)
}

/// Render per-sequence metric rows as CSV with a trailing mean row tagged
/// "ALL". `names` labels the value columns.
pub fn metrics_csv(names: &[&str], rows: &[Vec<f64>]) -> String {
    let mut out = String::from("sequence");
    for n in names {
        out.push(',');
        out.push_str(n);
    }
    out.push('\n');
    let mut sums = vec![0.0; names.len()];
    for (i, row) in rows.iter().enumerate() {
        out.push_str(&i.to_string());
        for (j, v) in row.iter().enumerate() {
            out.push(',');
            out.push_str(&format!("{v:.9e}"));
            sums[j] += v;
        }
        out.push('\n');
    }
    if !rows.is_empty() {
        out.push_str("ALL");
        for s in &sums {
            out.push(',');
            out.push_str(&format!("{:.9e}", s / rows.len() as f64));
        }
        out.push('\n');
    }
    out
}
