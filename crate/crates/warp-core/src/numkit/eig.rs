use crate::error::{Result, WarpError};
use crate::numkit::Matrix;

/// Top-k eigenpairs of a symmetric matrix via cyclic Jacobi sweeps.
///
/// Returns eigenvalues in descending order and the matching eigenvectors as
/// rows of the returned matrix. Intended for diagnostics-sized problems
/// (dimension up to a few thousand), not a performance path.
pub fn symmetric_eigh_topk(m: &Matrix, k: usize) -> Result<(Vec<f64>, Matrix)> {
    let n = m.rows();
    if m.cols() != n {
        return Err(WarpError::contract("symmetric_eigh_topk: matrix not square"));
    }
    if k > n {
        return Err(WarpError::contract(format!(
            "symmetric_eigh_topk: k = {k} exceeds dimension {n}"
        )));
    }
    let scale = m.max_abs().max(1.0);
    for i in 0..n {
        for j in (i + 1)..n {
            if (m.get(i, j) - m.get(j, i)).abs() > 1e-10 * scale {
                return Err(WarpError::contract(format!(
                    "symmetric_eigh_topk: entry ({i},{j}) asymmetric"
                )));
            }
        }
    }

    let mut a: Vec<f64> = m.data().to_vec();
    // v holds the accumulated rotations; row j ends up as eigenvector j.
    let mut v = Matrix::identity(n);
    let idx = |i: usize, j: usize| i * n + j;

    for _sweep in 0..100 {
        let mut off = 0.0f64;
        for i in 0..n {
            for j in (i + 1)..n {
                off = off.max(a[idx(i, j)].abs());
            }
        }
        if off <= 1e-14 * scale {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[idx(p, q)];
                if apq.abs() <= 1e-300 {
                    continue;
                }
                let (app, aqq) = (a[idx(p, p)], a[idx(q, q)]);
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for r in 0..n {
                    let arp = a[idx(r, p)];
                    let arq = a[idx(r, q)];
                    a[idx(r, p)] = c * arp - s * arq;
                    a[idx(r, q)] = s * arp + c * arq;
                }
                for r in 0..n {
                    let apr = a[idx(p, r)];
                    let aqr = a[idx(q, r)];
                    a[idx(p, r)] = c * apr - s * aqr;
                    a[idx(q, r)] = s * apr + c * aqr;
                }
                for r in 0..n {
                    let vpr = v.get(p, r);
                    let vqr = v.get(q, r);
                    v.set(p, r, c * vpr - s * vqr);
                    v.set(q, r, s * vpr + c * vqr);
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[idx(j, j)].partial_cmp(&a[idx(i, i)]).unwrap());

    let mut values = Vec::with_capacity(k);
    let mut vectors = Matrix::zeros(k, n);
    for (row, &src) in order.iter().take(k).enumerate() {
        values.push(a[idx(src, src)]);
        for col in 0..n {
            vectors.set(row, col, v.get(src, col));
        }
    }
    Ok((values, vectors))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkit::RngStream;

    fn residual(m: &Matrix, lambda: f64, v: &[f64]) -> f64 {
        let mv = m.matvec(v).unwrap();
        mv.iter()
            .zip(v)
            .map(|(a, b)| (a - lambda * b).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    #[test]
    fn diagonal_case() {
        let m = Matrix::from_vec(2, 2, vec![3.0, 0.0, 0.0, 1.0]).unwrap();
        let (vals, vecs) = symmetric_eigh_topk(&m, 2).unwrap();
        assert!((vals[0] - 3.0).abs() < 1e-12);
        assert!((vals[1] - 1.0).abs() < 1e-12);
        assert!(vecs.get(0, 0).abs() > 0.999);
        assert!(vecs.get(1, 1).abs() > 0.999);
    }

    #[test]
    fn rank_one_spectrum() {
        let mut u = vec![1.0, 2.0, -2.0];
        let norm: f64 = u.iter().map(|x| x * x).sum::<f64>().sqrt();
        u.iter_mut().for_each(|x| *x /= norm);
        let mut data = vec![0.0; 9];
        for i in 0..3 {
            for j in 0..3 {
                data[i * 3 + j] = u[i] * u[j];
            }
        }
        let m = Matrix::from_vec(3, 3, data).unwrap();
        let (vals, vecs) = symmetric_eigh_topk(&m, 1).unwrap();
        assert!((vals[0] - 1.0).abs() < 1e-10);
        let dot: f64 = (0..3).map(|i| vecs.get(0, i) * u[i]).sum();
        assert!((dot.abs() - 1.0).abs() < 1e-10, "v1 != +-u, |dot| = {}", dot.abs());
    }

    #[test]
    fn identity_case() {
        let m = Matrix::identity(4);
        let (vals, _) = symmetric_eigh_topk(&m, 1).unwrap();
        assert!((vals[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_asymmetric() {
        let m = Matrix::from_vec(2, 2, vec![1.0, 0.5, 0.0, 1.0]).unwrap();
        assert!(symmetric_eigh_topk(&m, 1).is_err());
    }

    #[test]
    fn random_symmetric_residuals() {
        let mut rng = RngStream::new(77, 0);
        let n = 12;
        let g = rng.randn(n * n);
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                data[i * n + j] = 0.5 * (g[i * n + j] + g[j * n + i]);
            }
        }
        let m = Matrix::from_vec(n, n, data).unwrap();
        let (vals, vecs) = symmetric_eigh_topk(&m, n).unwrap();
        let mnorm = m.max_abs();
        for p in 0..n {
            let v: Vec<f64> = (0..n).map(|c| vecs.get(p, c)).collect();
            assert!(residual(&m, vals[p], &v) <= 1e-8 * mnorm);
            if p > 0 {
                assert!(vals[p] <= vals[p - 1] + 1e-12);
            }
        }
    }
}
