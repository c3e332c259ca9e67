use crate::error::{Result, WarpError};

/// Dense row-major matrix of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(WarpError::DimMismatch {
                context: "Matrix::from_vec",
                expected: rows * cols,
                got: data.len(),
            });
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// `out[i] = sum_j m[i,j] v[j]`.
    pub fn matvec(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.cols {
            return Err(WarpError::DimMismatch {
                context: "matvec",
                expected: self.cols,
                got: v.len(),
            });
        }
        let mut out = vec![0.0; self.rows];
        matvec_into(&self.data, self.rows, self.cols, v, &mut out);
        Ok(out)
    }

    /// `out[j] = sum_i m[i,j] v[i]` (transpose product).
    pub fn matvec_t(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.rows {
            return Err(WarpError::DimMismatch {
                context: "matvec_t",
                expected: self.rows,
                got: v.len(),
            });
        }
        let mut out = vec![0.0; self.cols];
        matvec_t_into(&self.data, self.rows, self.cols, v, &mut out);
        Ok(out)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |a, &x| a.max(x.abs()))
    }
}

/// Row-major matrix-vector product on raw slices, accumulated into `out`.
#[inline]
pub(crate) fn matvec_into(m: &[f64], rows: usize, cols: usize, v: &[f64], out: &mut [f64]) {
    debug_assert_eq!(m.len(), rows * cols);
    debug_assert_eq!(v.len(), cols);
    debug_assert_eq!(out.len(), rows);
    for (i, o) in out.iter_mut().enumerate() {
        *o = dot(&m[i * cols..(i + 1) * cols], v);
    }
}

/// Transpose product `out[j] += or = sum_i m[i,j] v[i]`; overwrites `out`.
#[inline]
pub(crate) fn matvec_t_into(m: &[f64], rows: usize, cols: usize, v: &[f64], out: &mut [f64]) {
    debug_assert_eq!(m.len(), rows * cols);
    debug_assert_eq!(v.len(), rows);
    debug_assert_eq!(out.len(), cols);
    out.iter_mut().for_each(|o| *o = 0.0);
    for i in 0..rows {
        let row = &m[i * cols..(i + 1) * cols];
        let s = v[i];
        if s != 0.0 {
            for (o, &mij) in out.iter_mut().zip(row) {
                *o += s * mij;
            }
        }
    }
}

/// Rank-1 update `m += s * a b^T` on a raw row-major slice.
#[inline]
pub(crate) fn outer_acc(m: &mut [f64], a: &[f64], b: &[f64], s: f64) {
    debug_assert_eq!(m.len(), a.len() * b.len());
    let cols = b.len();
    for (i, &ai) in a.iter().enumerate() {
        let c = s * ai;
        if c != 0.0 {
            let row = &mut m[i * cols..(i + 1) * cols];
            for (mij, &bj) in row.iter_mut().zip(b) {
                *mij += c * bj;
            }
        }
    }
}

/// Unrolled dot product; the hot inner loop of every scan.
#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for k in 0..chunks {
        let i = k * 4;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for i in chunks * 4..a.len() {
        s += a[i] * b[i];
    }
    s
}
