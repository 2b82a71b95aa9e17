use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense row-major array of `f64`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        if shape.iter().any(|&d| d == 0) {
            return Err(Error::shape(format!("dimensions must be positive, got {shape:?}")));
        }
        let numel: usize = shape.iter().product();
        if numel != data.len() {
            return Err(Error::shape(format!(
                "shape {shape:?} needs {numel} values, got {}",
                data.len()
            )));
        }
        Ok(Tensor { shape, data })
    }

    pub fn matrix(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        Self::new(vec![rows, cols], data)
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Tensor { shape: vec![rows, cols], data: vec![0.0; rows * cols] }
    }

    pub fn full(rows: usize, cols: usize, value: f64) -> Self {
        Tensor { shape: vec![rows, cols], data: vec![value; rows * cols] }
    }

    pub fn scalar(value: f64) -> Self {
        Tensor { shape: vec![1, 1], data: vec![value] }
    }

    pub fn identity(n: usize) -> Self {
        let mut t = Self::zeros(n, n);
        for i in 0..n {
            t.data[i * n + i] = 1.0;
        }
        t
    }

    pub fn uniform(rows: usize, cols: usize, bound: f64, rng: &mut impl Rng) -> Self {
        let data = (0..rows * cols).map(|_| rng.random_range(-bound..=bound)).collect();
        Tensor { shape: vec![rows, cols], data }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::shape("ragged rows"));
        }
        Self::matrix(rows.len(), cols, rows.concat())
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.cols()).map(<[f64]>::to_vec).collect()
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    /// Leading dimension; 1 for a rank-0 view.
    pub fn rows(&self) -> usize {
        if self.shape.len() >= 2 { self.shape[0] } else { 1 }
    }

    /// Product of all trailing dimensions.
    pub fn cols(&self) -> usize {
        if self.shape.len() >= 2 { self.shape[1..].iter().product() } else { self.numel() }
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols() + c]
    }

    pub fn item(&self) -> Result<f64> {
        if self.numel() != 1 {
            return Err(Error::shape(format!("expected a scalar, got shape {:?}", self.shape)));
        }
        Ok(self.data[0])
    }

    pub fn same_shape(&self, other: &Tensor) -> bool {
        self.shape == other.shape
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor {
        Tensor { shape: self.shape.clone(), data: self.data.iter().map(|&v| f(v)).collect() }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// `out += a · b` for `a (m×k)`, `b (k×n)`; `out` is `m×n`.
pub(crate) fn matmul_acc(a: &[f64], b: &[f64], out: &mut [f64], m: usize, k: usize, n: usize) {
    gemm_acc(a, (k, 1), b, (n, 1), out, m, k, n);
}

/// `out += a · bᵀ` for `a (m×n)`, `b (k×n)`; `out` is `m×k`.
pub(crate) fn matmul_bt_acc(a: &[f64], b: &[f64], out: &mut [f64], m: usize, n: usize, k: usize) {
    gemm_acc(a, (n, 1), b, (1, n), out, m, n, k);
}

/// `out += aᵀ · b` for `a (m×k)`, `b (m×n)`; `out` is `k×n`.
pub(crate) fn matmul_at_acc(a: &[f64], b: &[f64], out: &mut [f64], m: usize, k: usize, n: usize) {
    gemm_acc(a, (1, k), b, (n, 1), out, k, m, n);
}

/// `out (m×n) += A (m×k) · B (k×n)` with explicit (row, col) strides.
#[allow(clippy::too_many_arguments)]
fn gemm_acc(a: &[f64], sa: (usize, usize), b: &[f64], sb: (usize, usize), out: &mut [f64], m: usize, k: usize, n: usize) {
    assert!(out.len() >= m * n);
    if m == 0 || n == 0 || k == 0 {
        return;
    }
    assert!(a.len() > (m - 1) * sa.0 + (k - 1) * sa.1);
    assert!(b.len() > (k - 1) * sb.0 + (n - 1) * sb.1);
    // SAFETY: bounds asserted above; out does not alias a or b.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            sa.0 as isize,
            sa.1 as isize,
            b.as_ptr(),
            sb.0 as isize,
            sb.1 as isize,
            1.0,
            out.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}
