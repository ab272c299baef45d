//! Small dense building blocks: a row-major matrix and a two-layer ReLU MLP
//! with explicit forward caches and backward passes.

use alloc::vec;
use alloc::vec::Vec;

#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Matrix { rows, cols, data }
    }

    /// Panics if `data.len() != rows * cols`.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "matrix data length");
        Matrix { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }
}

/// Affine map `y = W x + b` with `W` stored as `out x in`.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    pub weight: Matrix,
    pub bias: Vec<f64>,
}

impl Linear {
    pub fn zeros(input: usize, output: usize) -> Self {
        Linear { weight: Matrix::zeros(output, input), bias: vec![0.0; output] }
    }

    pub fn input_dim(&self) -> usize {
        self.weight.cols()
    }

    pub fn output_dim(&self) -> usize {
        self.weight.rows()
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.input_dim());
        (0..self.output_dim()).map(|o| dot(self.weight.row(o), x) + self.bias[o]).collect()
    }

    /// Accumulates parameter gradients into `grad` and returns `dL/dx`.
    pub fn backward(&self, x: &[f64], dy: &[f64], grad: &mut Linear) -> Vec<f64> {
        let mut dx = vec![0.0; self.input_dim()];
        for (o, &g) in dy.iter().enumerate() {
            if g == 0.0 {
                continue;
            }
            grad.bias[o] += g;
            let gw = grad.weight.row_mut(o);
            for (i, &xi) in x.iter().enumerate() {
                gw[i] += g * xi;
            }
            for (i, &w) in self.weight.row(o).iter().enumerate() {
                dx[i] += g * w;
            }
        }
        dx
    }

    pub fn params(&self) -> impl Iterator<Item = &f64> {
        self.weight.as_slice().iter().chain(self.bias.iter())
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.weight.as_mut_slice().iter_mut().chain(self.bias.iter_mut())
    }
}

/// `out = L2(relu(L1(x)))`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub first: Linear,
    pub second: Linear,
}

/// Hidden pre-activations kept for the backward pass.
#[derive(Debug, Clone)]
pub struct MlpCache {
    pub hidden_pre: Vec<f64>,
    pub hidden: Vec<f64>,
}

impl Mlp {
    pub fn zeros(input: usize, hidden: usize, output: usize) -> Self {
        Mlp { first: Linear::zeros(input, hidden), second: Linear::zeros(hidden, output) }
    }

    pub fn forward(&self, x: &[f64]) -> (Vec<f64>, MlpCache) {
        let hidden_pre = self.first.forward(x);
        let hidden: Vec<f64> = hidden_pre.iter().map(|&v| relu(v)).collect();
        let out = self.second.forward(&hidden);
        (out, MlpCache { hidden_pre, hidden })
    }

    pub fn backward(&self, x: &[f64], cache: &MlpCache, dout: &[f64], grad: &mut Mlp) -> Vec<f64> {
        let mut dh = self.second.backward(&cache.hidden, dout, &mut grad.second);
        for (g, &pre) in dh.iter_mut().zip(&cache.hidden_pre) {
            // relu'(0) taken as 0
            if pre <= 0.0 {
                *g = 0.0;
            }
        }
        self.first.backward(x, &dh, &mut grad.first)
    }

    pub fn params(&self) -> impl Iterator<Item = &f64> {
        self.first.params().chain(self.second.params())
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.first.params_mut().chain(self.second.params_mut())
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn relu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        0.0
    }
}

/// Logistic function, evaluated without overflow for large `|x|`.
#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + libm::exp(-x))
    } else {
        let e = libm::exp(x);
        e / (1.0 + e)
    }
}

/// `log(sigmoid(x))` computed as `-softplus(-x)`.
#[inline]
pub fn log_sigmoid(x: f64) -> f64 {
    let neg = -x;
    -(relu(neg) + libm::log1p(libm::exp(-libm::fabs(neg))))
}

pub fn add_assign(acc: &mut [f64], v: &[f64]) {
    for (a, b) in acc.iter_mut().zip(v) {
        *a += b;
    }
}
