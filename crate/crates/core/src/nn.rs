//! Dense building blocks with hand-written backward passes.

use std::fmt::Debug;

use num_traits::Float;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

/// Floating-point element type. Training and gradient checks run in `f64`;
/// inference also runs in `f32`.
pub trait Real: Float + std::iter::Sum + std::ops::AddAssign + Debug + Send + Sync + 'static {
    fn lit(x: f64) -> Self;
    fn to_f64(self) -> f64;
    fn from_f32(x: f32) -> Self;
    fn to_f32(self) -> f32;
}

impl Real for f64 {
    fn lit(x: f64) -> Self {
        x
    }
    fn to_f64(self) -> f64 {
        self
    }
    fn from_f32(x: f32) -> Self {
        f64::from(x)
    }
    fn to_f32(self) -> f32 {
        self as f32
    }
}

impl Real for f32 {
    fn lit(x: f64) -> Self {
        x as f32
    }
    fn to_f64(self) -> f64 {
        f64::from(self)
    }
    fn from_f32(x: f32) -> Self {
        x
    }
    fn to_f32(self) -> f32 {
        self
    }
}

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<T> {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<T>,
}

impl<T: Real> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            assert_eq!(r.len(), cols, "ragged rows");
            data.extend_from_slice(r);
        }
        Self {
            rows: rows.len(),
            cols,
            data,
        }
    }

    pub fn row(&self, r: usize) -> &[T] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [T] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn at(&self, r: usize, c: usize) -> T {
        self.data[r * self.cols + c]
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn add(&self, other: &Matrix<T>) -> Matrix<T> {
        debug_assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| a + b).collect(),
        }
    }

    pub fn add_assign(&mut self, other: &Matrix<T>) {
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }
}

/// Affine map `y = x·W + b` with `W` stored as `in × out`.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear<T> {
    pub weight: Matrix<T>,
    pub bias: Vec<T>,
}

impl<T: Real> Linear<T> {
    pub fn zeros(input: usize, output: usize) -> Self {
        Self {
            weight: Matrix::zeros(input, output),
            bias: vec![T::zero(); output],
        }
    }

    /// Weights `N(0, 1/fan_in)`, zero bias.
    pub fn init<R: Rng>(input: usize, output: usize, rng: &mut R) -> Self {
        let std = 1.0 / (input as f64).sqrt();
        let mut layer = Self::zeros(input, output);
        for w in &mut layer.weight.data {
            let z: f64 = StandardNormal.sample(rng);
            *w = T::lit(z * std);
        }
        layer
    }

    pub fn in_dim(&self) -> usize {
        self.weight.rows
    }

    pub fn out_dim(&self) -> usize {
        self.weight.cols
    }

    /// Applies the map to one row vector.
    pub fn apply_vec(&self, x: &[T]) -> Vec<T> {
        let mut y = self.bias.clone();
        for (i, &xi) in x.iter().enumerate() {
            let w = self.weight.row(i);
            for (yj, &wij) in y.iter_mut().zip(w) {
                *yj += xi * wij;
            }
        }
        y
    }

    /// Applies the map to every row of `x`.
    pub fn apply(&self, x: &Matrix<T>) -> Matrix<T> {
        let mut y = Matrix::zeros(x.rows, self.out_dim());
        for t in 0..x.rows {
            let out = self.apply_vec(x.row(t));
            y.row_mut(t).copy_from_slice(&out);
        }
        y
    }

    /// Accumulates parameter gradients for one row and returns `dL/dx`.
    pub fn backward_vec(&self, x: &[T], dy: &[T], grad: &mut Linear<T>) -> Vec<T> {
        for (gb, &d) in grad.bias.iter_mut().zip(dy) {
            *gb += d;
        }
        let mut dx = vec![T::zero(); self.in_dim()];
        for (i, (&xi, dxi)) in x.iter().zip(dx.iter_mut()).enumerate() {
            let w = self.weight.row(i);
            let gw = grad.weight.row_mut(i);
            let mut acc = T::zero();
            for ((&wij, gwij), &d) in w.iter().zip(gw.iter_mut()).zip(dy) {
                *gwij += xi * d;
                acc += wij * d;
            }
            *dxi = acc;
        }
        dx
    }

    pub fn backward(&self, x: &Matrix<T>, dy: &Matrix<T>, grad: &mut Linear<T>) -> Matrix<T> {
        let mut dx = Matrix::zeros(x.rows, self.in_dim());
        for t in 0..x.rows {
            let d = self.backward_vec(x.row(t), dy.row(t), grad);
            dx.row_mut(t).copy_from_slice(&d);
        }
        dx
    }
}

pub const LN_EPS: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq)]
pub struct LayerNorm<T> {
    pub gamma: Vec<T>,
    pub beta: Vec<T>,
}

/// Saved statistics of a layer-norm forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct NormCache<T> {
    pub xhat: Matrix<T>,
    pub rstd: Vec<T>,
}

impl<T: Real> LayerNorm<T> {
    pub fn new(dim: usize) -> Self {
        Self {
            gamma: vec![T::one(); dim],
            beta: vec![T::zero(); dim],
        }
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            gamma: vec![T::zero(); dim],
            beta: vec![T::zero(); dim],
        }
    }

    pub fn forward(&self, x: &Matrix<T>) -> (Matrix<T>, NormCache<T>) {
        let n = T::lit(x.cols as f64);
        let eps = T::lit(LN_EPS);
        let mut xhat = Matrix::zeros(x.rows, x.cols);
        let mut y = Matrix::zeros(x.rows, x.cols);
        let mut rstd = Vec::with_capacity(x.rows);
        for t in 0..x.rows {
            let row = x.row(t);
            let mean = row.iter().copied().sum::<T>() / n;
            let var = row.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / n;
            let r = T::one() / (var + eps).sqrt();
            rstd.push(r);
            let xh = xhat.row_mut(t);
            for (h, &v) in xh.iter_mut().zip(row) {
                *h = (v - mean) * r;
            }
            let xh = xhat.row(t).to_vec();
            for (((o, &h), &g), &b) in y.row_mut(t).iter_mut().zip(&xh).zip(&self.gamma).zip(&self.beta) {
                *o = g * h + b;
            }
        }
        (y, NormCache { xhat, rstd })
    }

    pub fn backward(&self, cache: &NormCache<T>, dy: &Matrix<T>, grad: &mut LayerNorm<T>) -> Matrix<T> {
        let n = T::lit(dy.cols as f64);
        let mut dx = Matrix::zeros(dy.rows, dy.cols);
        for t in 0..dy.rows {
            let xh = cache.xhat.row(t);
            let d = dy.row(t);
            let mut dxhat = Vec::with_capacity(dy.cols);
            for k in 0..dy.cols {
                grad.gamma[k] += d[k] * xh[k];
                grad.beta[k] += d[k];
                dxhat.push(d[k] * self.gamma[k]);
            }
            let mean_d = dxhat.iter().copied().sum::<T>() / n;
            let mean_dx = dxhat.iter().zip(xh).map(|(&a, &b)| a * b).sum::<T>() / n;
            let r = cache.rstd[t];
            for (k, o) in dx.row_mut(t).iter_mut().enumerate() {
                *o = r * (dxhat[k] - mean_d - xh[k] * mean_dx);
            }
        }
        dx
    }
}

const GELU_C: f64 = 0.044_715;

fn gelu_k<T: Real>() -> T {
    T::lit((2.0 / std::f64::consts::PI).sqrt())
}

/// GELU, tanh approximation.
pub fn gelu<T: Real>(u: T) -> T {
    let half = T::lit(0.5);
    half * u * (T::one() + (gelu_k::<T>() * (u + T::lit(GELU_C) * u * u * u)).tanh())
}

pub fn gelu_grad<T: Real>(u: T) -> T {
    let half = T::lit(0.5);
    let k = gelu_k::<T>();
    let c = T::lit(GELU_C);
    let t = (k * (u + c * u * u * u)).tanh();
    half * (T::one() + t) + half * u * (T::one() - t * t) * k * (T::one() + T::lit(3.0) * c * u * u)
}

pub fn sigmoid<T: Real>(z: T) -> T {
    if z >= T::zero() {
        T::one() / (T::one() + (-z).exp())
    } else {
        let e = z.exp();
        e / (T::one() + e)
    }
}

/// In-place max-subtracted softmax.
pub fn softmax_in_place<T: Real>(row: &mut [T]) {
    let max = row.iter().copied().fold(T::neg_infinity(), T::max);
    let mut sum = T::zero();
    for x in row.iter_mut() {
        *x = (*x - max).exp();
        sum += *x;
    }
    for x in row.iter_mut() {
        *x = *x / sum;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gelu_grad_matches_difference_quotient() {
        for &u in &[-3.0, -1.0, -0.2, 0.0, 0.4, 1.7, 4.0] {
            let h = 1e-6;
            let fd = (gelu(u + h) - gelu(u - h)) / (2.0 * h);
            assert!((fd - gelu_grad(u)).abs() < 1e-8, "u={u}");
        }
    }

    #[test]
    fn softmax_is_stable_and_normalized() {
        let mut row = vec![1000.0f64, 1001.0, 999.0];
        softmax_in_place(&mut row);
        assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(row[1] > row[0] && row[0] > row[2]);
    }

    #[test]
    fn sigmoid_extremes() {
        assert_eq!(sigmoid(0.0f64), 0.5);
        assert!(sigmoid(-800.0f64) >= 0.0);
        assert!(sigmoid(800.0f64) <= 1.0);
    }

    #[test]
    fn linear_apply_matches_hand_values() {
        let mut l = Linear::<f64>::zeros(2, 3);
        l.weight.data = vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        l.bias = vec![0.5, 0.0, -1.0];
        assert_eq!(l.apply_vec(&[1.0, -1.0]), vec![-2.5, -3.0, -4.0]);
    }
}
