use ndarray::{Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use super::params::{slice, slice_mut, ParamTensors};
use crate::rng::{self, Pcg32};

/// Two-layer perceptron `relu(x W1 + b1) W2 + b2`, applied row-wise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpHead {
    /// input x hidden
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    /// hidden x output
    pub w2: Array2<f64>,
    pub b2: Array1<f64>,
}

/// Activations kept for the backward pass.
#[derive(Debug, Clone)]
pub struct MlpCache {
    pre: Array2<f64>,
    hidden: Array2<f64>,
    pub output: Array2<f64>,
}

fn uniform_matrix(rng: &mut Pcg32, rows: usize, cols: usize, bound: f64) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || rng::symmetric(rng, bound))
}

fn uniform_vector(rng: &mut Pcg32, len: usize, bound: f64) -> Array1<f64> {
    Array1::from_shape_simple_fn(len, || rng::symmetric(rng, bound))
}

impl MlpHead {
    /// Weights and biases uniform in `±1/sqrt(fan_in)`.
    pub fn init(input: usize, hidden: usize, output: usize, rng: &mut Pcg32) -> Self {
        let b_in = 1.0 / (input as f64).sqrt();
        let b_hid = 1.0 / (hidden as f64).sqrt();
        Self {
            w1: uniform_matrix(rng, input, hidden, b_in),
            b1: uniform_vector(rng, hidden, b_in),
            w2: uniform_matrix(rng, hidden, output, b_hid),
            b2: uniform_vector(rng, output, b_hid),
        }
    }

    pub fn zeros(input: usize, hidden: usize, output: usize) -> Self {
        Self {
            w1: Array2::zeros((input, hidden)),
            b1: Array1::zeros(hidden),
            w2: Array2::zeros((hidden, output)),
            b2: Array1::zeros(output),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.w1.nrows()
    }

    pub fn hidden_dim(&self) -> usize {
        self.w1.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.w2.ncols()
    }

    pub fn forward(&self, x: ArrayView2<'_, f64>) -> MlpCache {
        let pre = x.dot(&self.w1) + &self.b1;
        let hidden = pre.mapv(|v| v.max(0.0));
        let output = hidden.dot(&self.w2) + &self.b2;
        MlpCache {
            pre,
            hidden,
            output,
        }
    }

    pub fn output(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        self.forward(x).output
    }

    /// Accumulates parameter gradients for upstream gradient `d_out` into `grads`.
    pub fn backward(
        &self,
        x: ArrayView2<'_, f64>,
        cache: &MlpCache,
        d_out: ArrayView2<'_, f64>,
        grads: &mut MlpHead,
    ) {
        grads.w2 += &cache.hidden.t().dot(&d_out);
        grads.b2 += &d_out.sum_axis(Axis(0));
        let mut d_pre = d_out.dot(&self.w2.t());
        d_pre.zip_mut_with(&cache.pre, |d, p| {
            if *p <= 0.0 {
                *d = 0.0;
            }
        });
        grads.w1 += &x.t().dot(&d_pre);
        grads.b1 += &d_pre.sum_axis(Axis(0));
    }
}

impl ParamTensors for MlpHead {
    fn tensors(&self) -> Vec<&[f64]> {
        vec![slice(&self.w1), slice(&self.b1), slice(&self.w2), slice(&self.b2)]
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        vec![
            slice_mut(&mut self.w1),
            slice_mut(&mut self.b1),
            slice_mut(&mut self.w2),
            slice_mut(&mut self.b2),
        ]
    }
}
