//! Affine layer shared by the convolutional heads and readouts.

use crate::rng::Rng;
use crate::tensor::{ops, Tensor, TensorError};

/// y = x W + b with W stored as [in, out].
pub struct Dense {
    pub weight: Tensor,
    pub bias: Tensor,
}

impl Dense {
    /// Uniform init scaled by fan-in.
    pub fn init(in_dim: usize, out_dim: usize, rng: &mut Rng) -> Self {
        let bound = (1.0 / in_dim as f64).sqrt();
        let w: Vec<f64> = (0..in_dim * out_dim)
            .map(|_| rng.uniform_in(-bound, bound))
            .collect();
        Self {
            weight: Tensor::param(&[in_dim, out_dim], w).unwrap(),
            bias: Tensor::param(&[out_dim], vec![0.0; out_dim]).unwrap(),
        }
    }

    pub fn zeroed(in_dim: usize, out_dim: usize) -> Self {
        Self {
            weight: Tensor::param(&[in_dim, out_dim], vec![0.0; in_dim * out_dim]).unwrap(),
            bias: Tensor::param(&[out_dim], vec![0.0; out_dim]).unwrap(),
        }
    }

    /// Applies the layer to a [B, in] batch.
    pub fn forward(&self, x: &Tensor) -> Result<Tensor, TensorError> {
        ops::add_rowvec(&ops::matmul(x, &self.weight)?, &self.bias)
    }

    pub fn in_dim(&self) -> usize {
        self.weight.shape()[0]
    }

    pub fn out_dim(&self) -> usize {
        self.weight.shape()[1]
    }

    pub fn params(&self) -> Vec<Tensor> {
        vec![self.weight.clone(), self.bias.clone()]
    }
}
