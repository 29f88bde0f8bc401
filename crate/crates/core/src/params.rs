//! Trainable-parameter bookkeeping and the affine map used by KA-GAT.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Anything that owns trainable tensors.
///
/// `params` and `params_mut` must enumerate the same tensors in the same
/// order; gradient containers reuse the model type, so a model and its
/// gradient line up tensor by tensor.
pub trait Params {
    /// Named views of every trainable tensor, flattened row-major.
    fn params(&self) -> Vec<(String, &[f64])>;

    fn params_mut(&mut self) -> Vec<&mut [f64]>;

    fn parameter_count(&self) -> usize {
        self.params().iter().map(|(_, p)| p.len()).sum()
    }

    fn fill(&mut self, value: f64) {
        for p in self.params_mut() {
            p.fill(value);
        }
    }

    /// `self += other`, tensor by tensor.
    fn add_assign_params(&mut self, other: &Self)
    where
        Self: Sized,
    {
        let src = other.params();
        let dst = self.params_mut();
        debug_assert_eq!(src.len(), dst.len());
        for (d, (_, s)) in dst.into_iter().zip(src) {
            for (a, b) in d.iter_mut().zip(s) {
                *a += *b;
            }
        }
    }

    fn zeros_like(&self) -> Self
    where
        Self: Clone + Sized,
    {
        let mut z = self.clone();
        z.fill(0.0);
        z
    }
}

/// Prefixes the names of a child's parameters.
pub(crate) fn prefixed<'a>(prefix: &str, inner: Vec<(String, &'a [f64])>) -> Vec<(String, &'a [f64])> {
    inner
        .into_iter()
        .map(|(name, p)| (format!("{prefix}.{name}"), p))
        .collect()
}

pub(crate) fn slice_of<D: ndarray::Dimension>(a: &ndarray::Array<f64, D>) -> &[f64] {
    a.as_slice().expect("parameter tensors are kept in standard layout")
}

pub(crate) fn slice_of_mut<D: ndarray::Dimension>(a: &mut ndarray::Array<f64, D>) -> &mut [f64] {
    a.as_slice_mut().expect("parameter tensors are kept in standard layout")
}

/// Affine map `y = x W^T + b` with `W` of shape `[n_out, n_in]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Affine {
    pub n_in: usize,
    pub n_out: usize,
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Affine {
    /// Weights drawn from N(0, 1/n_in), bias zero.
    pub fn init<R: Rng + ?Sized>(n_in: usize, n_out: usize, rng: &mut R) -> Result<Self> {
        if n_in == 0 || n_out == 0 {
            return Err(Error::InvalidArgument(format!(
                "affine map needs positive widths, got {n_in} -> {n_out}"
            )));
        }
        let normal = Normal::new(0.0, (1.0 / n_in as f64).sqrt()).expect("positive std");
        let weight = Array2::from_shape_simple_fn((n_out, n_in), || normal.sample(rng));
        Ok(Self {
            n_in,
            n_out,
            weight,
            bias: Array1::zeros(n_out),
        })
    }

    pub fn zeros(n_in: usize, n_out: usize) -> Self {
        Self {
            n_in,
            n_out,
            weight: Array2::zeros((n_out, n_in)),
            bias: Array1::zeros(n_out),
        }
    }

    pub fn forward(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.n_in {
            return Err(Error::Shape(format!(
                "affine map expects {} input columns, got {}",
                self.n_in,
                x.ncols()
            )));
        }
        Ok(x.dot(&self.weight.t()) + &self.bias)
    }

    /// Accumulates parameter gradients into `grad` and returns dL/dx.
    pub fn backward(&self, x: ArrayView2<f64>, upstream: ArrayView2<f64>, grad: &mut Affine) -> Array2<f64> {
        grad.weight += &upstream.t().dot(&x);
        grad.bias += &upstream.sum_axis(Axis(0));
        upstream.dot(&self.weight)
    }
}

impl Params for Affine {
    fn params(&self) -> Vec<(String, &[f64])> {
        vec![
            ("weight".to_string(), slice_of(&self.weight)),
            ("bias".to_string(), slice_of(&self.bias)),
        ]
    }

    fn params_mut(&mut self) -> Vec<&mut [f64]> {
        vec![slice_of_mut(&mut self.weight), slice_of_mut(&mut self.bias)]
    }
}
