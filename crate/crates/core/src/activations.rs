//! Activation functions on plain tensors and tape variables.

use crate::error::{shape_err, Result};
use crate::scalar::Real;
use crate::tape::Var;
use crate::tensor::Tensor;

/// Epsilon used inside layer normalisation.
pub const LAYER_NORM_EPS: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Activation {
    Relu,
    LeakyRelu { slope: f64 },
    Sigmoid,
    Softmax { axis: usize },
    /// Row-wise standardisation without affine terms.
    LayerNorm,
}

/// Overflow-safe logistic function.
pub fn sigmoid_scalar<T: Real>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

pub(crate) fn softmax_rows<T: Real>(x: &Tensor<T>) -> Tensor<T> {
    let cols = x.cols();
    let mut out = x.clone();
    for i in 0..x.rows() {
        let row = &mut out.data_mut()[i * cols..(i + 1) * cols];
        let m = row.iter().fold(T::neg_infinity(), |a, &b| a.max(b));
        let mut z = T::zero();
        for v in row.iter_mut() {
            *v = (*v - m).exp();
            z += *v;
        }
        for v in row.iter_mut() {
            *v /= z;
        }
    }
    out
}

/// Standardised rows plus the per-row inverse standard deviation.
pub(crate) fn layer_norm_parts<T: Real>(x: &Tensor<T>, eps: T) -> (Tensor<T>, Vec<T>) {
    let cols = x.cols();
    let n = T::from_usize(cols.max(1)).unwrap();
    let mut out = x.clone();
    let mut inv = Vec::with_capacity(x.rows());
    for i in 0..x.rows() {
        let row = &mut out.data_mut()[i * cols..(i + 1) * cols];
        let mean = row.iter().copied().sum::<T>() / n;
        let var = row.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / n;
        let s = T::one() / (var + eps).sqrt();
        for v in row.iter_mut() {
            *v = (*v - mean) * s;
        }
        inv.push(s);
    }
    (out, inv)
}

/// Applies `kind` to a plain tensor.
pub fn activate<T: Real>(x: &Tensor<T>, kind: Activation) -> Result<Tensor<T>> {
    Ok(match kind {
        Activation::Relu => x.map(|v| v.max(T::zero())),
        Activation::LeakyRelu { slope } => {
            let s = T::lit(slope);
            x.map(|v| if v > T::zero() { v } else { s * v })
        }
        Activation::Sigmoid => x.map(sigmoid_scalar),
        Activation::Softmax { axis: 1 } => softmax_rows(x),
        Activation::Softmax { axis: 0 } => softmax_rows(&x.transpose()).transpose(),
        Activation::Softmax { axis } => return shape_err(format!("softmax axis {axis} invalid")),
        Activation::LayerNorm => layer_norm_parts(x, T::lit(LAYER_NORM_EPS)).0,
    })
}

impl<'t, T: Real> Var<'t, T> {
    /// Differentiable counterpart of [`activate`].
    pub fn activate(self, kind: Activation) -> Result<Var<'t, T>> {
        Ok(match kind {
            Activation::Relu => self.relu(),
            Activation::LeakyRelu { slope } => self.leaky_relu(T::lit(slope)),
            Activation::Sigmoid => self.sigmoid(),
            Activation::Softmax { axis } => self.softmax(axis)?,
            Activation::LayerNorm => self.layer_norm_rows(T::lit(LAYER_NORM_EPS)),
        })
    }
}
