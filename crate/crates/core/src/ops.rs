//! Differentiable operations on tape variables.

use std::sync::Arc;

use crate::error::{shape_err, Result};
use crate::scalar::Real;
use crate::tape::Var;
use crate::tensor::Tensor;

fn col_sums<T: Real>(g: &Tensor<T>) -> Vec<T> {
    let c = g.cols();
    let mut out = vec![T::zero(); c];
    for i in 0..g.rows() {
        for (o, &v) in out.iter_mut().zip(g.row(i)) {
            *o += v;
        }
    }
    out
}

fn row_vector<T: Real>(v: &Tensor<T>, cols: usize, what: &str) -> Result<()> {
    if v.len() != cols || (v.ndim() == 2 && v.rows() != 1) {
        return shape_err(format!(
            "{what}: expected a row of {cols} values, got {:?}",
            v.shape()
        ));
    }
    Ok(())
}

impl<'t, T: Real> Var<'t, T> {
    fn unary(
        self,
        value: Tensor<T>,
        backward: impl Fn(&Tensor<T>) -> Tensor<T> + Send + 'static,
    ) -> Var<'t, T> {
        self.tape()
            .record(&[self], value, move |g| vec![Some(backward(g))])
    }

    /// Matrix product.
    pub fn matmul(self, other: Var<'t, T>) -> Result<Var<'t, T>> {
        let a = self.value();
        let b = other.value();
        let out = a.matmul(&b)?;
        Ok(self.tape().record(&[self, other], out, move |g| {
            vec![
                Some(g.matmul_ex(false, &b, true).expect("matmul grad lhs")),
                Some(a.matmul_ex(true, g, false).expect("matmul grad rhs")),
            ]
        }))
    }

    pub fn add(self, other: Var<'t, T>) -> Result<Var<'t, T>> {
        let out = self.value().add(&other.value())?;
        Ok(self
            .tape()
            .record(&[self, other], out, |g| vec![Some(g.clone()), Some(g.clone())]))
    }

    pub fn sub(self, other: Var<'t, T>) -> Result<Var<'t, T>> {
        let out = self.value().sub(&other.value())?;
        Ok(self.tape().record(&[self, other], out, |g| {
            vec![Some(g.clone()), Some(g.scale(-T::one()))]
        }))
    }

    /// Elementwise product.
    pub fn mul(self, other: Var<'t, T>) -> Result<Var<'t, T>> {
        let a = self.value();
        let b = other.value();
        let out = a.mul(&b)?;
        Ok(self.tape().record(&[self, other], out, move |g| {
            vec![
                Some(g.mul(&b).expect("mul grad")),
                Some(g.mul(&a).expect("mul grad")),
            ]
        }))
    }

    /// Adds a row vector to every row.
    pub fn add_row(self, bias: Var<'t, T>) -> Result<Var<'t, T>> {
        let x = self.value();
        let b = bias.value();
        let cols = x.cols();
        row_vector(&b, cols, "add_row")?;
        let bshape = b.shape().to_vec();
        let mut out = (*x).clone();
        for i in 0..out.rows() {
            for (o, &bv) in out.data_mut()[i * cols..(i + 1) * cols].iter_mut().zip(b.data()) {
                *o += bv;
            }
        }
        Ok(self.tape().record(&[self, bias], out, move |g| {
            vec![
                Some(g.clone()),
                Some(Tensor::from_parts(bshape.clone(), col_sums(g))),
            ]
        }))
    }

    /// Multiplies every row elementwise by a row vector.
    pub fn mul_row(self, gain: Var<'t, T>) -> Result<Var<'t, T>> {
        let x = self.value();
        let s = gain.value();
        let cols = x.cols();
        row_vector(&s, cols, "mul_row")?;
        let mut out = (*x).clone();
        for i in 0..out.rows() {
            for (o, &sv) in out.data_mut()[i * cols..(i + 1) * cols].iter_mut().zip(s.data()) {
                *o *= sv;
            }
        }
        Ok(self.tape().record(&[self, gain], out, move |g| {
            let mut gx = g.clone();
            let mut gs = vec![T::zero(); cols];
            for i in 0..g.rows() {
                for j in 0..cols {
                    gs[j] += g.get(i, j) * x.get(i, j);
                    gx.data_mut()[i * cols + j] *= s.data()[j];
                }
            }
            vec![Some(gx), Some(Tensor::from_parts(s.shape().to_vec(), gs))]
        }))
    }

    pub fn scale(self, c: T) -> Var<'t, T> {
        let out = self.value().scale(c);
        self.unary(out, move |g| g.scale(c))
    }

    pub fn neg(self) -> Var<'t, T> {
        self.scale(-T::one())
    }

    pub fn add_scalar(self, c: T) -> Var<'t, T> {
        let out = self.value().map(|v| v + c);
        self.unary(out, |g| g.clone())
    }

    pub fn square(self) -> Var<'t, T> {
        let x = self.value();
        let out = x.map(|v| v * v);
        self.unary(out, move |g| {
            g.zip_map(&x, |gv, xv| T::lit(2.0) * gv * xv).unwrap()
        })
    }

    pub fn exp(self) -> Var<'t, T> {
        let y = Arc::new(self.value().map(T::exp));
        let y2 = Arc::clone(&y);
        self.unary((*y).clone(), move |g| g.mul(&y2).unwrap())
    }

    pub fn relu(self) -> Var<'t, T> {
        let x = self.value();
        let out = x.map(|v| v.max(T::zero()));
        self.unary(out, move |g| {
            g.zip_map(&x, |gv, xv| if xv > T::zero() { gv } else { T::zero() })
                .unwrap()
        })
    }

    pub fn leaky_relu(self, slope: T) -> Var<'t, T> {
        let x = self.value();
        let out = x.map(|v| if v > T::zero() { v } else { slope * v });
        self.unary(out, move |g| {
            g.zip_map(&x, |gv, xv| if xv > T::zero() { gv } else { slope * gv })
                .unwrap()
        })
    }

    pub fn sigmoid(self) -> Var<'t, T> {
        let y = Arc::new(self.value().map(crate::activations::sigmoid_scalar));
        let y2 = Arc::clone(&y);
        self.unary((*y).clone(), move |g| {
            g.zip_map(&y2, |gv, yv| gv * yv * (T::one() - yv)).unwrap()
        })
    }

    /// Sum of all entries, as a scalar.
    pub fn sum(self) -> Var<'t, T> {
        let x = self.value();
        let shape = x.shape().to_vec();
        let out = Tensor::scalar(x.sum());
        self.unary(out, move |g| Tensor::full(shape.clone(), g.data()[0]))
    }

    pub fn mean(self) -> Var<'t, T> {
        let n = T::from_usize(self.value().len().max(1)).unwrap();
        self.sum().scale(T::one() / n)
    }

    pub fn transpose(self) -> Result<Var<'t, T>> {
        let x = self.value();
        x.require_matrix("transpose")?;
        let out = x.transpose();
        Ok(self.unary(out, |g| g.transpose()))
    }

    pub fn reshape(self, shape: impl Into<Vec<usize>>) -> Result<Var<'t, T>> {
        let x = self.value();
        let old = x.shape().to_vec();
        let out = (*x).clone().reshape(shape)?;
        Ok(self.unary(out, move |g| g.clone().reshape(old.clone()).unwrap()))
    }

    pub fn slice_cols(self, start: usize, end: usize) -> Result<Var<'t, T>> {
        let x = self.value();
        let out = x.slice_cols(start, end)?;
        let (rows, cols) = (x.rows(), x.cols());
        Ok(self.unary(out, move |g| {
            let w = end - start;
            let mut full = Tensor::zeros([rows, cols]);
            for i in 0..rows {
                full.data_mut()[i * cols + start..i * cols + end]
                    .copy_from_slice(&g.data()[i * w..(i + 1) * w]);
            }
            full
        }))
    }

    /// Horizontal concatenation.
    pub fn concat_cols(parts: &[Var<'t, T>]) -> Result<Var<'t, T>> {
        let Some(first) = parts.first() else {
            return shape_err("concat_cols of nothing");
        };
        let values: Vec<_> = parts.iter().map(|p| p.value()).collect();
        let refs: Vec<&Tensor<T>> = values.iter().map(|v| v.as_ref()).collect();
        let out = Tensor::concat_cols(&refs)?;
        let widths: Vec<usize> = values.iter().map(|v| v.cols()).collect();
        Ok(first.tape().record(parts, out, move |g| {
            let mut start = 0;
            widths
                .iter()
                .map(|&w| {
                    let part = g.slice_cols(start, start + w).unwrap();
                    start += w;
                    Some(part)
                })
                .collect()
        }))
    }

    /// Softmax along `axis` (0 = down columns, 1 = along rows).
    pub fn softmax(self, axis: usize) -> Result<Var<'t, T>> {
        match axis {
            1 => Ok(self.softmax_rows()),
            0 => Ok(self.transpose()?.softmax_rows().transpose()?),
            _ => shape_err(format!("softmax axis {axis} invalid for a matrix")),
        }
    }

    fn softmax_rows(self) -> Var<'t, T> {
        let y = Arc::new(crate::activations::softmax_rows(&self.value()));
        let y2 = Arc::clone(&y);
        self.unary((*y).clone(), move |g| {
            let cols = y2.cols();
            let mut out = g.clone();
            for i in 0..y2.rows() {
                let yr = y2.row(i);
                let gr = g.row(i);
                let dot: T = yr.iter().zip(gr).map(|(&a, &b)| a * b).sum();
                for j in 0..cols {
                    out.data_mut()[i * cols + j] = yr[j] * (gr[j] - dot);
                }
            }
            out
        })
    }

    /// Per-row standardisation `(x - mean) / sqrt(var + eps)` without affine
    /// terms.
    pub fn layer_norm_rows(self, eps: T) -> Var<'t, T> {
        let (xhat, inv_std) = crate::activations::layer_norm_parts(&self.value(), eps);
        let xhat = Arc::new(xhat);
        let xh = Arc::clone(&xhat);
        self.unary((*xhat).clone(), move |g| {
            let cols = xh.cols();
            let n = T::from_usize(cols).unwrap();
            let mut out = g.clone();
            for i in 0..xh.rows() {
                let gr = g.row(i);
                let xr = xh.row(i);
                let mg = gr.iter().copied().sum::<T>() / n;
                let mgx = gr.iter().zip(xr).map(|(&a, &b)| a * b).sum::<T>() / n;
                for j in 0..cols {
                    out.data_mut()[i * cols + j] = inv_std[i] * (gr[j] - mg - xr[j] * mgx);
                }
            }
            out
        })
    }

    /// Picks one column per row: `out[i] = x[i, index[i]]`, shape `rows x 1`.
    pub fn gather_cols(self, index: &[usize]) -> Result<Var<'t, T>> {
        let x = self.value();
        x.require_matrix("gather_cols")?;
        let (rows, cols) = (x.rows(), x.cols());
        if index.len() != rows || index.iter().any(|&j| j >= cols) {
            return shape_err("gather_cols: index does not match the matrix");
        }
        let out = Tensor::from_parts(
            [rows, 1],
            index.iter().enumerate().map(|(i, &j)| x.get(i, j)).collect(),
        );
        let index = index.to_vec();
        Ok(self.unary(out, move |g| {
            let mut full = Tensor::zeros([rows, cols]);
            for (i, &j) in index.iter().enumerate() {
                full.set(i, j, g.data()[i]);
            }
            full
        }))
    }
}
