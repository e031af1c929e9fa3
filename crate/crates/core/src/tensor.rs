//! Dense row-major tensors.

use std::fmt;

use crate::error::{shape_err, NumericError, Result};
use crate::scalar::Real;

/// Dense row-major array of real values.
///
/// Most routines in this crate operate on rank-2 tensors; rank-1 and rank-3
/// shapes are carried for scalars, vectors and stacked blocks.
#[derive(Clone, PartialEq)]
pub struct Tensor<T> {
    shape: Vec<usize>,
    data: Vec<T>,
}

impl<T: Real> Tensor<T> {
    /// Validating constructor for external data: length must match the shape
    /// and every value must be finite.
    pub fn new(shape: impl Into<Vec<usize>>, data: Vec<T>) -> Result<Self> {
        let shape = shape.into();
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return shape_err(format!(
                "shape {shape:?} needs {expected} values, got {}",
                data.len()
            ));
        }
        if let Some(index) = data.iter().position(|v| !v.is_finite()) {
            return Err(NumericError::NonFinite { index });
        }
        Ok(Self { shape, data })
    }

    /// Constructor for values computed inside the numeric layer. Only the
    /// length is checked.
    pub fn from_parts(shape: impl Into<Vec<usize>>, data: Vec<T>) -> Self {
        let shape = shape.into();
        assert_eq!(
            shape.iter().product::<usize>(),
            data.len(),
            "tensor data length does not match shape {shape:?}"
        );
        Self { shape, data }
    }

    pub fn full(shape: impl Into<Vec<usize>>, value: T) -> Self {
        let shape = shape.into();
        let n = shape.iter().product();
        Self {
            shape,
            data: vec![value; n],
        }
    }

    pub fn zeros(shape: impl Into<Vec<usize>>) -> Self {
        Self::full(shape, T::zero())
    }

    pub fn ones(shape: impl Into<Vec<usize>>) -> Self {
        Self::full(shape, T::one())
    }

    pub fn scalar(value: T) -> Self {
        Self {
            shape: vec![1],
            data: vec![value],
        }
    }

    pub fn eye(n: usize) -> Self {
        let mut t = Self::zeros([n, n]);
        for i in 0..n {
            t.data[i * n + i] = T::one();
        }
        t
    }

    pub fn from_diag(diag: &[T]) -> Self {
        let n = diag.len();
        let mut t = Self::zeros([n, n]);
        for (i, &d) in diag.iter().enumerate() {
            t.data[i * n + i] = d;
        }
        t
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self {
            shape: vec![rows, cols],
            data,
        }
    }

    /// Builds a matrix from equal-length rows.
    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return shape_err("ragged rows");
        }
        Self::new([rows.len(), cols], rows.concat())
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn ndim(&self) -> usize {
        self.shape.len()
    }

    /// Leading dimension of a matrix (1 for rank-1 tensors).
    pub fn rows(&self) -> usize {
        match self.shape.len() {
            0 => 1,
            1 => 1,
            _ => self.shape[0],
        }
    }

    /// Trailing dimension product of a matrix view.
    pub fn cols(&self) -> usize {
        match self.shape.len() {
            0 => 1,
            1 => self.shape[0],
            _ => self.shape[1..].iter().product(),
        }
    }

    pub fn is_scalar(&self) -> bool {
        self.data.len() == 1
    }

    /// Value of a single-element tensor.
    pub fn item(&self) -> Result<T> {
        if self.data.len() != 1 {
            return shape_err(format!("expected a scalar, got shape {:?}", self.shape));
        }
        Ok(self.data[0])
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.cols() + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: T) {
        let c = self.cols();
        self.data[i * c + j] = v;
    }

    pub fn row(&self, i: usize) -> &[T] {
        let c = self.cols();
        &self.data[i * c..(i + 1) * c]
    }

    pub fn reshape(mut self, shape: impl Into<Vec<usize>>) -> Result<Self> {
        let shape = shape.into();
        if shape.iter().product::<usize>() != self.data.len() {
            return shape_err(format!(
                "cannot reshape {:?} into {shape:?}",
                self.shape
            ));
        }
        self.shape = shape;
        Ok(self)
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.shape == other.shape
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(T, T) -> T) -> Result<Self> {
        if !self.same_shape(other) {
            return shape_err(format!(
                "elementwise operands differ: {:?} vs {:?}",
                self.shape, other.shape
            ));
        }
        Ok(Self {
            shape: self.shape.clone(),
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_map(other, |a, b| a - b)
    }

    /// Elementwise (Hadamard) product.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.zip_map(other, |a, b| a * b)
    }

    pub fn scale(&self, c: T) -> Self {
        self.map(|v| v * c)
    }

    /// In-place `self += c * other`.
    pub fn axpy(&mut self, c: T, other: &Self) -> Result<()> {
        if !self.same_shape(other) {
            return shape_err(format!(
                "axpy operands differ: {:?} vs {:?}",
                self.shape, other.shape
            ));
        }
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += c * b;
        }
        Ok(())
    }

    pub fn sum(&self) -> T {
        self.data.iter().copied().sum()
    }

    pub fn mean(&self) -> T {
        self.sum() / T::from_usize(self.data.len().max(1)).unwrap()
    }

    pub fn max_abs(&self) -> T {
        self.data
            .iter()
            .fold(T::zero(), |m, &v| if v.abs() > m { v.abs() } else { m })
    }

    pub fn norm_sq(&self) -> T {
        self.data.iter().map(|&v| v * v).sum()
    }

    pub fn trace(&self) -> Result<T> {
        self.require_square("trace")?;
        let n = self.rows();
        Ok((0..n).map(|i| self.data[i * n + i]).sum())
    }

    pub fn transpose(&self) -> Self {
        let (r, c) = (self.rows(), self.cols());
        let mut data = Vec::with_capacity(r * c);
        for j in 0..c {
            for i in 0..r {
                data.push(self.data[i * c + j]);
            }
        }
        Self {
            shape: vec![c, r],
            data,
        }
    }

    pub fn require_matrix(&self, what: &str) -> Result<()> {
        if self.shape.len() != 2 {
            return shape_err(format!("{what}: expected a matrix, got {:?}", self.shape));
        }
        Ok(())
    }

    pub fn require_square(&self, what: &str) -> Result<()> {
        self.require_matrix(what)?;
        if self.shape[0] != self.shape[1] {
            return shape_err(format!("{what}: matrix {:?} is not square", self.shape));
        }
        Ok(())
    }

    pub fn is_symmetric(&self, tol: T) -> bool {
        if self.require_square("symmetry").is_err() {
            return false;
        }
        let n = self.rows();
        (0..n).all(|i| (0..i).all(|j| (self.data[i * n + j] - self.data[j * n + i]).abs() <= tol))
    }

    /// Matrix product `self * other`.
    pub fn matmul(&self, other: &Self) -> Result<Self> {
        self.matmul_ex(false, other, false)
    }

    /// Product with optional transposition of either operand, without
    /// materialising the transposes.
    pub fn matmul_ex(&self, ta: bool, other: &Self, tb: bool) -> Result<Self> {
        self.require_matrix("matmul lhs")?;
        other.require_matrix("matmul rhs")?;
        let (ar, ac) = (self.shape[0], self.shape[1]);
        let (br, bc) = (other.shape[0], other.shape[1]);
        let (m, k) = if ta { (ac, ar) } else { (ar, ac) };
        let (k2, n) = if tb { (bc, br) } else { (br, bc) };
        if k != k2 {
            return shape_err(format!(
                "matmul inner dimensions disagree: {:?}{} x {:?}{}",
                self.shape,
                if ta { "ᵀ" } else { "" },
                other.shape,
                if tb { "ᵀ" } else { "" }
            ));
        }
        let (rsa, csa) = if ta { (1, ac as isize) } else { (ac as isize, 1) };
        let (rsb, csb) = if tb { (1, bc as isize) } else { (bc as isize, 1) };
        let mut out = vec![T::zero(); m * n];
        T::gemm(
            m,
            k,
            n,
            T::one(),
            &self.data,
            rsa,
            csa,
            &other.data,
            rsb,
            csb,
            T::zero(),
            &mut out,
            n as isize,
            1,
        );
        Ok(Self {
            shape: vec![m, n],
            data: out,
        })
    }

    /// Columns `[start, end)` of a matrix.
    pub fn slice_cols(&self, start: usize, end: usize) -> Result<Self> {
        self.require_matrix("slice_cols")?;
        let c = self.cols();
        if start > end || end > c {
            return shape_err(format!("column range {start}..{end} outside {c} columns"));
        }
        let w = end - start;
        let mut data = Vec::with_capacity(self.rows() * w);
        for i in 0..self.rows() {
            data.extend_from_slice(&self.data[i * c + start..i * c + end]);
        }
        Ok(Self {
            shape: vec![self.rows(), w],
            data,
        })
    }

    /// Horizontal concatenation of matrices with equal row counts.
    pub fn concat_cols(parts: &[&Self]) -> Result<Self> {
        let rows = parts.first().map_or(0, |p| p.rows());
        for p in parts {
            p.require_matrix("concat_cols")?;
            if p.rows() != rows {
                return shape_err("concat_cols: row counts differ");
            }
        }
        let cols: usize = parts.iter().map(|p| p.cols()).sum();
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for p in parts {
                data.extend_from_slice(p.row(i));
            }
        }
        Ok(Self {
            shape: vec![rows, cols],
            data,
        })
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Same values in another precision.
    pub fn cast<U: Real>(&self) -> Tensor<U> {
        Tensor {
            shape: self.shape.clone(),
            data: self
                .data
                .iter()
                .map(|v| U::from_f64(v.to_f64().unwrap()).unwrap())
                .collect(),
        }
    }
}

impl<T: fmt::Debug> fmt::Debug for Tensor<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Tensor{:?}", self.shape)?;
        if self.data.len() <= 64 {
            write!(f, " {:?}", self.data)?;
        }
        Ok(())
    }
}
