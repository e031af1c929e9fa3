//! Symmetric eigendecomposition by cyclic Jacobi rotations.

use crate::error::{NumericError, Result};
use crate::scalar::Real;
use crate::tensor::Tensor;

/// Maximum number of full Jacobi sweeps before giving up.
pub const MAX_SWEEPS: usize = 100;

/// Eigenvalues below this are treated as exact zeros by spectral consumers.
pub const EIGEN_FLOOR: f64 = 1e-12;

/// Eigenpairs of a real symmetric matrix.
#[derive(Debug, Clone)]
pub struct SymmetricEigen<T> {
    /// Ascending eigenvalues, rank-1 tensor of length n.
    pub values: Tensor<T>,
    /// Orthonormal eigenvectors stored as the columns of an n x n matrix.
    pub vectors: Tensor<T>,
}

impl<T: Real> SymmetricEigen<T> {
    /// Eigenvalues with everything below [`EIGEN_FLOOR`] set to zero.
    pub fn clamped_values(&self) -> Vec<T> {
        let floor = T::lit(EIGEN_FLOOR);
        self.values
            .data()
            .iter()
            .map(|&v| if v < floor { T::zero() } else { v })
            .collect()
    }

    /// `V diag(values) Vᵀ` for an arbitrary diagonal.
    pub fn recompose_with(&self, diag: &[T]) -> Tensor<T> {
        let n = diag.len();
        let v = self.vectors.data();
        let mut out = vec![T::zero(); n * n];
        for i in 0..n {
            for j in 0..=i {
                let mut acc = T::zero();
                for k in 0..n {
                    acc += v[i * n + k] * diag[k] * v[j * n + k];
                }
                out[i * n + j] = acc;
                out[j * n + i] = acc;
            }
        }
        Tensor::from_parts([n, n], out)
    }

    pub fn recompose(&self) -> Tensor<T> {
        self.recompose_with(self.values.data())
    }
}

/// Eigendecomposition of a symmetric matrix.
///
/// Rejects inputs whose asymmetry exceeds `1e-9` (scaled by the largest
/// entry when that exceeds one). Sweeps stop once the off-diagonal Frobenius
/// norm falls below `1e-12` of the full norm.
pub fn eigh_sym<T: Real>(m: &Tensor<T>) -> Result<SymmetricEigen<T>> {
    m.require_square("eigh_sym")?;
    let n = m.rows();
    let scale = m.max_abs().max(T::one());
    if !m.is_symmetric(T::lit(1e-9) * scale) {
        return Err(NumericError::Domain(
            "eigh_sym requires a symmetric matrix".into(),
        ));
    }
    let mut a = m.data().to_vec();
    // Symmetrize exactly so rotations see a consistent matrix.
    for i in 0..n {
        for j in 0..i {
            let avg = (a[i * n + j] + a[j * n + i]) * T::lit(0.5);
            a[i * n + j] = avg;
            a[j * n + i] = avg;
        }
    }
    // Rows of `vt` are the eigenvectors, so every update touches contiguous memory.
    let mut vt = Tensor::<T>::eye(n).into_data();

    let total: T = a.iter().map(|&x| x * x).sum::<T>().sqrt();
    let tol = T::solver_tolerance() * total;
    let off_norm = |a: &[T]| -> T {
        let mut s = T::zero();
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    s += a[i * n + j] * a[i * n + j];
                }
            }
        }
        s.sqrt()
    };

    let mut row_p = vec![T::zero(); n];
    let mut row_q = vec![T::zero(); n];
    let mut converged = total == T::zero() || off_norm(&a) <= tol;
    let mut sweeps = 0;
    while !converged && sweeps < MAX_SWEEPS {
        sweeps += 1;
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq == T::zero() {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let theta = (aqq - app) / (T::lit(2.0) * apq);
                let sign = if theta >= T::zero() { T::one() } else { -T::one() };
                let t = sign / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;

                for r in 0..n {
                    let arp = a[p * n + r];
                    let arq = a[q * n + r];
                    row_p[r] = c * arp - s * arq;
                    row_q[r] = s * arp + c * arq;
                }
                row_p[p] = app - t * apq;
                row_q[q] = aqq + t * apq;
                row_p[q] = T::zero();
                row_q[p] = T::zero();
                a[p * n..(p + 1) * n].copy_from_slice(&row_p);
                a[q * n..(q + 1) * n].copy_from_slice(&row_q);
                for r in 0..n {
                    a[r * n + p] = row_p[r];
                    a[r * n + q] = row_q[r];
                }
                for r in 0..n {
                    let vp = vt[p * n + r];
                    let vq = vt[q * n + r];
                    vt[p * n + r] = c * vp - s * vq;
                    vt[q * n + r] = s * vp + c * vq;
                }
            }
        }
        converged = off_norm(&a) <= tol;
    }
    if !converged {
        return Err(NumericError::Convergence {
            sweeps,
            residual: off_norm(&a).to_f64().unwrap_or(f64::NAN),
        });
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[i * n + i].partial_cmp(&a[j * n + j]).unwrap());
    let values: Vec<T> = order.iter().map(|&i| a[i * n + i]).collect();
    let mut vectors = vec![T::zero(); n * n];
    for (new_col, &old_col) in order.iter().enumerate() {
        for r in 0..n {
            vectors[r * n + new_col] = vt[old_col * n + r];
        }
    }
    Ok(SymmetricEigen {
        values: Tensor::from_parts([n], values),
        vectors: Tensor::from_parts([n, n], vectors),
    })
}
