//! Matrix-based Rényi α-order entropy and the mutual-information estimators
//! built on it.
//!
//! A batch of `B` samples is mapped to a Gaussian Gram matrix normalised to
//! unit trace. Its eigenvalues behave like a probability spectrum, and
//! `S_α = log₂(Σ λᵢ^α) / (1 − α)` measures the spread of that spectrum.
//! Joint entropy of several variables uses the trace-normalised elementwise
//! product of their Gram matrices. Every quantity is in bits.
//!
//! Each estimator has a plain-tensor form and a tape form; the tape forms
//! differentiate through the eigendecomposition via `dλᵢ = vᵢᵀ dK vᵢ` and
//! through the median kernel width.

use std::sync::Arc;

use crate::eigen::{eigh_sym, EIGEN_FLOOR};
use crate::error::{shape_err, NumericError, Result};
use crate::scalar::Real;
use crate::tape::Var;
use crate::tensor::Tensor;

/// How the Gaussian kernel width is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelWidth {
    /// Median pairwise Euclidean distance; 1.0 when that median is zero.
    Median,
    Fixed(f64),
}

/// Unit-trace Gram matrix plus the width it was built with.
#[derive(Debug, Clone)]
pub struct GramMatrix<T> {
    pub matrix: Tensor<T>,
    pub width: T,
}

fn pairwise_sq_dists<T: Real>(u: &Tensor<T>) -> Vec<T> {
    let b = u.rows();
    let mut d2 = vec![T::zero(); b * b];
    for i in 0..b {
        for j in (i + 1)..b {
            let s: T = u
                .row(i)
                .iter()
                .zip(u.row(j))
                .map(|(&x, &y)| (x - y) * (x - y))
                .sum();
            d2[i * b + j] = s;
            d2[j * b + i] = s;
        }
    }
    d2
}

/// Pairs `(i, j)` with `i < j` whose distances define the median, and the
/// median itself.
fn median_pairs<T: Real>(d2: &[T], b: usize) -> (Vec<(usize, usize)>, T) {
    let mut pairs: Vec<(T, usize, usize)> = Vec::with_capacity(b * (b - 1) / 2);
    for i in 0..b {
        for j in (i + 1)..b {
            pairs.push((d2[i * b + j].sqrt(), i, j));
        }
    }
    pairs.sort_by(|a, c| a.0.partial_cmp(&c.0).unwrap());
    let p = pairs.len();
    if p % 2 == 1 {
        let m = pairs[p / 2];
        (vec![(m.1, m.2)], m.0)
    } else {
        let (lo, hi) = (pairs[p / 2 - 1], pairs[p / 2]);
        (vec![(lo.1, lo.2), (hi.1, hi.2)], (lo.0 + hi.0) * T::lit(0.5))
    }
}

fn resolve_width<T: Real>(d2: &[T], b: usize, width: KernelWidth) -> (T, Vec<(usize, usize)>) {
    match width {
        KernelWidth::Fixed(w) => (T::lit(w), Vec::new()),
        KernelWidth::Median => {
            let (pairs, m) = median_pairs(d2, b);
            if m > T::zero() {
                (m, pairs)
            } else {
                (T::one(), Vec::new())
            }
        }
    }
}

/// Gaussian Gram matrix of the rows of `samples`, normalised to unit trace.
pub fn gram<T: Real>(samples: &Tensor<T>, width: KernelWidth) -> Result<GramMatrix<T>> {
    samples.require_matrix("gram")?;
    let b = samples.rows();
    if b < 2 {
        return Err(NumericError::Domain(format!(
            "gram needs at least 2 samples, got {b}"
        )));
    }
    let d2 = pairwise_sq_dists(samples);
    let (sigma, _) = resolve_width(&d2, b, width);
    let denom = T::lit(2.0) * sigma * sigma;
    let bt = T::from_usize(b).unwrap();
    let data = d2.iter().map(|&v| (-v / denom).exp() / bt).collect();
    Ok(GramMatrix {
        matrix: Tensor::from_parts([b, b], data),
        width: sigma,
    })
}

/// Rényi entropy in bits of a probability spectrum. Values below the
/// eigenvalue floor count as zero; `α = 1` takes the Shannon limit.
pub fn spectrum_entropy<T: Real>(eigenvalues: &[T], alpha: T) -> Result<T> {
    if !(alpha > T::zero()) {
        return Err(NumericError::Domain(format!("Rényi order must be positive, got {alpha}")));
    }
    let floor = T::lit(EIGEN_FLOOR);
    let ln2 = T::lit(std::f64::consts::LN_2);
    let positive = eigenvalues.iter().copied().filter(|&l| l >= floor);
    if alpha == T::one() {
        return Ok(-positive.map(|l| l * l.ln()).sum::<T>() / ln2);
    }
    let power: T = positive.map(|l| l.powf(alpha)).sum();
    Ok(power.ln() / ln2 / (T::one() - alpha))
}

/// `S_α(K)` for a unit-trace positive semidefinite matrix.
///
/// For `α = 2` the spectrum sum is `tr(K²) = ‖K‖²_F`, which skips the
/// eigensolver; other orders go through [`eigh_sym`].
pub fn renyi_entropy<T: Real>(k: &Tensor<T>, alpha: T) -> Result<T> {
    if alpha == T::lit(2.0) {
        k.require_square("renyi_entropy")?;
        if !k.is_symmetric(T::lit(1e-9) * k.max_abs().max(T::one())) {
            return Err(NumericError::Domain("renyi_entropy requires a symmetric matrix".into()));
        }
        let ln2 = T::lit(std::f64::consts::LN_2);
        return Ok(-k.norm_sq().ln() / ln2);
    }
    let eig = eigh_sym(k)?;
    spectrum_entropy(eig.values.data(), alpha)
}

/// Elementwise product of equally sized matrices rescaled to unit trace.
pub fn hadamard_normalized<T: Real>(grams: &[&Tensor<T>]) -> Result<Tensor<T>> {
    let Some((first, rest)) = grams.split_first() else {
        return shape_err("joint entropy needs at least one Gram matrix");
    };
    first.require_square("joint entropy")?;
    let mut acc = (*first).clone();
    for g in rest {
        acc = acc.mul(g)?;
    }
    let tr = acc.trace()?;
    if !(tr > T::zero()) {
        return Err(NumericError::Domain("joint Gram matrix has zero trace".into()));
    }
    Ok(acc.scale(T::one() / tr))
}

/// Joint entropy of the variables whose Gram matrices are given.
pub fn joint_entropy<T: Real>(grams: &[&Tensor<T>], alpha: T) -> Result<T> {
    renyi_entropy(&hadamard_normalized(grams)?, alpha)
}

fn require_batch<T: Real>(parts: &[&Tensor<T>]) -> Result<usize> {
    let b = parts[0].rows();
    if parts.iter().any(|p| p.rows() != b) {
        return shape_err("all variables need the same number of samples");
    }
    Ok(b)
}

/// `I_α(u; v) = S_α(u) + S_α(v) − S_α(u, v)` with median-width kernels.
pub fn mutual_information<T: Real>(u: &Tensor<T>, v: &Tensor<T>, alpha: T) -> Result<T> {
    require_batch(&[u, v])?;
    let ku = gram(u, KernelWidth::Median)?.matrix;
    let kv = gram(v, KernelWidth::Median)?.matrix;
    Ok(renyi_entropy(&ku, alpha)? + renyi_entropy(&kv, alpha)?
        - joint_entropy(&[&ku, &kv], alpha)?)
}

/// `I_α(x; y | z) = S_α(x,z) + S_α(y,z) − S_α(z) − S_α(x,y,z)`.
pub fn conditional_mi<T: Real>(x: &Tensor<T>, y: &Tensor<T>, z: &Tensor<T>, alpha: T) -> Result<T> {
    require_batch(&[x, y, z])?;
    let kx = gram(x, KernelWidth::Median)?.matrix;
    let ky = gram(y, KernelWidth::Median)?.matrix;
    let kz = gram(z, KernelWidth::Median)?.matrix;
    Ok(joint_entropy(&[&kx, &kz], alpha)? + joint_entropy(&[&ky, &kz], alpha)?
        - renyi_entropy(&kz, alpha)?
        - joint_entropy(&[&kx, &ky, &kz], alpha)?)
}

impl<'t, T: Real> Var<'t, T> {
    /// Differentiable [`gram`] with the median width rule. Gradients flow
    /// through the kernel and through the median distance itself.
    pub fn gram_median(self) -> Result<Var<'t, T>> {
        let u = self.value();
        u.require_matrix("gram")?;
        let b = u.rows();
        if b < 2 {
            return Err(NumericError::Domain(format!(
                "gram needs at least 2 samples, got {b}"
            )));
        }
        let d2 = pairwise_sq_dists(&u);
        let (sigma, median) = resolve_width(&d2, b, KernelWidth::Median);
        let bt = T::from_usize(b).unwrap();
        let two = T::lit(2.0);
        let k: Vec<T> = d2.iter().map(|&v| (-v / (two * sigma * sigma)).exp()).collect();
        let out = Tensor::from_parts([b, b], k.iter().map(|&v| v / bt).collect());
        Ok(self.tape().record(&[self], out, move |g| {
            let d = u.cols();
            let mut gd2 = vec![T::zero(); b * b];
            let mut gsigma = T::zero();
            for idx in 0..b * b {
                let gk = g.data()[idx] / bt;
                gd2[idx] = -gk * k[idx] / (two * sigma * sigma);
                gsigma += gk * k[idx] * d2[idx] / (sigma * sigma * sigma);
            }
            let mut gu = Tensor::zeros([b, d]);
            let count = T::from_usize(median.len().max(1)).unwrap();
            for &(p, q) in &median {
                let dist = d2[p * b + q].sqrt();
                if dist > T::zero() {
                    // dσ/dD2_pq = 1 / (2 d_pq) per selected pair.
                    gd2[p * b + q] += gsigma / (count * two * dist);
                }
            }
            for i in 0..b {
                for j in 0..b {
                    let w = gd2[i * b + j];
                    if i == j || w == T::zero() {
                        continue;
                    }
                    for c in 0..d {
                        let diff = u.get(i, c) - u.get(j, c);
                        gu.data_mut()[i * d + c] += two * w * diff;
                        gu.data_mut()[j * d + c] -= two * w * diff;
                    }
                }
            }
            vec![Some(gu)]
        }))
    }

    /// `K / tr(K)`.
    pub fn trace_normalize(self) -> Result<Var<'t, T>> {
        let x = self.value();
        let tr = x.trace()?;
        if !(tr > T::zero()) {
            return Err(NumericError::Domain("cannot normalise a zero-trace matrix".into()));
        }
        let out = x.scale(T::one() / tr);
        Ok(self.tape().record(&[self], out, move |g| {
            let n = x.rows();
            let inner: T = g.data().iter().zip(x.data()).map(|(&a, &b)| a * b).sum();
            let mut gx = g.scale(T::one() / tr);
            for i in 0..n {
                gx.data_mut()[i * n + i] -= inner / (tr * tr);
            }
            vec![Some(gx)]
        }))
    }

    /// Differentiable [`renyi_entropy`] of a unit-trace PSD matrix.
    pub fn renyi_entropy(self, alpha: T) -> Result<Var<'t, T>> {
        let k = self.value();
        let eig = eigh_sym(&k)?;
        let lambdas = eig.clamped_values();
        let value = spectrum_entropy(&lambdas, alpha)?;
        let ln2 = T::lit(std::f64::consts::LN_2);
        let dlambda: Vec<T> = if alpha == T::one() {
            lambdas
                .iter()
                .map(|&l| if l > T::zero() { -(l.ln() + T::one()) / ln2 } else { T::zero() })
                .collect()
        } else {
            let power: T = lambdas
                .iter()
                .filter(|&&l| l > T::zero())
                .map(|&l| l.powf(alpha))
                .sum();
            let c = alpha / ((T::one() - alpha) * ln2 * power);
            lambdas
                .iter()
                .map(|&l| if l > T::zero() { c * l.powf(alpha - T::one()) } else { T::zero() })
                .collect()
        };
        let eig = Arc::new(eig);
        Ok(self
            .tape()
            .record(&[self], Tensor::scalar(value), move |g| {
                let scale = g.data()[0];
                let diag: Vec<T> = dlambda.iter().map(|&d| d * scale).collect();
                vec![Some(eig.recompose_with(&diag))]
            }))
    }
}

/// Differentiable joint entropy of several tape Gram matrices.
pub fn joint_entropy_var<'t, T: Real>(grams: &[Var<'t, T>], alpha: T) -> Result<Var<'t, T>> {
    let Some((&first, rest)) = grams.split_first() else {
        return shape_err("joint entropy needs at least one Gram matrix");
    };
    let mut acc = first;
    for &g in rest {
        acc = acc.mul(g)?;
    }
    acc.trace_normalize()?.renyi_entropy(alpha)
}
