//! Central finite differences, the reference every analytic gradient in the
//! workspace is checked against.

use crate::scalar::Real;
use crate::tensor::Tensor;

/// Numerical gradient of `f` with respect to `inputs[k]` by central
/// differences with step `h`.
pub fn finite_difference<T, F>(inputs: &[Tensor<T>], k: usize, h: T, f: F) -> Tensor<T>
where
    T: Real,
    F: Fn(&[Tensor<T>]) -> T,
{
    let mut work = inputs.to_vec();
    let mut out = Tensor::zeros(inputs[k].shape().to_vec());
    for idx in 0..inputs[k].len() {
        let orig = work[k].data()[idx];
        work[k].data_mut()[idx] = orig + h;
        let up = f(&work);
        work[k].data_mut()[idx] = orig - h;
        let down = f(&work);
        work[k].data_mut()[idx] = orig;
        out.data_mut()[idx] = (up - down) / (h + h);
    }
    out
}

/// Relative error `‖a − n‖ / max(‖a‖, ‖n‖, 1e-6)`.
pub fn check_gradient<T: Real>(analytic: &Tensor<T>, numeric: &Tensor<T>) -> T {
    let diff: T = analytic
        .data()
        .iter()
        .zip(numeric.data())
        .map(|(&a, &n)| (a - n) * (a - n))
        .sum::<T>()
        .sqrt();
    let scale = analytic
        .norm_sq()
        .sqrt()
        .max(numeric.norm_sq().sqrt())
        .max(T::lit(1e-6));
    diff / scale
}
