//! First-order parameter updates.

use crate::error::Result;
use crate::params::ParameterSet;
use crate::scalar::Real;

/// Rescales `grads` in place so their global norm is at most `max_norm`.
/// Returns the norm before clipping.
pub fn clip_global_norm<T: Real>(grads: &mut ParameterSet<T>, max_norm: T) -> T {
    let norm = grads.global_norm();
    if norm > max_norm && norm > T::zero() {
        grads.scale(max_norm / norm);
    }
    norm
}

/// Plain gradient descent `θ ← θ − η∇`.
#[derive(Debug, Clone, Copy)]
pub struct Sgd<T> {
    pub lr: T,
}

impl<T: Real> Sgd<T> {
    pub fn step(&self, params: &mut ParameterSet<T>, grads: &ParameterSet<T>) -> Result<()> {
        if self.lr == T::zero() {
            return Ok(());
        }
        params.axpy(-self.lr, grads)
    }
}

/// Adam with bias correction.
#[derive(Debug, Clone)]
pub struct Adam<T> {
    pub lr: T,
    pub beta1: T,
    pub beta2: T,
    pub eps: T,
    first: Option<ParameterSet<T>>,
    second: Option<ParameterSet<T>>,
    steps: i32,
}

impl<T: Real> Adam<T> {
    pub fn new(lr: T) -> Self {
        Self {
            lr,
            beta1: T::lit(0.9),
            beta2: T::lit(0.999),
            eps: T::lit(1e-8),
            first: None,
            second: None,
            steps: 0,
        }
    }

    pub fn steps(&self) -> i32 {
        self.steps
    }

    pub fn step(&mut self, params: &mut ParameterSet<T>, grads: &ParameterSet<T>) -> Result<()> {
        if self.lr == T::zero() {
            return Ok(());
        }
        let m = self.first.get_or_insert_with(|| grads.zeros_like());
        let v = self.second.get_or_insert_with(|| grads.zeros_like());
        self.steps += 1;
        let bc1 = T::one() - self.beta1.powi(self.steps);
        let bc2 = T::one() - self.beta2.powi(self.steps);
        for (name, p) in params.iter_mut() {
            let (Some(g), Some(mt), Some(vt)) = (grads.get(name), m.get_mut(name), v.get_mut(name))
            else {
                return Err(crate::NumericError::Shape(format!(
                    "parameter {name} has no gradient"
                )));
            };
            for i in 0..p.len() {
                let gi = g.data()[i];
                let mi = self.beta1 * mt.data()[i] + (T::one() - self.beta1) * gi;
                let vi = self.beta2 * vt.data()[i] + (T::one() - self.beta2) * gi * gi;
                mt.data_mut()[i] = mi;
                vt.data_mut()[i] = vi;
                let update = self.lr * (mi / bc1) / ((vi / bc2).sqrt() + self.eps);
                p.data_mut()[i] -= update;
            }
        }
        Ok(())
    }
}
