//! Reverse-mode differentiation over dense tensors.
//!
//! A [`Tape`] records every operation of one forward pass. Calling
//! [`Tape::backward`] on a scalar result walks the record in reverse and
//! accumulates gradients. Tapes are rebuilt for every pass; nothing is cached
//! between passes, so replaying the same computation on a fresh tape yields
//! bit-identical gradients.

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::sync::Arc;

use crate::error::{NumericError, Result};
use crate::params::ParameterSet;
use crate::scalar::Real;
use crate::tensor::Tensor;

/// Vector-Jacobian product of one recorded operation: maps the gradient of
/// the output to gradients for each parent (`None` means "no contribution").
pub type BackwardFn<T> = Box<dyn Fn(&Tensor<T>) -> Vec<Option<Tensor<T>>> + Send>;

struct Node<T> {
    value: Arc<Tensor<T>>,
    parents: Vec<usize>,
    backward: Option<BackwardFn<T>>,
    requires_grad: bool,
}

/// Recorded operation graph for a single forward pass.
///
/// A tape is movable between threads but never shared concurrently.
pub struct Tape<T> {
    nodes: RefCell<Vec<Node<T>>>,
}

/// Handle to a value recorded on a tape.
#[derive(Clone, Copy)]
pub struct Var<'t, T> {
    tape: &'t Tape<T>,
    id: usize,
}

impl<T: Real> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Real> Tape<T> {
    pub fn new() -> Self {
        Self {
            nodes: RefCell::new(Vec::new()),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn push(&self, node: Node<T>) -> Var<'_, T> {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(node);
        Var {
            tape: self,
            id: nodes.len() - 1,
        }
    }

    /// Leaf that gradients flow into.
    pub fn param(&self, value: Tensor<T>) -> Var<'_, T> {
        self.push(Node {
            value: Arc::new(value),
            parents: Vec::new(),
            backward: None,
            requires_grad: true,
        })
    }

    /// Leaf excluded from differentiation.
    pub fn constant(&self, value: Tensor<T>) -> Var<'_, T> {
        self.push(Node {
            value: Arc::new(value),
            parents: Vec::new(),
            backward: None,
            requires_grad: false,
        })
    }

    pub fn scalar(&self, value: T) -> Var<'_, T> {
        self.constant(Tensor::scalar(value))
    }

    /// Records a custom operation. `backward` receives the output gradient
    /// and must return one entry per parent, in order. It is dropped when no
    /// parent needs a gradient.
    pub fn record<'t, F>(&'t self, parents: &[Var<'t, T>], value: Tensor<T>, backward: F) -> Var<'t, T>
    where
        F: Fn(&Tensor<T>) -> Vec<Option<Tensor<T>>> + Send + 'static,
    {
        let requires_grad = {
            let nodes = self.nodes.borrow();
            parents.iter().any(|p| nodes[p.id].requires_grad)
        };
        self.push(Node {
            value: Arc::new(value),
            parents: parents.iter().map(|p| p.id).collect(),
            backward: if requires_grad {
                Some(Box::new(backward))
            } else {
                None
            },
            requires_grad,
        })
    }

    fn value_of(&self, id: usize) -> Arc<Tensor<T>> {
        Arc::clone(&self.nodes.borrow()[id].value)
    }

    /// Gradients of a scalar `loss` with respect to every recorded node.
    pub fn backward(&self, loss: Var<'_, T>) -> Result<Gradients<T>> {
        let nodes = self.nodes.borrow();
        let seed_shape = nodes[loss.id].value.shape().to_vec();
        if nodes[loss.id].value.len() != 1 {
            return Err(NumericError::Shape(format!(
                "backward needs a scalar loss, got shape {seed_shape:?}"
            )));
        }
        let mut grads: Vec<Option<Tensor<T>>> = (0..nodes.len()).map(|_| None).collect();
        grads[loss.id] = Some(Tensor::ones(seed_shape));
        for id in (0..=loss.id).rev() {
            let Some(g) = grads[id].take() else { continue };
            let node = &nodes[id];
            if let Some(back) = &node.backward {
                let parent_grads = back(&g);
                debug_assert_eq!(parent_grads.len(), node.parents.len());
                for (&pid, pg) in node.parents.iter().zip(parent_grads) {
                    let Some(pg) = pg else { continue };
                    if !nodes[pid].requires_grad {
                        continue;
                    }
                    match &mut grads[pid] {
                        Some(acc) => acc.axpy(T::one(), &pg)?,
                        slot @ None => *slot = Some(pg),
                    }
                }
            }
            grads[id] = Some(g);
        }
        Ok(Gradients { grads })
    }

    /// Binds every tensor of `params` as a differentiable leaf.
    pub fn bind<'t>(&'t self, params: &ParameterSet<T>) -> Bound<'t, T> {
        Bound {
            vars: params
                .iter()
                .map(|(k, v)| (k.to_string(), self.param(v.clone())))
                .collect(),
        }
    }

    /// Binds `params` as constants (inference only).
    pub fn bind_frozen<'t>(&'t self, params: &ParameterSet<T>) -> Bound<'t, T> {
        Bound {
            vars: params
                .iter()
                .map(|(k, v)| (k.to_string(), self.constant(v.clone())))
                .collect(),
        }
    }

    /// `∂loss/∂θ` for every bound parameter; parameters the loss does not
    /// depend on receive zero tensors.
    pub fn grad(&self, loss: Var<'_, T>, bound: &Bound<'_, T>) -> Result<ParameterSet<T>> {
        let grads = self.backward(loss)?;
        Ok(bound
            .vars
            .iter()
            .map(|(name, var)| {
                let g = grads
                    .wrt(*var)
                    .cloned()
                    .unwrap_or_else(|| Tensor::zeros(var.value().shape().to_vec()));
                (name.clone(), g)
            })
            .collect())
    }
}

/// Output of [`Tape::backward`].
pub struct Gradients<T> {
    grads: Vec<Option<Tensor<T>>>,
}

impl<T: Real> Gradients<T> {
    pub fn wrt(&self, var: Var<'_, T>) -> Option<&Tensor<T>> {
        self.grads.get(var.id).and_then(Option::as_ref)
    }
}

/// Parameter names bound to tape leaves.
pub struct Bound<'t, T> {
    vars: BTreeMap<String, Var<'t, T>>,
}

impl<'t, T: Real> Bound<'t, T> {
    pub fn get(&self, name: &str) -> Result<Var<'t, T>> {
        self.vars
            .get(name)
            .copied()
            .ok_or_else(|| NumericError::Domain(format!("unbound parameter {name}")))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.vars.keys().map(String::as_str)
    }
}

impl<'t, T: Real> Var<'t, T> {
    pub fn tape(&self) -> &'t Tape<T> {
        self.tape
    }

    pub fn id(&self) -> usize {
        self.id
    }

    /// Shared handle to the recorded value.
    pub fn value(&self) -> Arc<Tensor<T>> {
        self.tape.value_of(self.id)
    }

    pub fn shape(&self) -> Vec<usize> {
        self.tape.nodes.borrow()[self.id].value.shape().to_vec()
    }

    pub fn item(&self) -> Result<T> {
        self.value().item()
    }

    pub fn requires_grad(&self) -> bool {
        self.tape.nodes.borrow()[self.id].requires_grad
    }
}
