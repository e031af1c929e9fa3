//! Several padded graphs of equal capacity stacked for one forward pass.

use std::sync::Arc;

use cgrl_core::Tensor64;

use crate::error::{AgentError, Result};
use crate::obs::{normalize_adjacency, GraphObservation, FEATURES};

/// Graphs stacked row-wise: node `i` of graph `g` is row `g * nodes + i`.
/// Per-graph `nodes × nodes` blocks are stored contiguously.
#[derive(Debug, Clone)]
pub struct GraphBatch {
    pub graphs: usize,
    pub nodes: usize,
    pub features: Tensor64,
    /// Symmetric-normalized (weighted) adjacency with self loops.
    pub propagation: Arc<Vec<f64>>,
    /// Additive attention bias: `ln w_ij` on edges, 0 on the diagonal,
    /// `-inf` elsewhere. Absent nodes attend only to themselves.
    pub attention_bias: Arc<Vec<f64>>,
    /// Raw (unweighted) adjacency.
    pub adjacency: Arc<Vec<f64>>,
    pub present: Arc<Vec<bool>>,
    pub counts: Vec<usize>,
}

impl GraphBatch {
    pub fn single(obs: &GraphObservation) -> Result<Self> {
        Self::build(&[(obs, None)])
    }

    /// Stacks observations. The optional tensor reweights each graph's edges
    /// (`A ⊙ W`) for propagation and attention.
    pub fn build(items: &[(&GraphObservation, Option<&Tensor64>)]) -> Result<Self> {
        let Some((first, _)) = items.first() else {
            return Err(AgentError::Domain("empty batch".into()));
        };
        let n = first.capacity();
        let b = items.len();
        let mut features = Vec::with_capacity(b * n * FEATURES);
        let mut propagation = Vec::with_capacity(b * n * n);
        let mut bias = Vec::with_capacity(b * n * n);
        let mut adjacency = Vec::with_capacity(b * n * n);
        let mut present = Vec::with_capacity(b * n);
        let mut counts = Vec::with_capacity(b);
        for (obs, weights) in items {
            if obs.capacity() != n || obs.adjacency.shape() != [n, n] {
                return Err(AgentError::Domain("graphs in a batch must share capacity".into()));
            }
            let a = match weights {
                Some(w) => {
                    if w.shape() != [n, n] {
                        return Err(AgentError::Domain("edge weights must be nodes × nodes".into()));
                    }
                    obs.adjacency.mul(w)?
                }
                None => obs.adjacency.clone(),
            };
            features.extend_from_slice(obs.features.data());
            propagation.extend_from_slice(normalize_adjacency(&a).data());
            adjacency.extend_from_slice(obs.adjacency.data());
            for i in 0..n {
                for j in 0..n {
                    let w = a.get(i, j);
                    bias.push(if i == j {
                        0.0
                    } else if w > 0.0 {
                        w.ln()
                    } else {
                        f64::NEG_INFINITY
                    });
                }
                present.push(obs.present(i));
            }
            counts.push(obs.n_present);
        }
        Ok(Self {
            graphs: b,
            nodes: n,
            features: Tensor64::new([b * n, FEATURES], features)?,
            propagation: Arc::new(propagation),
            attention_bias: Arc::new(bias),
            adjacency: Arc::new(adjacency),
            present: Arc::new(present),
            counts,
        })
    }

    pub fn rows(&self) -> usize {
        self.graphs * self.nodes
    }
}
