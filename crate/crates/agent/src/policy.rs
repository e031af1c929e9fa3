//! Q-network: GCNII×2 → GATv2×2 → masked mean pool → FC×2 → dueling or
//! plain Q head. Architecture flags switch blocks off to form baselines.

use std::sync::Arc;

use cgrl_core::activations::LAYER_NORM_EPS;
use cgrl_core::{Bound, Params64, Tape64, Tensor64, Var64};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::batch::GraphBatch;
use crate::error::{AgentError, Result};
use crate::graph_ops::{block_propagate, dueling, gatv2, masked_mean_pool, Attention};
use crate::obs::{GraphObservation, FEATURES};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArchFlags {
    pub use_gcn: bool,
    pub use_gat: bool,
    pub use_dueling: bool,
    pub use_double: bool,
}

impl Default for ArchFlags {
    fn default() -> Self {
        Self { use_gcn: true, use_gat: true, use_dueling: true, use_double: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PolicyConfig {
    pub hidden_dim: usize,
    pub gat_heads: usize,
    pub gcn2_alpha: f64,
    pub gcn2_lambda: f64,
    pub leaky_slope: f64,
    pub n_actions: usize,
    /// Width of the two fully connected layers after pooling.
    pub fc_dim: usize,
    pub arch_flags: ArchFlags,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        Self {
            hidden_dim: 64,
            gat_heads: 4,
            gcn2_alpha: 0.1,
            gcn2_lambda: 1.0,
            leaky_slope: 0.2,
            n_actions: 3,
            fc_dim: 64,
            arch_flags: ArchFlags::default(),
        }
    }
}

impl PolicyConfig {
    pub fn validate(&self) -> Result<()> {
        let f = &self.arch_flags;
        if !f.use_gcn && !f.use_gat {
            return Err(AgentError::Config("at least one of use_gcn and use_gat must be set".into()));
        }
        if self.n_actions != 3 {
            return Err(AgentError::Config(format!("n_actions must be 3, got {}", self.n_actions)));
        }
        if self.hidden_dim == 0 || self.fc_dim == 0 || self.gat_heads == 0 || !self.hidden_dim.is_multiple_of(self.gat_heads) {
            return Err(AgentError::Config("hidden_dim must be a positive multiple of gat_heads".into()));
        }
        if !(0.0..=1.0).contains(&self.gcn2_alpha) || self.gcn2_lambda < 0.0 || self.leaky_slope < 0.0 {
            return Err(AgentError::Config("gcn2_alpha in [0,1], gcn2_lambda and leaky_slope non-negative".into()));
        }
        Ok(())
    }
}

/// `β_l = ln(λ/l + 1)`.
pub fn gcn2_beta(lambda: f64, layer: usize) -> f64 {
    (lambda / layer as f64 + 1.0).ln()
}

/// Uniform in `±sqrt(6 / (fan_in + fan_out))`.
pub fn glorot<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Tensor64 {
    let limit = (6.0 / (rows + cols) as f64).sqrt();
    Tensor64::from_fn(rows, cols, |_, _| rng.random_range(-limit..limit))
}

pub fn init_params<R: Rng + ?Sized>(config: &PolicyConfig, rng: &mut R) -> Result<Params64> {
    config.validate()?;
    let (h, fc, k) = (config.hidden_dim, config.fc_dim, config.n_actions);
    let flags = config.arch_flags;
    let mut p = Params64::new();
    let dense = |p: &mut Params64, name: &str, i: usize, o: usize, bias: bool, rng: &mut R| {
        p.insert(format!("{name}.w"), glorot(i, o, rng));
        if bias {
            p.insert(format!("{name}.b"), Tensor64::zeros([1, o]));
        }
    };
    if flags.use_gcn {
        dense(&mut p, "embed", FEATURES, h, true, rng);
        dense(&mut p, "gcn1", h, h, false, rng);
        dense(&mut p, "gcn2", h, h, false, rng);
    }
    if flags.use_gat {
        let mut input = if flags.use_gcn { h } else { FEATURES };
        for layer in ["gat1", "gat2"] {
            p.insert(format!("{layer}.wl"), glorot(input, h, rng));
            p.insert(format!("{layer}.wr"), glorot(input, h, rng));
            // One attention vector per head, laid out head-major.
            p.insert(format!("{layer}.att"), glorot(config.gat_heads, h / config.gat_heads, rng).reshape([1, h])?);
            input = h;
        }
    }
    dense(&mut p, "fc1", h, fc, true, rng);
    dense(&mut p, "fc2", fc, fc, true, rng);
    if flags.use_dueling {
        dense(&mut p, "value", fc, 1, true, rng);
        dense(&mut p, "adv", fc, k, true, rng);
    } else {
        dense(&mut p, "q", fc, k, true, rng);
    }
    Ok(p)
}

/// `((1−α)Ãx + αx⁰)((1−β)I + βW)`.
pub fn gcn2_layer<'t>(x: Var64<'t>, x0: Var64<'t>, w: Var64<'t>, batch: &GraphBatch, alpha: f64, beta: f64) -> Result<Var64<'t>> {
    let h = block_propagate(x, &batch.propagation, batch.graphs, batch.nodes)?
        .scale(1.0 - alpha)
        .add(x0.scale(alpha))?;
    Ok(h.scale(1.0 - beta).add(h.matmul(w)?.scale(beta))?)
}

/// Multi-head GATv2 layer with concatenated heads, before any activation.
pub fn gatv2_layer<'t>(
    x: Var64<'t>,
    bound: &Bound<'t, f64>,
    prefix: &str,
    batch: &GraphBatch,
    heads: usize,
    slope: f64,
) -> Result<(Var64<'t>, Attention)> {
    let hl = x.matmul(bound.get(&format!("{prefix}.wl"))?)?;
    let hr = x.matmul(bound.get(&format!("{prefix}.wr"))?)?;
    let att = bound.get(&format!("{prefix}.att"))?;
    gatv2(hl, hr, att, &batch.attention_bias, batch.graphs, batch.nodes, heads, slope)
}

fn dense<'t>(x: Var64<'t>, bound: &Bound<'t, f64>, name: &str) -> Result<Var64<'t>> {
    Ok(x.matmul(bound.get(&format!("{name}.w"))?)?.add_row(bound.get(&format!("{name}.b"))?)?)
}

/// Pool mask: present rows, or every row of a graph that has none (keeps
/// the network total on degenerate all-zero inputs).
fn pool_mask(batch: &GraphBatch) -> Arc<Vec<bool>> {
    let n = batch.nodes;
    let mut mask = (*batch.present).clone();
    for g in 0..batch.graphs {
        let block = &mut mask[g * n..(g + 1) * n];
        if !block.iter().any(|&p| p) {
            block.fill(true);
        }
    }
    Arc::new(mask)
}

/// Q-values for every graph in the batch: `graphs × n_actions`.
pub fn forward<'t>(config: &PolicyConfig, bound: &Bound<'t, f64>, batch: &GraphBatch) -> Result<Var64<'t>> {
    let tape = bound.get("fc1.w")?.tape();
    let flags = config.arch_flags;
    let mut x = tape.constant(batch.features.clone());
    if flags.use_gcn {
        let x0 = dense(x, bound, "embed")?.relu();
        let b1 = gcn2_beta(config.gcn2_lambda, 1);
        x = gcn2_layer(x0, x0, bound.get("gcn1.w")?, batch, config.gcn2_alpha, b1)?
            .relu()
            .layer_norm_rows(LAYER_NORM_EPS);
        let b2 = gcn2_beta(config.gcn2_lambda, 2);
        x = gcn2_layer(x, x0, bound.get("gcn2.w")?, batch, config.gcn2_alpha, b2)?.relu();
    }
    if flags.use_gat {
        let (h, _) = gatv2_layer(x, bound, "gat1", batch, config.gat_heads, config.leaky_slope)?;
        x = h.relu().layer_norm_rows(LAYER_NORM_EPS);
        x = gatv2_layer(x, bound, "gat2", batch, config.gat_heads, config.leaky_slope)?.0;
    }
    let pooled = masked_mean_pool(x, &pool_mask(batch), batch.graphs, batch.nodes)?;
    let h = dense(pooled, bound, "fc1")?.relu();
    let h = dense(h, bound, "fc2")?.relu();
    if flags.use_dueling {
        dueling(dense(h, bound, "value")?, dense(h, bound, "adv")?)
    } else {
        dense(h, bound, "q")
    }
}

/// Inference-only Q-values, one row per graph.
pub fn q_values_batch(config: &PolicyConfig, params: &Params64, batch: &GraphBatch) -> Result<Tensor64> {
    let tape = Tape64::new();
    let bound = tape.bind_frozen(params);
    Ok((*forward(config, &bound, batch)?.value()).clone())
}

pub fn q_values(config: &PolicyConfig, params: &Params64, obs: &GraphObservation, weights: Option<&Tensor64>) -> Result<Vec<f64>> {
    let batch = GraphBatch::build(&[(obs, weights)])?;
    Ok(q_values_batch(config, params, &batch)?.into_data())
}
