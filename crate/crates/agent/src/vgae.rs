//! Variational graph autoencoder with a causal/spurious latent split and
//! the entropy-based disentanglement objective.

use cgrl_core::{
    gram, joint_entropy_var, sigmoid_scalar, Adam, Bound, KernelWidth, Params64, Tape64, Tensor64, Var64,
};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::batch::GraphBatch;
use crate::error::{AgentError, Result};
use crate::graph_ops::{block_outer, block_propagate, masked_mean_pool, weighted_bce_with_logits};
use crate::obs::{GraphObservation, FEATURES};
use crate::policy::glorot;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CdrlConfig {
    pub alpha: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub lr: f64,
    pub batch_size: usize,
    pub hidden_dim: usize,
    pub latent_dim: usize,
}

impl Default for CdrlConfig {
    fn default() -> Self {
        Self { alpha: 2.0, lambda1: 1.0, lambda2: 0.1, lr: 1e-3, batch_size: 64, hidden_dim: 32, latent_dim: 16 }
    }
}

impl CdrlConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0) || self.alpha == 1.0 {
            return Err(AgentError::Config(format!("alpha must be positive and not 1, got {}", self.alpha)));
        }
        if self.lambda1 < 0.0 || self.lambda2 < 0.0 || self.lr < 0.0 {
            return Err(AgentError::Config("lambda1, lambda2 and lr must be non-negative".into()));
        }
        if self.latent_dim == 0 || !self.latent_dim.is_multiple_of(2) {
            return Err(AgentError::Config(format!("latent_dim must be even and positive, got {}", self.latent_dim)));
        }
        if self.batch_size < 2 || self.hidden_dim == 0 {
            return Err(AgentError::Config("batch_size ≥ 2 and hidden_dim > 0 required".into()));
        }
        Ok(())
    }
}

pub fn init_vgae<R: Rng + ?Sized>(config: &CdrlConfig, rng: &mut R) -> Result<Params64> {
    config.validate()?;
    let mut p = Params64::new();
    p.insert("w0", glorot(FEATURES, config.hidden_dim, rng));
    p.insert("w1", glorot(config.hidden_dim, config.latent_dim, rng));
    Ok(p)
}

/// Standard-normal noise of the latent shape.
pub fn sample_noise<R: Rng + ?Sized>(rows: usize, latent: usize, rng: &mut R) -> Tensor64 {
    Tensor64::from_fn(rows, latent, |_, _| rng.sample(StandardNormal))
}

pub struct Encoded<'t> {
    pub mu: Var64<'t>,
    /// Shares `W₁` with `mu`, so the two are the same value.
    pub logvar: Var64<'t>,
    pub z: Var64<'t>,
}

/// `μ = logσ² = Ã ReLU(Ã F W₀) W₁`, `Z = μ + exp(logσ²/2) ⊙ ζ`. Passing no
/// noise gives `Z = μ`.
pub fn encode<'t>(bound: &Bound<'t, f64>, batch: &GraphBatch, noise: Option<&Tensor64>) -> Result<Encoded<'t>> {
    let w0 = bound.get("w0")?;
    let tape = w0.tape();
    let f = tape.constant(batch.features.clone());
    let (g, n) = (batch.graphs, batch.nodes);
    let fbar = block_propagate(f, &batch.propagation, g, n)?.matmul(w0)?.relu();
    let mu = block_propagate(fbar.matmul(bound.get("w1")?)?, &batch.propagation, g, n)?;
    let logvar = mu;
    let z = match noise {
        Some(zeta) => {
            if zeta.shape() != mu.shape().as_slice() {
                return Err(AgentError::Domain("noise must match the latent shape".into()));
            }
            mu.add(logvar.scale(0.5).exp().mul(tape.constant(zeta.clone()))?)?
        }
        None => mu,
    };
    Ok(Encoded { mu, logvar, z })
}

/// `sigmoid(Z Zᵀ)`.
pub fn decode_edges(z: &Tensor64) -> Result<Tensor64> {
    Ok(z.matmul_ex(false, z, true)?.map(sigmoid_scalar))
}

/// `KL(N(μ, e^{logσ²}) ‖ N(0, 1))` summed over entries, in nats.
pub fn gaussian_kl(mu: &[f64], logvar: &[f64]) -> f64 {
    mu.iter().zip(logvar).map(|(&m, &lv)| 0.5 * (m * m + lv.exp() - 1.0 - lv)).sum()
}

/// Labels `A + I` and weights for present pairs. Positive pairs are
/// reweighted by `#neg / #pos` per graph; each graph is scaled by
/// `1 / (n² · graphs)`.
fn reconstruction_targets(batch: &GraphBatch) -> Result<(Tensor64, Tensor64)> {
    let (g, n) = (batch.graphs, batch.nodes);
    let mut labels = vec![0.0; g * n * n];
    let mut weights = vec![0.0; g * n * n];
    for b in 0..g {
        let idx: Vec<usize> = (0..n).filter(|&i| batch.present[b * n + i]).collect();
        let m = idx.len();
        if m == 0 {
            continue;
        }
        let mut pos = 0usize;
        for &i in &idx {
            for &j in &idx {
                let y = if i == j { 1.0 } else { batch.adjacency[(b * n + i) * n + j] };
                labels[(b * n + i) * n + j] = y;
                pos += (y > 0.0) as usize;
            }
        }
        let neg = m * m - pos;
        let pos_weight = if neg == 0 { 1.0 } else { neg as f64 / pos as f64 };
        let norm = 1.0 / ((m * m) as f64 * g as f64);
        for &i in &idx {
            for &j in &idx {
                let k = (b * n + i) * n + j;
                weights[k] = norm * if labels[k] > 0.0 { pos_weight } else { 1.0 };
            }
        }
    }
    Ok((Tensor64::new([g * n, n], labels)?, Tensor64::new([g * n, n], weights)?))
}

/// Per-row KL weights: `1 / (n² · graphs)` on present rows.
fn kl_weights(batch: &GraphBatch, latent: usize) -> Result<Tensor64> {
    let n = batch.nodes;
    let mut w = vec![0.0; batch.rows() * latent];
    for b in 0..batch.graphs {
        let m = batch.counts[b].max(1) as f64;
        for i in 0..n {
            if batch.present[b * n + i] {
                w[(b * n + i) * latent..(b * n + i + 1) * latent].fill(1.0 / (m * m * batch.graphs as f64));
            }
        }
    }
    Ok(Tensor64::new([batch.rows(), latent], w)?)
}

pub struct ElboTerms<'t> {
    pub loss: Var64<'t>,
    pub reconstruction: f64,
    pub kl: f64,
}

/// Negative ELBO averaged over the graphs of `batch`.
pub fn elbo_loss<'t>(enc: &Encoded<'t>, batch: &GraphBatch) -> Result<ElboTerms<'t>> {
    let logits = block_outer(enc.z, batch.graphs, batch.nodes)?;
    let (labels, weights) = reconstruction_targets(batch)?;
    let recon = weighted_bce_with_logits(logits, &labels, &weights)?;
    let latent = enc.mu.shape()[1];
    let kw = enc.mu.tape().constant(kl_weights(batch, latent)?);
    let kl = enc
        .mu
        .square()
        .add(enc.logvar.exp())?
        .sub(enc.logvar)?
        .add_scalar(-1.0)
        .mul(kw)?
        .sum()
        .scale(0.5);
    Ok(ElboTerms { reconstruction: recon.item()?, kl: kl.item()?, loss: recon.add(kl)? })
}

pub struct LatentSplit<'t> {
    pub causal: Var64<'t>,
    pub spurious: Var64<'t>,
}

pub fn split_latent(z: Var64<'_>) -> Result<LatentSplit<'_>> {
    let l = z.shape()[1];
    if !l.is_multiple_of(2) {
        return Err(AgentError::Config(format!("latent width must be even, got {l}")));
    }
    Ok(LatentSplit { causal: z.slice_cols(0, l / 2)?, spurious: z.slice_cols(l / 2, l)? })
}

/// `A_c = sigmoid(Z_c Z_cᵀ)`.
pub fn causal_adjacency(zc: &Tensor64) -> Result<Tensor64> {
    decode_edges(zc)
}

/// One-hot rows for `actions`.
pub fn one_hot(actions: &[usize], k: usize) -> Tensor64 {
    Tensor64::from_fn(actions.len(), k, |i, j| (actions[i] == j) as u8 as f64)
}

pub struct CdrlTerms<'t> {
    pub loss: Var64<'t>,
    pub cmi: f64,
    pub mi: f64,
    pub elbo: f64,
    pub sparsity: f64,
}

/// `−I(Z_c; A* | Z_s) + I(Z_c; Z_s) + λ₁·ELBO + λ₂·‖A_c‖₁/‖A‖₁`, with one
/// mutual-information sample per graph (mean-pooled node latents).
pub fn cdrl_loss<'t>(bound: &Bound<'t, f64>, batch: &GraphBatch, actions: &Tensor64, noise: Option<&Tensor64>, config: &CdrlConfig) -> Result<CdrlTerms<'t>> {
    if batch.graphs < 2 || actions.rows() != batch.graphs {
        return Err(AgentError::Domain("cdrl needs ≥ 2 graphs and one action row per graph".into()));
    }
    let enc = encode(bound, batch, noise)?;
    let elbo = elbo_loss(&enc, batch)?;
    let split = split_latent(enc.z)?;
    let (g, n) = (batch.graphs, batch.nodes);
    let tape = enc.z.tape();
    let pc = masked_mean_pool(split.causal, &batch.present, g, n)?;
    let ps = masked_mean_pool(split.spurious, &batch.present, g, n)?;
    let kc = pc.gram_median()?;
    let ks = ps.gram_median()?;
    let ka = tape.constant(gram(actions, KernelWidth::Median)?.matrix);
    let a = config.alpha;
    let s_s = ks.renyi_entropy(a)?;
    let s_cs = joint_entropy_var(&[kc, ks], a)?;
    let cmi = s_cs
        .add(joint_entropy_var(&[ka, ks], a)?)?
        .sub(s_s)?
        .sub(joint_entropy_var(&[kc, ka, ks], a)?)?;
    let mi = kc.renyi_entropy(a)?.add(s_s)?.sub(s_cs)?;

    let phys: f64 = batch.adjacency.iter().sum();
    let mut loss = cmi.neg().add(mi)?.add(elbo.loss.scale(config.lambda1))?;
    let mut sparsity = 0.0;
    if phys > 0.0 {
        let mask = Tensor64::from_fn(g * n, n, |r, j| {
            let b = r / n;
            (batch.present[r] && batch.present[b * n + j]) as u8 as f64
        });
        let ac = block_outer(split.causal, g, n)?.sigmoid().mul(tape.constant(mask))?.sum().scale(1.0 / phys);
        sparsity = ac.item()?;
        loss = loss.add(ac.scale(config.lambda2))?;
    }
    Ok(CdrlTerms { cmi: cmi.item()?, mi: mi.item()?, elbo: elbo.loss.item()?, sparsity, loss })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CdrlReport {
    pub loss: f64,
    pub cmi: f64,
    pub mi: f64,
    pub elbo: f64,
    pub sparsity: f64,
}

/// VGAE parameters with their optimizer.
#[derive(Debug, Clone)]
pub struct CausalModel {
    pub config: CdrlConfig,
    pub params: Params64,
    pub optimizer: Adam<f64>,
}

impl CausalModel {
    pub fn new<R: Rng + ?Sized>(config: CdrlConfig, rng: &mut R) -> Result<Self> {
        let params = init_vgae(&config, rng)?;
        Ok(Self { optimizer: Adam::new(config.lr), config, params })
    }

    /// Noise-free latent means for one observation.
    pub fn mean_latent(&self, obs: &GraphObservation) -> Result<Tensor64> {
        let tape = Tape64::new();
        let bound = tape.bind_frozen(&self.params);
        let enc = encode(&bound, &GraphBatch::single(obs)?, None)?;
        Ok((*enc.mu.value()).clone())
    }

    /// Causal edge weights for the policy, from the causal half of `μ`.
    pub fn causal_weights(&self, obs: &GraphObservation) -> Result<Tensor64> {
        let mu = self.mean_latent(obs)?;
        causal_adjacency(&mu.slice_cols(0, self.config.latent_dim / 2)?)
    }

    fn apply(&mut self, grads: &Params64) -> Result<()> {
        if !grads.all_finite() {
            return Err(AgentError::Domain("non-finite CDRL gradient".into()));
        }
        self.optimizer.step(&mut self.params, grads)?;
        Ok(())
    }

    /// One Adam step on the full disentanglement objective.
    pub fn cdrl_step<R: Rng + ?Sized>(&mut self, graphs: &[&GraphObservation], actions: &[usize], n_actions: usize, rng: &mut R) -> Result<CdrlReport> {
        let batch = GraphBatch::build(&graphs.iter().map(|o| (*o, None)).collect::<Vec<_>>())?;
        let noise = sample_noise(batch.rows(), self.config.latent_dim, rng);
        let tape = Tape64::new();
        let bound = tape.bind(&self.params);
        let terms = cdrl_loss(&bound, &batch, &one_hot(actions, n_actions), Some(&noise), &self.config)?;
        let report = CdrlReport { loss: terms.loss.item()?, cmi: terms.cmi, mi: terms.mi, elbo: terms.elbo, sparsity: terms.sparsity };
        let grads = tape.grad(terms.loss, &bound)?;
        self.apply(&grads)?;
        Ok(report)
    }

    /// One Adam step on the negative ELBO alone. Returns its value before
    /// the update.
    pub fn elbo_step<R: Rng + ?Sized>(&mut self, batch: &GraphBatch, rng: &mut R) -> Result<f64> {
        let noise = sample_noise(batch.rows(), self.config.latent_dim, rng);
        let tape = Tape64::new();
        let bound = tape.bind(&self.params);
        let terms = elbo_loss(&encode(&bound, batch, Some(&noise))?, batch)?;
        let value = terms.loss.item()?;
        let grads = tape.grad(terms.loss, &bound)?;
        self.apply(&grads)?;
        Ok(value)
    }

    /// Area under the ranking curve of decoded edge probabilities (from
    /// `μ`): the chance that a true edge outranks a non-edge, ties half.
    pub fn edge_auc(&self, graphs: &[&GraphObservation]) -> Result<f64> {
        let mut pos = Vec::new();
        let mut neg = Vec::new();
        for obs in graphs {
            let probs = decode_edges(&self.mean_latent(obs)?)?;
            for i in 0..obs.capacity() {
                for j in (i + 1)..obs.capacity() {
                    if obs.present(i) && obs.present(j) {
                        let bucket = if obs.adjacency.get(i, j) > 0.0 { &mut pos } else { &mut neg };
                        bucket.push(probs.get(i, j));
                    }
                }
            }
        }
        auc(&pos, &neg)
    }
}

pub fn auc(pos: &[f64], neg: &[f64]) -> Result<f64> {
    if pos.is_empty() || neg.is_empty() {
        return Err(AgentError::Domain("ranking AUC needs both edges and non-edges".into()));
    }
    let mut wins = 0.0;
    for &p in pos {
        for &q in neg {
            wins += if p > q { 1.0 } else if p == q { 0.5 } else { 0.0 };
        }
    }
    Ok(wins / (pos.len() * neg.len()) as f64)
}
