//! Replay-buffer TD learning for the DQN family: vanilla, double, dueling
//! and their combination, selected by [`ArchFlags`](crate::ArchFlags).

use std::collections::VecDeque;

use cgrl_core::{clip_global_norm, Adam, Params64, Sgd, Tape64, Tensor64};
use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::batch::GraphBatch;
use crate::error::{AgentError, Result};
use crate::obs::GraphObservation;
use crate::policy::{forward, init_params, q_values, q_values_batch, PolicyConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    #[default]
    Sgd,
    Adam,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainerConfig {
    pub gamma: f64,
    pub lr: f64,
    pub batch_size: usize,
    pub epsilon: f64,
    /// Gradient steps between hard target copies.
    pub target_update: u64,
    pub replay_capacity: usize,
    pub grad_clip: f64,
    pub episodes: usize,
    pub optimizer: OptimizerKind,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        Self {
            gamma: 0.95,
            lr: 1e-4,
            batch_size: 64,
            epsilon: 0.1,
            target_update: 5000,
            replay_capacity: 100_000,
            grad_clip: 10.0,
            episodes: 1000,
            optimizer: OptimizerKind::Sgd,
        }
    }
}

impl TrainerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(AgentError::Config(format!("gamma must be in [0,1), got {}", self.gamma)));
        }
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(AgentError::Config(format!("epsilon must be in [0,1], got {}", self.epsilon)));
        }
        if self.lr < 0.0 || self.grad_clip <= 0.0 {
            return Err(AgentError::Config("lr must be non-negative and grad_clip positive".into()));
        }
        if self.batch_size == 0 || self.replay_capacity < self.batch_size || self.target_update == 0 {
            return Err(AgentError::Config("batch_size, replay_capacity and target_update must be positive, capacity ≥ batch".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: GraphObservation,
    /// Causal edge weights in force when the state was observed.
    pub state_weights: Option<Tensor64>,
    pub action: usize,
    pub reward: f64,
    pub next_state: GraphObservation,
    pub next_weights: Option<Tensor64>,
    pub terminal: bool,
}

/// FIFO ring of transitions.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    items: VecDeque<Transition>,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        Self { capacity, items: VecDeque::with_capacity(capacity.min(4096)) }
    }

    pub fn push(&mut self, t: Transition) {
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(t);
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        self.items.iter()
    }

    /// Uniform sample without replacement, or `None` while under-filled.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Option<Vec<&Transition>> {
        if n == 0 || self.items.len() < n {
            return None;
        }
        Some(sample(rng, self.items.len(), n).into_iter().map(|i| &self.items[i]).collect())
    }
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(q: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in q.iter().enumerate() {
        if v > q[best] {
            best = i;
        }
    }
    best
}

/// ε-greedy over `q.len()` actions.
pub fn select_action<R: Rng + ?Sized>(q: &[f64], epsilon: f64, rng: &mut R) -> usize {
    if epsilon > 0.0 && rng.random::<f64>() < epsilon {
        rng.random_range(0..q.len())
    } else {
        argmax(q)
    }
}

/// One-step target. The double variant picks the action with the online
/// network and scores it with the target network.
pub fn td_target(reward: f64, terminal: bool, gamma: f64, q_online_next: &[f64], q_target_next: &[f64], double: bool) -> f64 {
    if terminal {
        return reward;
    }
    let bootstrap = if double {
        q_target_next[argmax(q_online_next)]
    } else {
        q_target_next.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    };
    reward + gamma * bootstrap
}

fn state_batch(batch: &[&Transition]) -> Result<GraphBatch> {
    let items: Vec<_> = batch.iter().map(|t| (&t.state, t.state_weights.as_ref())).collect();
    GraphBatch::build(&items)
}

fn next_batch(batch: &[&Transition]) -> Result<GraphBatch> {
    let items: Vec<_> = batch.iter().map(|t| (&t.next_state, t.next_weights.as_ref())).collect();
    GraphBatch::build(&items)
}

/// Online and target networks with their update counter.
#[derive(Debug, Clone)]
pub struct D3qn {
    pub policy: PolicyConfig,
    pub trainer: TrainerConfig,
    pub online: Params64,
    pub target: Params64,
    pub steps: u64,
    adam: Option<Adam<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainReport {
    pub loss: f64,
    pub grad_norm: f64,
    pub max_abs_q: f64,
}

impl D3qn {
    pub fn new<R: Rng + ?Sized>(policy: PolicyConfig, trainer: TrainerConfig, rng: &mut R) -> Result<Self> {
        trainer.validate()?;
        let online = init_params(&policy, rng)?;
        let adam = (trainer.optimizer == OptimizerKind::Adam).then(|| Adam::new(trainer.lr));
        Ok(Self { target: online.clone(), online, policy, trainer, steps: 0, adam })
    }

    pub fn q_values(&self, obs: &GraphObservation, weights: Option<&Tensor64>) -> Result<Vec<f64>> {
        q_values(&self.policy, &self.online, obs, weights)
    }

    pub fn act<R: Rng + ?Sized>(&self, obs: &GraphObservation, weights: Option<&Tensor64>, epsilon: f64, rng: &mut R) -> Result<usize> {
        Ok(select_action(&self.q_values(obs, weights)?, epsilon, rng))
    }

    /// Targets for a batch; no gradient flows through them.
    pub fn targets(&self, batch: &[&Transition]) -> Result<Vec<f64>> {
        let next = next_batch(batch)?;
        let k = self.policy.n_actions;
        let qt = q_values_batch(&self.policy, &self.target, &next)?;
        let double = self.policy.arch_flags.use_double;
        let qo = if double { Some(q_values_batch(&self.policy, &self.online, &next)?) } else { None };
        Ok(batch
            .iter()
            .enumerate()
            .map(|(i, t)| {
                let tgt = &qt.data()[i * k..(i + 1) * k];
                let onl = qo.as_ref().map_or(tgt, |q| &q.data()[i * k..(i + 1) * k]);
                td_target(t.reward, t.terminal, self.trainer.gamma, onl, tgt, double)
            })
            .collect())
    }

    /// Mean squared TD error at the taken actions and its gradient.
    pub fn loss_and_grad(&self, params: &Params64, batch: &[&Transition], targets: &[f64]) -> Result<(f64, Params64, f64)> {
        let states = state_batch(batch)?;
        let tape = Tape64::new();
        let bound = tape.bind(params);
        let q = forward(&self.policy, &bound, &states)?;
        let max_abs_q = q.value().max_abs();
        let actions: Vec<usize> = batch.iter().map(|t| t.action).collect();
        let y = tape.constant(Tensor64::new([batch.len(), 1], targets.to_vec())?);
        let loss = q.gather_cols(&actions)?.sub(y)?.square().mean();
        let value = loss.item()?;
        Ok((value, tape.grad(loss, &bound)?, max_abs_q))
    }

    /// One SGD update on `batch`; copies online to target every
    /// `target_update` steps.
    pub fn train_on(&mut self, batch: &[&Transition]) -> Result<TrainReport> {
        let targets = self.targets(batch)?;
        let (loss, mut grads, max_abs_q) = self.loss_and_grad(&self.online, batch, &targets)?;
        if !loss.is_finite() || !grads.all_finite() {
            return Err(AgentError::Domain(format!("non-finite TD loss at step {}", self.steps)));
        }
        let grad_norm = clip_global_norm(&mut grads, self.trainer.grad_clip);
        match &mut self.adam {
            Some(adam) => adam.step(&mut self.online, &grads)?,
            None => Sgd { lr: self.trainer.lr }.step(&mut self.online, &grads)?,
        }
        self.steps += 1;
        if self.steps.is_multiple_of(self.trainer.target_update) {
            self.target = self.online.clone();
        }
        Ok(TrainReport { loss, grad_norm, max_abs_q })
    }

    /// Samples a batch and trains, or `None` while the buffer is too small.
    pub fn train_step<R: Rng + ?Sized>(&mut self, buffer: &ReplayBuffer, rng: &mut R) -> Result<Option<TrainReport>> {
        let Some(batch) = buffer.sample(self.trainer.batch_size, rng) else {
            return Ok(None);
        };
        self.train_on(&batch).map(Some)
    }
}
