//! Greedy evaluation of a checkpoint, plus the generic loop the random
//! baseline shares.

use cgrl_agent::{observe, GraphObservation};
use cgrl_sim::{layout_of, Action, Task, World};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::checkpoint::Checkpoint;
use crate::config::ExperimentConfig;
use crate::error::{HarnessError, Result};
use crate::metrics::{EpisodeLog, MetricsReport};
use crate::train::{fresh_world, outcome_of};

/// One vehicle in one recorded frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehiclePose {
    pub id: usize,
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub is_ego: bool,
}

/// State after one decision step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    pub step: u32,
    pub reward: f64,
    pub vehicles: Vec<VehiclePose>,
}

/// A recorded episode with the road geometry needed to draw it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub half_length: f64,
    pub lane_width: f64,
    pub frames: Vec<Frame>,
}

impl Trajectory {
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("trajectory serializes")
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| HarnessError::Format(e.to_string()))
    }
}

fn frame(world: &World, reward: f64) -> Frame {
    Frame {
        step: world.decision_step(),
        reward,
        vehicles: world
            .vehicles()
            .iter()
            .filter(|v| v.present)
            .map(|v| VehiclePose { id: v.id, x: v.x, y: v.y, heading: v.heading, is_ego: v.is_ego })
            .collect(),
    }
}

#[derive(Debug, Clone)]
pub struct EvalOutcome {
    pub report: MetricsReport,
    pub logs: Vec<EpisodeLog>,
    /// First episode, when recording was requested.
    pub trajectory: Option<Trajectory>,
}

/// Runs `n` episodes of `task` with actions from `policy`. Scenario seeds
/// come from `seed` alone, so every policy sees the same episodes.
pub fn evaluate<F>(config: &ExperimentConfig, model: &str, task: Task, n: usize, seed: u64, record: bool, mut policy: F) -> Result<EvalOutcome>
where
    F: FnMut(&GraphObservation, &mut ChaCha8Rng) -> Result<usize>,
{
    if n == 0 {
        return Err(HarnessError::Domain("evaluation needs at least one episode".into()));
    }
    let scenario = config.scenario_for(task);
    let mut worlds = ChaCha8Rng::seed_from_u64(seed);
    let mut act_rng = ChaCha8Rng::seed_from_u64(worlds.random());
    let layout = layout_of(&scenario);
    let mut trajectory = record.then(|| Trajectory { half_length: layout.half_length, lane_width: layout.lane_width, frames: Vec::new() });
    let mut logs = Vec::with_capacity(n);
    for episode in 0..n {
        let mut world = fresh_world(&scenario, &mut worlds)?;
        let (mut total, mut speed_sum, mut steps) = (0.0, 0.0, 0u32);
        let outcome = loop {
            let action = policy(&observe(&world, config.capacity)?, &mut act_rng)?;
            let r = world.step(Action::from_index(action)?)?;
            total += r.reward;
            speed_sum += world.ego().speed;
            steps += 1;
            if let (0, Some(t)) = (episode, trajectory.as_mut()) {
                t.frames.push(frame(&world, r.reward));
            }
            if r.terminal {
                break outcome_of(&r.flags);
            }
        };
        logs.push(EpisodeLog { episode, reward: total, steps, outcome, mean_speed: speed_sum / steps as f64 });
    }
    let report = MetricsReport::from_logs(&logs, model, task, seed)?;
    Ok(EvalOutcome { report, logs, trajectory })
}

/// Greedy (ε = 0) evaluation of a checkpoint. The checkpoint is only read.
pub fn run_eval(checkpoint: &Checkpoint, task: Task, n: usize, seed: u64, record: bool) -> Result<EvalOutcome> {
    let (agent, causal) = checkpoint.restore()?;
    let config = &checkpoint.config;
    evaluate(config, config.model.as_str(), task, n, seed, record, |obs, _| {
        let w = causal.as_ref().map(|c| c.causal_weights(obs)).transpose()?;
        Ok(cgrl_agent::argmax(&agent.q_values(obs, w.as_ref())?))
    })
}

/// Uniformly random actions over the same episodes.
pub fn run_random(config: &ExperimentConfig, task: Task, n: usize, seed: u64) -> Result<EvalOutcome> {
    let k = config.policy.n_actions;
    evaluate(config, "random", task, n, seed, false, |_, rng| Ok(rng.random_range(0..k)))
}
