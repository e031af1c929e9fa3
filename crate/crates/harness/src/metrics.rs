//! Per-episode logs and the aggregate collision rate, average reward and
//! average velocity.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use cgrl_sim::Task;
use serde::{Deserialize, Serialize};

use crate::error::{io_err, HarnessError, Result};
use crate::model::ModelId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Collided,
    Arrived,
    Timeout,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Outcome::Collided => "collided",
            Outcome::Arrived => "arrived",
            Outcome::Timeout => "timeout",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeLog {
    pub episode: usize,
    pub reward: f64,
    pub steps: u32,
    pub outcome: Outcome,
    /// Mean ego speed over decision steps, m/s.
    pub mean_speed: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub model: String,
    pub task: Task,
    pub seed: u64,
    pub episodes: usize,
    /// Percent of episodes ending in a collision.
    pub collision_rate: f64,
    pub average_reward: f64,
    pub average_velocity: f64,
}

impl MetricsReport {
    /// Aggregates per-episode rows. Summation is in row order, so the same
    /// rows always give bit-identical metrics.
    pub fn from_logs(logs: &[EpisodeLog], model: &str, task: Task, seed: u64) -> Result<Self> {
        if logs.is_empty() {
            return Err(HarnessError::Domain("metrics are undefined for zero episodes".into()));
        }
        let n = logs.len() as f64;
        let collided = logs.iter().filter(|l| l.outcome == Outcome::Collided).count() as f64;
        Ok(Self {
            model: model.to_string(),
            task,
            seed,
            episodes: logs.len(),
            collision_rate: collided / n * 100.0,
            average_reward: logs.iter().map(|l| l.reward).sum::<f64>() / n,
            average_velocity: logs.iter().map(|l| l.mean_speed).sum::<f64>() / n,
        })
    }

    pub fn model_id(&self) -> Option<ModelId> {
        ModelId::from_str(&self.model).ok()
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("report serializes")
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| HarnessError::Format(e.to_string()))
    }
}

/// Header: `episode,reward,steps,outcome,mean_speed`.
pub fn write_episode_csv(path: &Path, logs: &[EpisodeLog]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    if logs.is_empty() {
        w.write_record(["episode", "reward", "steps", "outcome", "mean_speed"])?;
    }
    for l in logs {
        w.serialize(l)?;
    }
    w.flush().map_err(io_err(path))?;
    Ok(())
}

pub fn read_episode_csv(path: &Path) -> Result<Vec<EpisodeLog>> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<Result<Vec<EpisodeLog>, _>>()?)
}
