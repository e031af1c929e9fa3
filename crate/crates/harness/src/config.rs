//! Experiment configuration: one TOML file with a section per component.

use std::path::Path;

use cgrl_agent::{CdrlConfig, PolicyConfig, TrainerConfig};
use cgrl_sim::{ScenarioConfig, Task};
use serde::{Deserialize, Serialize};

use crate::error::{io_err, HarnessError, Result};
use crate::model::ModelId;

/// Loop-level knobs not owned by any single component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScheduleConfig {
    /// RL gradient steps between CDRL steps.
    pub cdrl_every: u64,
    pub cdrl_warmup_episodes: usize,
    /// Exploration rate at episode 0; decays linearly to the trainer's
    /// epsilon. Equal to it by default, which keeps epsilon fixed.
    pub epsilon_start: f64,
    /// Fraction of the episode budget over which epsilon decays.
    pub epsilon_decay_fraction: f64,
    /// Gradient steps per decision step once the buffer is warm.
    pub updates_per_step: usize,
    /// Episodes between checkpoints (0 keeps only the first and last).
    pub checkpoint_every: usize,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        Self {
            cdrl_every: 4,
            cdrl_warmup_episodes: 50,
            epsilon_start: 0.1,
            epsilon_decay_fraction: 0.0,
            updates_per_step: 1,
            checkpoint_every: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelId,
    pub task: Task,
    pub seeds: Vec<u64>,
    pub eval_episodes: usize,
    /// Graph capacity N_max (ego included).
    pub capacity: usize,
    pub scenario: ScenarioConfig,
    pub trainer: TrainerConfig,
    pub policy: PolicyConfig,
    pub cdrl: Option<CdrlConfig>,
    pub schedule: ScheduleConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            model: ModelId::Cgrl,
            task: Task::Straight,
            seeds: vec![0, 1, 2],
            eval_episodes: 2000,
            capacity: 16,
            scenario: ScenarioConfig::default(),
            trainer: TrainerConfig::default(),
            policy: PolicyConfig::default(),
            cdrl: Some(CdrlConfig::default()),
            schedule: ScheduleConfig::default(),
        }
    }
}

impl ExperimentConfig {
    /// Small preset used by the acceptance suite and CI: 5 human vehicles,
    /// 300 episodes, 200 evaluation episodes.
    pub fn desk(model: ModelId) -> Self {
        let mut c = Self {
            model,
            eval_episodes: 200,
            capacity: 6,
            scenario: ScenarioConfig { n_human_vehicles: 5, ..Default::default() },
            trainer: TrainerConfig {
                episodes: 300,
                lr: 3e-4,
                target_update: 250,
                optimizer: cgrl_agent::trainer::OptimizerKind::Adam,
                ..Default::default()
            },
            schedule: ScheduleConfig { epsilon_start: 1.0, epsilon_decay_fraction: 0.5, ..Default::default() },
            ..Default::default()
        };
        c.apply_model();
        c
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let mut c: Self = toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        c.apply_model();
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path).map_err(io_err(path))?)
    }

    /// Every key, including defaults, as TOML.
    pub fn echo(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Sets the architecture flags and the CDRL section from the model id.
    pub fn apply_model(&mut self) {
        let f = self.model.flags();
        self.policy.arch_flags = f.arch;
        if f.cdrl {
            self.cdrl.get_or_insert_with(CdrlConfig::default);
        } else {
            self.cdrl = None;
        }
    }

    pub fn with_model(mut self, model: ModelId) -> Self {
        self.model = model;
        self.apply_model();
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        self.trainer.validate()?;
        self.policy.validate()?;
        if let Some(c) = &self.cdrl {
            c.validate()?;
        }
        if self.capacity < self.scenario.n_human_vehicles + 1 {
            return Err(HarnessError::Config(format!(
                "capacity {} cannot hold {} human vehicles plus the ego",
                self.capacity, self.scenario.n_human_vehicles
            )));
        }
        let s = &self.schedule;
        if s.cdrl_every == 0 || s.updates_per_step == 0 {
            return Err(HarnessError::Config("cdrl_every and updates_per_step must be positive".into()));
        }
        if !(0.0..=1.0).contains(&s.epsilon_start) || !(0.0..=1.0).contains(&s.epsilon_decay_fraction) {
            return Err(HarnessError::Config("epsilon_start and epsilon_decay_fraction must lie in [0,1]".into()));
        }
        Ok(())
    }

    /// Exploration rate for `episode`.
    pub fn epsilon(&self, episode: usize) -> f64 {
        let end = self.trainer.epsilon;
        let span = self.schedule.epsilon_decay_fraction * self.trainer.episodes as f64;
        if span <= 0.0 {
            return end;
        }
        let t = episode as f64 / span;
        if t >= 1.0 {
            return end;
        }
        self.schedule.epsilon_start + (end - self.schedule.epsilon_start) * t
    }

    pub fn scenario_for(&self, task: Task) -> ScenarioConfig {
        ScenarioConfig { ego_task: task, ..self.scenario.clone() }
    }
}
