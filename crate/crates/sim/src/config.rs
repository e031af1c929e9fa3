use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};

/// Route the ego drives through the junction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Left,
    Straight,
    Right,
}

impl Task {
    pub const ALL: [Task; 3] = [Task::Left, Task::Straight, Task::Right];

    pub fn as_str(self) -> &'static str {
        match self {
            Task::Left => "left",
            Task::Straight => "straight",
            Task::Right => "right",
        }
    }
}

impl std::str::FromStr for Task {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "left" => Ok(Task::Left),
            "straight" => Ok(Task::Straight),
            "right" => Ok(Task::Right),
            other => Err(SimError::Config(format!("unknown task {other:?}"))),
        }
    }
}

impl std::fmt::Display for Task {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Intelligent-driver-model parameters. `b` is stored signed (negative) and
/// only its magnitude enters the law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IdmParams {
    pub a_max: f64,
    pub delta: f64,
    pub time_headway: f64,
    pub s0: f64,
    pub b: f64,
    pub v0: f64,
}

impl Default for IdmParams {
    fn default() -> Self {
        Self {
            a_max: 6.0,
            delta: 4.0,
            time_headway: 1.5,
            s0: 5.0,
            b: -5.0,
            v0: 8.0,
        }
    }
}

impl IdmParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.a_max > 0.0
            && self.time_headway > 0.0
            && self.s0 > 0.0
            && self.b.abs() > 0.0
            && self.v0 > 0.0
            && self.delta > 0.0;
        if ok && [self.a_max, self.delta, self.time_headway, self.s0, self.b, self.v0]
            .iter()
            .all(|v| v.is_finite())
        {
            Ok(())
        } else {
            Err(SimError::Config(format!("invalid IDM parameters {self:?}")))
        }
    }
}

/// `(ω^c, ω^hs, ω^or, ω^tc)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardWeights {
    pub collision: f64,
    pub high_speed: f64,
    pub on_road: f64,
    pub task_completion: f64,
}

impl Default for RewardWeights {
    fn default() -> Self {
        Self {
            collision: 1.0,
            high_speed: 1.0,
            on_road: 1.0,
            task_completion: 1.0,
        }
    }
}

/// Linear map of ego speed `[x0, x1]` onto `[y0, y1]`, clipped.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpeedMap {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Default for SpeedMap {
    fn default() -> Self {
        Self {
            x0: 7.0,
            x1: 9.0,
            y0: 0.0,
            y1: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub n_human_vehicles: usize,
    pub road_half_length: f64,
    pub lane_width: f64,
    pub ego_task: Task,
    pub sim_frequency: u32,
    pub policy_frequency: u32,
    pub horizon: u32,
    pub idm: IdmParams,
    pub reward_weights: RewardWeights,
    pub speed_map: SpeedMap,
    pub rng_seed: u64,
    /// Ego acceleration magnitude for the accelerate/decelerate actions.
    pub ego_accel: f64,
    pub ego_speed_cap: f64,
    pub ego_spawn_arc: f64,
    pub ego_initial_speed: f64,
    pub hv_speed_min: f64,
    pub hv_speed_max: f64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            n_human_vehicles: 15,
            road_half_length: 30.0,
            lane_width: 4.0,
            ego_task: Task::Straight,
            sim_frequency: 15,
            policy_frequency: 1,
            horizon: 40,
            idm: IdmParams::default(),
            reward_weights: RewardWeights::default(),
            speed_map: SpeedMap::default(),
            rng_seed: 0,
            ego_accel: 3.0,
            ego_speed_cap: 10.0,
            ego_spawn_arc: 5.0,
            ego_initial_speed: 5.0,
            hv_speed_min: 7.0,
            hv_speed_max: 9.0,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        let err = |m: String| Err(SimError::Config(m));
        if self.sim_frequency == 0 || self.policy_frequency == 0 {
            return err("frequencies must be positive".into());
        }
        if !self.sim_frequency.is_multiple_of(self.policy_frequency) {
            return err(format!(
                "sim_frequency {} is not a multiple of policy_frequency {}",
                self.sim_frequency, self.policy_frequency
            ));
        }
        if self.horizon == 0 {
            return err("horizon must be at least 1".into());
        }
        if !(self.lane_width > 0.0 && self.road_half_length > 2.0 * self.lane_width) {
            return err("roads must extend beyond the junction box".into());
        }
        if self.speed_map.x1 == self.speed_map.x0 {
            return err("speed map needs x0 != x1".into());
        }
        if !(self.ego_accel >= 0.0 && self.ego_speed_cap > 0.0) {
            return err("ego acceleration and speed cap must be positive".into());
        }
        if !(self.ego_initial_speed >= 0.0 && self.ego_initial_speed <= self.ego_speed_cap) {
            return err("ego initial speed outside [0, cap]".into());
        }
        if !(self.hv_speed_min > 0.0 && self.hv_speed_min <= self.hv_speed_max) {
            return err("human desired-speed range is empty".into());
        }
        self.idm.validate()
    }

    pub fn substeps(&self) -> u32 {
        self.sim_frequency / self.policy_frequency
    }

    pub fn dt(&self) -> f64 {
        1.0 / f64::from(self.sim_frequency)
    }
}
