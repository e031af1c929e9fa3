use crate::config::ScenarioConfig;

/// Outcome flags of one decision step.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StepFlags {
    pub collided: bool,
    pub arrived: bool,
    pub off_road: bool,
    pub timed_out: bool,
}

impl StepFlags {
    pub fn terminal(&self) -> bool {
        self.collided || self.arrived || self.timed_out
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RewardComponents {
    pub collision: f64,
    pub high_speed: f64,
    pub on_road: f64,
    pub task_completion: f64,
}

/// Clipped linear speed reward.
pub fn high_speed_reward(speed: f64, config: &ScenarioConfig) -> f64 {
    let m = config.speed_map;
    let r = m.y0 + (speed - m.x0) * (m.y1 - m.y0) / (m.x1 - m.x0);
    r.clamp(m.y0.min(m.y1), m.y0.max(m.y1))
}

/// `ω^or r^or (ω^c r^c + ω^hs r^hs + ω^tc r^tc)`.
pub fn reward(flags: &StepFlags, ego_speed: f64, config: &ScenarioConfig) -> (f64, RewardComponents) {
    let c = RewardComponents {
        collision: if flags.collided { -2.0 } else { 0.0 },
        high_speed: high_speed_reward(ego_speed, config),
        on_road: if flags.off_road { 0.0 } else { 1.0 },
        task_completion: if flags.arrived { 1.0 } else { 0.0 },
    };
    let w = config.reward_weights;
    let total = w.on_road
        * c.on_road
        * (w.collision * c.collision + w.high_speed * c.high_speed + w.task_completion * c.task_completion);
    (total, c)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn off_road_zeroes_everything() {
        let cfg = ScenarioConfig::default();
        let flags = StepFlags { off_road: true, arrived: true, ..Default::default() };
        assert_eq!(reward(&flags, 9.0, &cfg).0, 0.0);
    }

    #[test]
    fn collision_at_lower_endpoint() {
        let cfg = ScenarioConfig::default();
        let flags = StepFlags { collided: true, ..Default::default() };
        assert_eq!(reward(&flags, 7.0, &cfg).0, -2.0);
    }

    #[test]
    fn arrival_at_upper_endpoint() {
        let cfg = ScenarioConfig::default();
        let flags = StepFlags { arrived: true, ..Default::default() };
        assert_eq!(reward(&flags, 9.0, &cfg).0, 2.0);
    }

    #[test]
    fn speed_map_is_clipped() {
        let cfg = ScenarioConfig::default();
        assert_eq!(high_speed_reward(0.0, &cfg), 0.0);
        assert_eq!(high_speed_reward(8.0, &cfg), 0.5);
        assert_eq!(high_speed_reward(20.0, &cfg), 1.0);
    }
}
