//! Car-following law for the human-driven vehicles.

use crate::config::IdmParams;
use crate::error::{Result, SimError};

/// Vehicle ahead as seen by a follower: bumper-to-bumper gap and its speed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Leader {
    pub gap: f64,
    pub speed: f64,
}

/// Desired gap `s* = s0 + vT + vΔv / (2√(a·|b|))`.
pub fn desired_gap(speed: f64, approach_rate: f64, p: &IdmParams) -> f64 {
    p.s0 + speed * p.time_headway + speed * approach_rate / (2.0 * (p.a_max * p.b.abs()).sqrt())
}

/// `a = a_max [1 − (v/v0)^δ − (s*/s)²]`; without a leader only the free-road
/// term remains.
pub fn idm_acceleration(speed: f64, leader: Option<Leader>, p: &IdmParams) -> Result<f64> {
    let free = 1.0 - (speed / p.v0).powf(p.delta);
    let interaction = match leader {
        None => 0.0,
        Some(l) if l.gap <= 0.0 => return Err(SimError::Collision { gap: l.gap }),
        Some(l) => {
            let s_star = desired_gap(speed, speed - l.speed, p);
            (s_star / l.gap).powi(2)
        }
    };
    Ok(p.a_max * (free - interaction))
}

/// Advances `(position, speed)` by `dt` under constant acceleration, stopping
/// exactly at zero speed instead of reversing.
pub fn integrate(position: f64, speed: f64, accel: f64, dt: f64) -> (f64, f64) {
    let v = speed + accel * dt;
    if v < 0.0 {
        (position + speed * speed / (-2.0 * accel), 0.0)
    } else {
        (position + speed * dt + 0.5 * accel * dt * dt, v)
    }
}
