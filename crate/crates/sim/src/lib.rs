//! Four-way unsignalized intersection with IDM-driven traffic and a
//! discrete-action ego vehicle.

mod config;
pub mod conflict;
mod error;
pub mod geometry;
mod idm;
mod reward;
mod world;

pub use config::{IdmParams, RewardWeights, ScenarioConfig, SpeedMap, Task};
pub use error::{Result, SimError};
pub use geometry::{collision_check, Layout, Pose, Rect, Route, VEHICLE_LENGTH, VEHICLE_WIDTH};
pub use idm::{desired_gap, idm_acceleration, integrate, Leader};
pub use reward::{high_speed_reward, reward, RewardComponents, StepFlags};
pub use world::{build_scenario, layout_of, spawn_clear, Action, StepResult, VehicleState, World, LOOKAHEAD};
