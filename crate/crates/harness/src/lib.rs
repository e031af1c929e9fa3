//! Experiment orchestration: configuration, training and evaluation
//! loops, metrics, checkpoints and exports.

pub mod checkpoint;
pub mod config;
mod error;
pub mod eval;
pub mod metrics;
pub mod mi;
pub mod model;
pub mod render;
pub mod report;
pub mod train;

pub use checkpoint::Checkpoint;
pub use config::{ExperimentConfig, ScheduleConfig};
pub use error::{HarnessError, Result};
pub use eval::{evaluate, run_eval, run_random, EvalOutcome, Trajectory};
pub use metrics::{read_episode_csv, write_episode_csv, EpisodeLog, MetricsReport, Outcome};
pub use model::{ModelFlags, ModelId};
pub use report::{export_table, parse_table, Table};
pub use train::{run_training, TrainOutcome};
