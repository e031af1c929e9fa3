//! Graph-structured Q-learning agent for the intersection task: state
//! extraction, the GCNII/GATv2 Q-network, the D3QN trainer and the causal
//! VGAE that supplies learned edge weights.

mod batch;
mod error;
pub mod graph_ops;
pub mod obs;
pub mod policy;
pub mod trainer;
pub mod vgae;

pub use batch::GraphBatch;
pub use error::{AgentError, Result};
pub use obs::{build_adjacency, build_feature_matrix, normalize_adjacency, observe, GraphObservation, FEATURES};
pub use policy::{forward, gcn2_beta, init_params, q_values, q_values_batch, ArchFlags, PolicyConfig};
pub use trainer::{argmax, select_action, td_target, D3qn, ReplayBuffer, TrainReport, TrainerConfig, Transition};
pub use vgae::{
    causal_adjacency, cdrl_loss, decode_edges, elbo_loss, encode, split_latent, CausalModel, CdrlConfig, CdrlReport,
};
