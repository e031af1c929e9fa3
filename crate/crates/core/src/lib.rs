//! Numeric substrate for the causal graph-RL workspace.
//!
//! Everything here is generic over the scalar type through [`Real`]
//! (implemented for `f32` and `f64`); the aliases below fix the precision
//! the learning crates use.

pub mod activations;
pub mod eigen;
pub mod entropy;
mod error;
pub mod gradcheck;
mod ops;
pub mod optim;
mod params;
mod scalar;
pub mod tape;
mod tensor;

pub use activations::{activate, sigmoid_scalar, Activation};
pub use eigen::{eigh_sym, SymmetricEigen};
pub use entropy::{
    conditional_mi, gram, joint_entropy, joint_entropy_var, mutual_information, renyi_entropy,
    GramMatrix, KernelWidth,
};
pub use error::{NumericError, Result};
pub use optim::{clip_global_norm, Adam, Sgd};
pub use params::ParameterSet;
pub use scalar::Real;
pub use tape::{Bound, Gradients, Tape, Var};
pub use tensor::Tensor;

pub type Tensor64 = Tensor<f64>;
pub type Tensor32 = Tensor<f32>;
pub type Params64 = ParameterSet<f64>;
pub type Params32 = ParameterSet<f32>;
pub type Tape64 = Tape<f64>;
pub type Tape32 = Tape<f32>;
pub type Var64<'t> = Var<'t, f64>;
pub type Var32<'t> = Var<'t, f32>;
