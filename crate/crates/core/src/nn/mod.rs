//! Dense networks sized for the navigation actor and critic: batched forward,
//! reverse-mode gradients (parameters and inputs), Adam and a binary file format.

mod actor;
mod adam;
mod critic;
mod infer;
pub mod io;
mod mlp;

use thiserror::Error;

pub use actor::{ActorCache, ActorDims, ActorNet, ACTION_DIM};
pub use adam::{adam_step, AdamState};
pub use critic::{CriticCache, CriticDims, TwoBranchCritic};
pub use infer::ActorF32;
pub use io::{
    load_actor, load_actor_expecting, load_adam, load_critic, load_critic_expecting, load_net, save_actor, save_adam, save_critic,
    save_net,
};
pub use mlp::{Activation, Dense, Mlp, MlpCache, ParamGrads};

#[derive(Debug, Error)]
pub enum NetError {
    #[error("dimension mismatch: expected {expected} values, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("forward cache does not match the current parameters")]
    StaleCache,
    #[error("architecture mismatch: {0}")]
    Architecture(String),
    #[error("network file version {found} is not supported (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("corrupt network file: {0}")]
    Corrupt(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
