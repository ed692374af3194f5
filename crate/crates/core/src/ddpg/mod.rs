//! DDPG for the navigation task: exploration schedule, reward, replay,
//! actor/critic updates with hard target synchronization and the episodic
//! training loop.

mod agent;
mod config;
mod replay;
mod reward;
mod train;

use thiserror::Error;

pub use agent::{
    actor_update, critic_target, critic_update, hard_update_targets, select_action, DdpgAgent, Policy, QFunction,
    UpdateStats,
};
pub use config::{epsilon, ConfigError, DdpgConfig, RewardConfig};
pub use replay::{Batch, ReplayBuffer, Transition};
pub use reward::{compute_reward, heading_reward, DoneReason};
pub use train::{
    action_to_command, train, ClutteredRoom, EarlyStop, EmptyArena, EpisodeRecord, EpisodeSetup, ScenarioSampler,
    TrainConfig, Trainer, TrainingLog,
};

use crate::nn::NetError;

#[derive(Debug, Error)]
pub enum DdpgError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error("non-finite parameter or loss after update {update}")]
    NonFinite { update: u64 },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
