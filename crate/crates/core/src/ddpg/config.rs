use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("gamma must lie in (0, 1], got {0}")]
    Gamma(f64),
    #[error("epsilon bounds must satisfy 0 <= eps_min <= eps0 <= 1 (eps_min {eps_min}, eps0 {eps0})")]
    Epsilon { eps_min: f64, eps0: f64 },
    #[error("epsilon decay must lie in (0, 1], got {0}")]
    EpsilonDecay(f64),
    #[error("batch size {batch} must be in 1..=capacity ({capacity})")]
    BatchSize { batch: usize, capacity: usize },
    #[error("warmup of {warmup} transitions exceeds buffer capacity {capacity}")]
    Warmup { warmup: usize, capacity: usize },
    #[error("{name} must be positive, got {value}")]
    NonPositive { name: &'static str, value: f64 },
}

/// Shaping constants of the navigation reward.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RewardConfig {
    pub goal: f64,
    pub collision: f64,
    pub shaping_gain: f64,
    pub distance_gain: f64,
    pub heading_divisor: f64,
    /// Lower bound on h_R inside the shaping term. Unbounded, h_R < 0 turns
    /// retreat from an off-axis goal into positive reward.
    pub heading_floor: Option<f64>,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self {
            goal: 1000.0,
            collision: -200.0,
            shaping_gain: 3.0,
            distance_gain: 10.0,
            heading_divisor: 1.2,
            heading_floor: Some(0.0),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DdpgConfig {
    pub gamma: f64,
    /// Shared by actor and critic.
    pub lr: f64,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    /// Hard target sync period, in gradient updates.
    pub target_update_steps: u64,
    pub eps0: f64,
    pub eps_min: f64,
    pub eps_decay: f64,
    /// Seconds between agent decisions; the reward uses f = 1 / control_period.
    pub control_period: f64,
    pub reward: RewardConfig,
    /// Transitions collected before the first gradient update.
    pub warmup_transitions: usize,
    /// Simulated seconds before a training episode times out.
    pub episode_timeout: f64,
}

impl Default for DdpgConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            lr: 0.00025,
            batch_size: 64,
            buffer_capacity: 1_000_000,
            target_update_steps: 2000,
            eps0: 1.0,
            eps_min: 0.05,
            eps_decay: 0.998,
            control_period: 0.33,
            reward: RewardConfig::default(),
            warmup_transitions: 1000,
            episode_timeout: 250.0,
        }
    }
}

impl DdpgConfig {
    pub fn control_frequency(&self) -> f64 {
        1.0 / self.control_period
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(ConfigError::Gamma(self.gamma));
        }
        if !(0.0 <= self.eps_min && self.eps_min <= self.eps0 && self.eps0 <= 1.0) {
            return Err(ConfigError::Epsilon {
                eps_min: self.eps_min,
                eps0: self.eps0,
            });
        }
        if !(self.eps_decay > 0.0 && self.eps_decay <= 1.0) {
            return Err(ConfigError::EpsilonDecay(self.eps_decay));
        }
        if self.batch_size == 0 || self.batch_size > self.buffer_capacity {
            return Err(ConfigError::BatchSize {
                batch: self.batch_size,
                capacity: self.buffer_capacity,
            });
        }
        if self.warmup_transitions > self.buffer_capacity {
            return Err(ConfigError::Warmup {
                warmup: self.warmup_transitions,
                capacity: self.buffer_capacity,
            });
        }
        for (name, value) in [
            ("lr", self.lr),
            ("control_period", self.control_period),
            ("episode_timeout", self.episode_timeout),
            ("target_update_steps", self.target_update_steps as f64),
            ("heading_divisor", self.reward.heading_divisor),
        ] {
            if !(value > 0.0) {
                return Err(ConfigError::NonPositive { name, value });
            }
        }
        Ok(())
    }
}

/// ε = max(ε₀ · ε_d^episode, ε_min).
pub fn epsilon(episode: u64, cfg: &DdpgConfig) -> f64 {
    let decayed = cfg.eps0 * cfg.eps_decay.powf(episode as f64);
    decayed.max(cfg.eps_min)
}
