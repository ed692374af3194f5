use rand::Rng;

use super::config::DdpgConfig;
use super::replay::Batch;
use super::DdpgError;
use crate::nn::{adam_step, ActorNet, AdamState, NetError, TwoBranchCritic, ACTION_DIM};

/// Deterministic batched policy.
pub trait Policy {
    fn actions(&self, states: &[f64], batch: usize) -> Result<Vec<f64>, NetError>;
}

/// Action-value function with access to ∂Q/∂a.
pub trait QFunction {
    fn q(&self, states: &[f64], actions: &[f64], batch: usize) -> Result<Vec<f64>, NetError>;

    /// Q values and `∂(Σ_b q_b · q_grad_b)/∂actions`.
    fn q_and_action_grad(
        &self,
        states: &[f64],
        actions: &[f64],
        batch: usize,
        q_grad: &[f64],
    ) -> Result<(Vec<f64>, Vec<f64>), NetError>;
}

impl Policy for ActorNet {
    fn actions(&self, states: &[f64], batch: usize) -> Result<Vec<f64>, NetError> {
        self.act_batch(states, batch)
    }
}

impl QFunction for TwoBranchCritic {
    fn q(&self, states: &[f64], actions: &[f64], batch: usize) -> Result<Vec<f64>, NetError> {
        self.q_values(states, actions, batch)
    }

    fn q_and_action_grad(
        &self,
        states: &[f64],
        actions: &[f64],
        batch: usize,
        q_grad: &[f64],
    ) -> Result<(Vec<f64>, Vec<f64>), NetError> {
        let cache = self.forward(states, actions, batch)?;
        let da = self.action_gradient(&cache, q_grad)?;
        Ok((cache.q().to_vec(), da))
    }
}

/// With probability `eps` a uniform action over `[0, 1] × [−1, 1]`, otherwise the actor's.
pub fn select_action<R: Rng + ?Sized>(
    actor: &ActorNet,
    obs: &[f64],
    eps: f64,
    rng: &mut R,
) -> Result<[f64; ACTION_DIM], NetError> {
    if eps > 0.0 && rng.random::<f64>() < eps {
        return Ok([rng.random_range(0.0..=1.0), rng.random_range(-1.0..=1.0)]);
    }
    actor.act(obs)
}

/// Bellman targets `y = r + γ·Q'(s', μ'(s'))`, with no bootstrap on terminal transitions.
pub fn critic_target<P: Policy, Q: QFunction>(
    batch: &Batch,
    target_actor: &P,
    target_critic: &Q,
    gamma: f64,
) -> Result<Vec<f64>, NetError> {
    let next_actions = target_actor.actions(&batch.next_states, batch.size)?;
    let next_q = target_critic.q(&batch.next_states, &next_actions, batch.size)?;
    Ok(batch
        .rewards
        .iter()
        .zip(&next_q)
        .zip(&batch.dones)
        .map(|((&r, &q), &done)| if done { r } else { r + gamma * q })
        .collect())
}

/// One Adam step on the mean squared Bellman error; returns the loss before the step.
pub fn critic_update(
    critic: &mut TwoBranchCritic,
    adam: &mut AdamState,
    batch: &Batch,
    y: &[f64],
    lr: f64,
) -> Result<f64, NetError> {
    let n = batch.size as f64;
    let cache = critic.forward(&batch.states, &batch.actions, batch.size)?;
    let q = cache.q();
    let loss = q.iter().zip(y).map(|(q, y)| (q - y).powi(2)).sum::<f64>() / n;
    let dq: Vec<f64> = q.iter().zip(y).map(|(q, y)| 2.0 * (q - y) / n).collect();
    let (grads, _, _) = critic.backward(&cache, &dq)?;
    adam_step(critic.params_mut(), &grads, adam, lr);
    Ok(loss)
}

/// One Adam ascent step of the actor on mean Q(s, μ(s)); the critic is read only.
/// Returns the mean Q before the step.
pub fn actor_update<Q: QFunction>(
    actor: &mut ActorNet,
    critic: &Q,
    adam: &mut AdamState,
    batch: &Batch,
    lr: f64,
) -> Result<f64, NetError> {
    let n = batch.size;
    let cache = actor.forward(&batch.states, n)?;
    let actions = cache.actions();
    // minimise −mean Q
    let q_grad = vec![-1.0 / n as f64; n];
    let (q, da) = critic.q_and_action_grad(&batch.states, &actions, n, &q_grad)?;
    let (grads, _) = actor.backward(&cache, &da)?;
    adam_step(actor.params_mut(), &grads, adam, lr);
    Ok(q.iter().sum::<f64>() / n as f64)
}

/// Copies online parameters into the targets when `step` is a multiple of `period`.
/// Returns whether a sync happened.
pub fn hard_update_targets(
    actor: &ActorNet,
    critic: &TwoBranchCritic,
    target_actor: &mut ActorNet,
    target_critic: &mut TwoBranchCritic,
    step: u64,
    period: u64,
) -> bool {
    if step % period == 0 {
        target_actor.copy_from(actor);
        target_critic.copy_from(critic);
        true
    } else {
        false
    }
}

/// Online and target networks with their optimizers.
#[derive(Clone, Debug)]
pub struct DdpgAgent {
    pub actor: ActorNet,
    pub critic: TwoBranchCritic,
    pub target_actor: ActorNet,
    pub target_critic: TwoBranchCritic,
    pub actor_opt: AdamState,
    pub critic_opt: AdamState,
    /// Gradient updates performed so far.
    pub updates: u64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UpdateStats {
    pub critic_loss: f64,
    pub mean_q: f64,
    pub synced: bool,
}

impl DdpgAgent {
    pub fn new(actor: ActorNet, critic: TwoBranchCritic) -> Self {
        let actor_opt = AdamState::for_params(&actor.params());
        let critic_opt = AdamState::for_params(&critic.params());
        let mut target_actor = actor.clone();
        let mut target_critic = critic.clone();
        // step 0: targets start as exact copies
        hard_update_targets(&actor, &critic, &mut target_actor, &mut target_critic, 0, 1);
        Self {
            actor,
            critic,
            target_actor,
            target_critic,
            actor_opt,
            critic_opt,
            updates: 0,
        }
    }

    pub fn from_seed(seed: u64) -> Self {
        Self::new(
            ActorNet::new(seed.wrapping_mul(2).wrapping_add(1)),
            TwoBranchCritic::new(seed.wrapping_mul(2).wrapping_add(2)),
        )
    }

    /// Critic step, actor step against the freshly updated critic, then the
    /// scheduled target sync.
    pub fn update(&mut self, batch: &Batch, cfg: &DdpgConfig) -> Result<UpdateStats, DdpgError> {
        let y = critic_target(batch, &self.target_actor, &self.target_critic, cfg.gamma)?;
        let critic_loss = critic_update(&mut self.critic, &mut self.critic_opt, batch, &y, cfg.lr)?;
        let mean_q = actor_update(&mut self.actor, &self.critic, &mut self.actor_opt, batch, cfg.lr)?;
        self.updates += 1;
        let synced = hard_update_targets(
            &self.actor,
            &self.critic,
            &mut self.target_actor,
            &mut self.target_critic,
            self.updates,
            cfg.target_update_steps,
        );
        if !(self.actor.all_finite() && self.critic.all_finite()) || !critic_loss.is_finite() {
            return Err(DdpgError::NonFinite { update: self.updates });
        }
        Ok(UpdateStats {
            critic_loss,
            mean_q,
            synced,
        })
    }
}
