use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::actor::ACTION_DIM;
use super::{Activation, Mlp, MlpCache, NetError, ParamGrads};
use crate::perception::OBS_DIM;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CriticDims {
    pub obs_dim: usize,
    pub act_dim: usize,
    pub state_hidden: usize,
    pub action_hidden: usize,
    pub trunk_hidden: Vec<usize>,
}

impl Default for CriticDims {
    fn default() -> Self {
        Self {
            obs_dim: OBS_DIM,
            act_dim: ACTION_DIM,
            state_hidden: 256,
            action_hidden: 64,
            trunk_hidden: vec![256, 128],
        }
    }
}

/// Q(s, a): separate first layers for state and action, concatenated and fed
/// to a ReLU trunk ending in one linear unit.
#[derive(Clone, Debug, PartialEq)]
pub struct TwoBranchCritic {
    pub state_branch: Mlp,
    pub action_branch: Mlp,
    pub trunk: Mlp,
}

pub struct CriticCache {
    state: MlpCache,
    action: MlpCache,
    trunk: MlpCache,
}

impl CriticCache {
    pub fn q(&self) -> &[f64] {
        self.trunk.output()
    }
}

impl TwoBranchCritic {
    pub fn new(seed: u64) -> Self {
        Self::with_dims(&CriticDims::default(), seed)
    }

    pub fn with_dims(d: &CriticDims, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let state_branch = Mlp::init(&[d.obs_dim, d.state_hidden], &[Activation::Relu], &mut rng);
        let action_branch = Mlp::init(&[d.act_dim, d.action_hidden], &[Activation::Relu], &mut rng);
        let (dims, acts) = Self::trunk_shape(d);
        let trunk = Mlp::init(&dims, &acts, &mut rng);
        Self {
            state_branch,
            action_branch,
            trunk,
        }
    }

    pub fn zeros(d: &CriticDims) -> Self {
        let (dims, acts) = Self::trunk_shape(d);
        Self {
            state_branch: Mlp::zeros(&[d.obs_dim, d.state_hidden], &[Activation::Relu]),
            action_branch: Mlp::zeros(&[d.act_dim, d.action_hidden], &[Activation::Relu]),
            trunk: Mlp::zeros(&dims, &acts),
        }
    }

    fn trunk_shape(d: &CriticDims) -> (Vec<usize>, Vec<Activation>) {
        let mut dims = vec![d.state_hidden + d.action_hidden];
        dims.extend(&d.trunk_hidden);
        dims.push(1);
        let mut acts = vec![Activation::Relu; d.trunk_hidden.len()];
        acts.push(Activation::Linear);
        (dims, acts)
    }

    pub fn from_parts(state_branch: Mlp, action_branch: Mlp, trunk: Mlp) -> Result<Self, NetError> {
        let ok = trunk.input_dim() == state_branch.output_dim() + action_branch.output_dim()
            && trunk.output_dim() == 1
            && trunk.activations().last() == Some(&Activation::Linear);
        if !ok {
            return Err(NetError::Architecture(
                "critic trunk must take both branch outputs and end in one linear unit".into(),
            ));
        }
        Ok(Self {
            state_branch,
            action_branch,
            trunk,
        })
    }

    pub fn dims(&self) -> CriticDims {
        let t = self.trunk.dims();
        CriticDims {
            obs_dim: self.state_branch.input_dim(),
            act_dim: self.action_branch.input_dim(),
            state_hidden: self.state_branch.output_dim(),
            action_hidden: self.action_branch.output_dim(),
            trunk_hidden: t[1..t.len() - 1].to_vec(),
        }
    }

    pub fn n_params(&self) -> usize {
        self.state_branch.n_params() + self.action_branch.n_params() + self.trunk.n_params()
    }

    pub fn forward(&self, states: &[f64], actions: &[f64], batch: usize) -> Result<CriticCache, NetError> {
        let state = self.state_branch.forward(states, batch)?;
        let action = self.action_branch.forward(actions, batch)?;
        let joined = concat_rows(
            state.output(),
            self.state_branch.output_dim(),
            action.output(),
            self.action_branch.output_dim(),
        );
        let trunk = self.trunk.forward(&joined, batch)?;
        Ok(CriticCache { state, action, trunk })
    }

    pub fn q_values(&self, states: &[f64], actions: &[f64], batch: usize) -> Result<Vec<f64>, NetError> {
        let s = self.state_branch.infer(states, batch)?;
        let a = self.action_branch.infer(actions, batch)?;
        let joined = concat_rows(&s, self.state_branch.output_dim(), &a, self.action_branch.output_dim());
        self.trunk.infer(&joined, batch)
    }

    /// Gradients of `Σ q ⊙ q_grad` w.r.t. parameters, states and actions.
    pub fn backward(
        &self,
        cache: &CriticCache,
        q_grad: &[f64],
    ) -> Result<(ParamGrads, Vec<f64>, Vec<f64>), NetError> {
        let (trunk_grads, d_joined) = self.trunk.backward(&cache.trunk, q_grad)?;
        let (ds, da) = self.split_rows(&d_joined);
        let (mut grads, d_states) = self.state_branch.backward(&cache.state, &ds)?;
        let (action_grads, d_actions) = self.action_branch.backward(&cache.action, &da)?;
        grads.extend(action_grads);
        grads.extend(trunk_grads);
        Ok((grads, d_states, d_actions))
    }

    /// ∂(Σ q ⊙ q_grad)/∂actions only; parameter gradients are not formed.
    pub fn action_gradient(&self, cache: &CriticCache, q_grad: &[f64]) -> Result<Vec<f64>, NetError> {
        let d_joined = self.trunk.input_gradient(&cache.trunk, q_grad)?;
        let (_, da) = self.split_rows(&d_joined);
        self.action_branch.input_gradient(&cache.action, &da)
    }

    fn split_rows(&self, joined: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let ns = self.state_branch.output_dim();
        let na = self.action_branch.output_dim();
        let mut ds = Vec::with_capacity(joined.len() / (ns + na) * ns);
        let mut da = Vec::with_capacity(joined.len() / (ns + na) * na);
        for row in joined.chunks_exact(ns + na) {
            ds.extend_from_slice(&row[..ns]);
            da.extend_from_slice(&row[ns..]);
        }
        (ds, da)
    }

    pub fn params(&self) -> Vec<&[f64]> {
        let mut p = self.state_branch.params();
        p.extend(self.action_branch.params());
        p.extend(self.trunk.params());
        p
    }

    pub fn params_mut(&mut self) -> Vec<&mut [f64]> {
        let mut p = self.state_branch.params_mut();
        p.extend(self.action_branch.params_mut());
        p.extend(self.trunk.params_mut());
        p
    }

    pub fn copy_from(&mut self, other: &TwoBranchCritic) {
        self.state_branch.copy_from(&other.state_branch);
        self.action_branch.copy_from(&other.action_branch);
        self.trunk.copy_from(&other.trunk);
    }

    pub fn all_finite(&self) -> bool {
        self.state_branch.all_finite() && self.action_branch.all_finite() && self.trunk.all_finite()
    }
}

fn concat_rows(a: &[f64], na: usize, b: &[f64], nb: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    for (ra, rb) in a.chunks_exact(na).zip(b.chunks_exact(nb)) {
        out.extend_from_slice(ra);
        out.extend_from_slice(rb);
    }
    out
}
