use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Activation, Mlp, MlpCache, NetError, ParamGrads};
use crate::perception::OBS_DIM;

pub const ACTION_DIM: usize = 2;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActorDims {
    pub obs_dim: usize,
    pub hidden: Vec<usize>,
}

impl Default for ActorDims {
    fn default() -> Self {
        Self {
            obs_dim: OBS_DIM,
            hidden: vec![512, 256, 256],
        }
    }
}

/// Shared ReLU trunk with a sigmoid linear-speed head and a tanh turn-rate head.
///
/// Outputs are normalized actions: `v ∈ (0, 1)`, `ω ∈ (−1, 1)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ActorNet {
    pub trunk: Mlp,
    pub head_v: Mlp,
    pub head_omega: Mlp,
}

pub struct ActorCache {
    trunk: MlpCache,
    v: MlpCache,
    omega: MlpCache,
}

impl ActorCache {
    /// Row-major `batch × 2` actions `(v, ω)`.
    pub fn actions(&self) -> Vec<f64> {
        self.v
            .output()
            .iter()
            .zip(self.omega.output())
            .flat_map(|(&v, &w)| [v, w])
            .collect()
    }
}

impl ActorNet {
    pub fn new(seed: u64) -> Self {
        Self::with_dims(&ActorDims::default(), seed)
    }

    pub fn with_dims(dims: &ActorDims, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut trunk_dims = vec![dims.obs_dim];
        trunk_dims.extend(&dims.hidden);
        let trunk = Mlp::init(&trunk_dims, &vec![Activation::Relu; dims.hidden.len()], &mut rng);
        let last = *trunk_dims.last().unwrap();
        let head_v = Mlp::init(&[last, 1], &[Activation::Sigmoid], &mut rng);
        let head_omega = Mlp::init(&[last, 1], &[Activation::Tanh], &mut rng);
        Self {
            trunk,
            head_v,
            head_omega,
        }
    }

    pub fn zeros(dims: &ActorDims) -> Self {
        let mut trunk_dims = vec![dims.obs_dim];
        trunk_dims.extend(&dims.hidden);
        let last = *trunk_dims.last().unwrap();
        Self {
            trunk: Mlp::zeros(&trunk_dims, &vec![Activation::Relu; dims.hidden.len()]),
            head_v: Mlp::zeros(&[last, 1], &[Activation::Sigmoid]),
            head_omega: Mlp::zeros(&[last, 1], &[Activation::Tanh]),
        }
    }

    pub fn from_parts(trunk: Mlp, head_v: Mlp, head_omega: Mlp) -> Result<Self, NetError> {
        let ok = head_v.input_dim() == trunk.output_dim()
            && head_omega.input_dim() == trunk.output_dim()
            && head_v.dims().len() == 2
            && head_omega.dims().len() == 2
            && head_v.output_dim() == 1
            && head_omega.output_dim() == 1
            && head_v.activations() == [Activation::Sigmoid]
            && head_omega.activations() == [Activation::Tanh];
        if !ok {
            return Err(NetError::Architecture(
                "actor heads must be single 1-unit sigmoid/tanh layers on the trunk output".into(),
            ));
        }
        Ok(Self {
            trunk,
            head_v,
            head_omega,
        })
    }

    pub fn dims(&self) -> ActorDims {
        let d = self.trunk.dims();
        ActorDims {
            obs_dim: d[0],
            hidden: d[1..].to_vec(),
        }
    }

    pub fn obs_dim(&self) -> usize {
        self.trunk.input_dim()
    }

    pub fn n_params(&self) -> usize {
        self.trunk.n_params() + self.head_v.n_params() + self.head_omega.n_params()
    }

    pub fn forward(&self, states: &[f64], batch: usize) -> Result<ActorCache, NetError> {
        let trunk = self.trunk.forward(states, batch)?;
        let v = self.head_v.forward(trunk.output(), batch)?;
        let omega = self.head_omega.forward(trunk.output(), batch)?;
        Ok(ActorCache { trunk, v, omega })
    }

    /// Batched actions without caches.
    pub fn act_batch(&self, states: &[f64], batch: usize) -> Result<Vec<f64>, NetError> {
        let h = self.trunk.infer(states, batch)?;
        let v = self.head_v.infer(&h, batch)?;
        let w = self.head_omega.infer(&h, batch)?;
        Ok(v.into_iter().zip(w).flat_map(|(v, w)| [v, w]).collect())
    }

    /// Normalized action for a single observation.
    pub fn act(&self, obs: &[f64]) -> Result<[f64; ACTION_DIM], NetError> {
        let a = self.act_batch(obs, 1)?;
        Ok([a[0], a[1]])
    }

    /// Gradients of `Σ actions ⊙ action_grad` (`batch × 2`) w.r.t. parameters and states.
    pub fn backward(&self, cache: &ActorCache, action_grad: &[f64]) -> Result<(ParamGrads, Vec<f64>), NetError> {
        let batch = cache.trunk.batch();
        if action_grad.len() != batch * ACTION_DIM {
            return Err(NetError::DimensionMismatch {
                expected: batch * ACTION_DIM,
                got: action_grad.len(),
            });
        }
        let dv: Vec<f64> = action_grad.iter().step_by(2).copied().collect();
        let dw: Vec<f64> = action_grad.iter().skip(1).step_by(2).copied().collect();
        let (gv, hv) = self.head_v.backward(&cache.v, &dv)?;
        let (gw, hw) = self.head_omega.backward(&cache.omega, &dw)?;
        let dh: Vec<f64> = hv.iter().zip(&hw).map(|(a, b)| a + b).collect();
        let (mut grads, dx) = self.trunk.backward(&cache.trunk, &dh)?;
        grads.extend(gv);
        grads.extend(gw);
        Ok((grads, dx))
    }

    pub fn params(&self) -> Vec<&[f64]> {
        let mut p = self.trunk.params();
        p.extend(self.head_v.params());
        p.extend(self.head_omega.params());
        p
    }

    pub fn params_mut(&mut self) -> Vec<&mut [f64]> {
        let mut p = self.trunk.params_mut();
        p.extend(self.head_v.params_mut());
        p.extend(self.head_omega.params_mut());
        p
    }

    pub fn copy_from(&mut self, other: &ActorNet) {
        self.trunk.copy_from(&other.trunk);
        self.head_v.copy_from(&other.head_v);
        self.head_omega.copy_from(&other.head_omega);
    }

    pub fn all_finite(&self) -> bool {
        self.trunk.all_finite() && self.head_v.all_finite() && self.head_omega.all_finite()
    }
}
