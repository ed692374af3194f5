//! Single-precision copy of an actor for fast single-observation inference.

use super::mlp::row_axpy;
use super::{Activation, ActorNet, Mlp};

#[derive(Clone, Debug)]
struct LayerF32 {
    in_dim: usize,
    weights: Vec<f32>,
    bias: Vec<f32>,
    activation: Activation,
}

impl LayerF32 {
    fn forward(&self, x: &[f32], out: &mut Vec<f32>) {
        out.clear();
        out.extend_from_slice(&self.bias);
        row_axpy(x, &self.weights, out);
        match self.activation {
            Activation::Relu => out.iter_mut().for_each(|z| *z = z.max(0.0)),
            Activation::Sigmoid => out.iter_mut().for_each(|z| *z = 1.0 / (1.0 + (-*z).exp())),
            Activation::Tanh => out.iter_mut().for_each(|z| *z = z.tanh()),
            Activation::Linear => {}
        }
    }
}

fn convert(net: &Mlp) -> Vec<LayerF32> {
    net.layers()
        .iter()
        .map(|l| LayerF32 {
            in_dim: l.in_dim,
            weights: l.weights.iter().map(|&w| w as f32).collect(),
            bias: l.bias.iter().map(|&b| b as f32).collect(),
            activation: l.activation,
        })
        .collect()
}

/// Immutable f32 snapshot of an [`ActorNet`]; safe to share across threads.
#[derive(Clone, Debug)]
pub struct ActorF32 {
    trunk: Vec<LayerF32>,
    head_v: LayerF32,
    head_omega: LayerF32,
}

impl From<&ActorNet> for ActorF32 {
    fn from(actor: &ActorNet) -> Self {
        Self {
            trunk: convert(&actor.trunk),
            head_v: convert(&actor.head_v).remove(0),
            head_omega: convert(&actor.head_omega).remove(0),
        }
    }
}

impl ActorF32 {
    /// Normalized `(v, ω)` for one observation.
    pub fn act(&self, obs: &[f64]) -> [f64; 2] {
        assert_eq!(obs.len(), self.trunk[0].in_dim, "observation length");
        let mut cur: Vec<f32> = obs.iter().map(|&v| v as f32).collect();
        let mut next = Vec::new();
        for layer in &self.trunk {
            layer.forward(&cur, &mut next);
            std::mem::swap(&mut cur, &mut next);
        }
        self.head_v.forward(&cur, &mut next);
        let v = next[0];
        self.head_omega.forward(&cur, &mut next);
        [v as f64, next[0] as f64]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::ActorDims;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn f32_path_tracks_f64_path() {
        let actor = ActorNet::with_dims(&ActorDims::default(), 12);
        let fast = ActorF32::from(&actor);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let x: Vec<f64> = (0..62).map(|_| rng.random_range(0.0..1.0)).collect();
            let a = actor.act(&x).unwrap();
            let b = fast.act(&x);
            assert!((a[0] - b[0]).abs() < 1e-4 && (a[1] - b[1]).abs() < 1e-4, "{a:?} {b:?}");
        }
    }
}
