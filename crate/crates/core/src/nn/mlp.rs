use rand::Rng;
use serde::{Deserialize, Serialize};

use super::NetError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    Relu,
    Sigmoid,
    Tanh,
    Linear,
}

impl Activation {
    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Sigmoid => 1.0 / (1.0 + (-z).exp()),
            Activation::Tanh => z.tanh(),
            Activation::Linear => z,
        }
    }

    /// Derivative expressed through the activation output `y`.
    #[inline]
    fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => y * (1.0 - y),
            Activation::Tanh => 1.0 - y * y,
            Activation::Linear => 1.0,
        }
    }

    pub(crate) fn tag(self) -> u8 {
        match self {
            Activation::Relu => 0,
            Activation::Sigmoid => 1,
            Activation::Tanh => 2,
            Activation::Linear => 3,
        }
    }

    pub(crate) fn from_tag(tag: u8) -> Option<Self> {
        Some(match tag {
            0 => Activation::Relu,
            1 => Activation::Sigmoid,
            2 => Activation::Tanh,
            3 => Activation::Linear,
            _ => return None,
        })
    }
}

/// `out += x·W` for a single row, skipping zero inputs (ReLU outputs often are).
/// Avoids the packing a general GEMM does on every call.
pub(crate) fn row_axpy<T>(x: &[T], weights: &[T], out: &mut [T])
where
    T: Copy + PartialEq + Default + std::ops::Mul<Output = T> + std::ops::AddAssign,
{
    let zero = T::default();
    for (&xi, w) in x.iter().zip(weights.chunks_exact(out.len())) {
        if xi != zero {
            out.iter_mut().zip(w).for_each(|(o, &w)| *o += xi * w);
        }
    }
}

/// Fully connected layer. `weights` is row-major `in_dim × out_dim`, so a
/// row-major batch `X` maps to `X·W + b`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dense {
    pub in_dim: usize,
    pub out_dim: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

impl Dense {
    pub fn zeros(in_dim: usize, out_dim: usize, activation: Activation) -> Self {
        Self {
            in_dim,
            out_dim,
            weights: vec![0.0; in_dim * out_dim],
            bias: vec![0.0; out_dim],
            activation,
        }
    }

    /// He-uniform weights for ReLU layers, Glorot-uniform otherwise; zero biases.
    pub fn init<R: Rng + ?Sized>(in_dim: usize, out_dim: usize, activation: Activation, rng: &mut R) -> Self {
        let limit = match activation {
            Activation::Relu => (6.0 / in_dim as f64).sqrt(),
            _ => (6.0 / (in_dim + out_dim) as f64).sqrt(),
        };
        let weights = (0..in_dim * out_dim).map(|_| rng.random_range(-limit..=limit)).collect();
        Self {
            in_dim,
            out_dim,
            weights,
            bias: vec![0.0; out_dim],
            activation,
        }
    }

    pub fn n_params(&self) -> usize {
        self.weights.len() + self.bias.len()
    }

    /// `out = act(input·W + b)` for a row-major batch.
    fn forward_into(&self, input: &[f64], batch: usize, out: &mut [f64]) {
        for row in out.chunks_exact_mut(self.out_dim) {
            row.copy_from_slice(&self.bias);
        }
        if batch == 1 {
            row_axpy(input, &self.weights, out);
        } else {
            self.gemm_into(input, batch, out);
        }
        if self.activation != Activation::Linear {
            let act = self.activation;
            out.iter_mut().for_each(|z| *z = act.apply(*z));
        }
    }

    fn gemm_into(&self, input: &[f64], batch: usize, out: &mut [f64]) {
        // SAFETY: slice lengths are batch×in, in×out and batch×out, matching the strides.
        unsafe {
            matrixmultiply::dgemm(
                batch,
                self.in_dim,
                self.out_dim,
                1.0,
                input.as_ptr(),
                self.in_dim as isize,
                1,
                self.weights.as_ptr(),
                self.out_dim as isize,
                1,
                1.0,
                out.as_mut_ptr(),
                self.out_dim as isize,
                1,
            );
        }
    }
}

/// Parameter gradients, one buffer per parameter tensor in `params()` order.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamGrads(pub Vec<Vec<f64>>);

impl ParamGrads {
    pub fn extend(&mut self, other: ParamGrads) {
        self.0.extend(other.0);
    }

    pub fn all_finite(&self) -> bool {
        self.0.iter().flatten().all(|g| g.is_finite())
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.0.iter().flatten().copied().collect()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().flatten().all(|&g| g == 0.0)
    }
}

/// Activations recorded by [`Mlp::forward`] and consumed by [`Mlp::backward`].
///
/// A cache is tied to the exact parameter values it was computed with;
/// mutating the network through `params_mut` invalidates it and a later
/// `backward` returns [`NetError::StaleCache`].
#[derive(Clone, Debug)]
pub struct MlpCache {
    batch: usize,
    generation: u64,
    /// `acts[0]` is the input, `acts[l + 1]` the output of layer `l`.
    acts: Vec<Vec<f64>>,
}

impl MlpCache {
    pub fn output(&self) -> &[f64] {
        self.acts.last().map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn batch(&self) -> usize {
        self.batch
    }
}

/// Chain of dense layers.
#[derive(Clone, Debug)]
pub struct Mlp {
    layers: Vec<Dense>,
    generation: u64,
}

impl PartialEq for Mlp {
    fn eq(&self, other: &Self) -> bool {
        self.layers == other.layers
    }
}

impl Mlp {
    pub fn from_layers(layers: Vec<Dense>) -> Result<Self, NetError> {
        if layers.is_empty() {
            return Err(NetError::Architecture("network has no layers".into()));
        }
        for (i, w) in layers.windows(2).enumerate() {
            if w[0].out_dim != w[1].in_dim {
                return Err(NetError::Architecture(format!(
                    "layer {i} outputs {} but layer {} expects {}",
                    w[0].out_dim,
                    i + 1,
                    w[1].in_dim
                )));
            }
        }
        for (i, l) in layers.iter().enumerate() {
            if l.weights.len() != l.in_dim * l.out_dim || l.bias.len() != l.out_dim {
                return Err(NetError::Architecture(format!("layer {i} parameter sizes do not match its shape")));
            }
        }
        Ok(Self { layers, generation: 0 })
    }

    /// `dims = [in, h1, ..., out]`, one activation per layer.
    pub fn init<R: Rng + ?Sized>(dims: &[usize], activations: &[Activation], rng: &mut R) -> Self {
        assert_eq!(dims.len(), activations.len() + 1, "one activation per layer");
        let layers = dims
            .windows(2)
            .zip(activations)
            .map(|(d, &a)| Dense::init(d[0], d[1], a, rng))
            .collect();
        Self { layers, generation: 0 }
    }

    pub fn zeros(dims: &[usize], activations: &[Activation]) -> Self {
        assert_eq!(dims.len(), activations.len() + 1, "one activation per layer");
        let layers = dims
            .windows(2)
            .zip(activations)
            .map(|(d, &a)| Dense::zeros(d[0], d[1], a))
            .collect();
        Self { layers, generation: 0 }
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(Dense::n_params).sum()
    }

    /// `[in, h1, ..., out]`.
    pub fn dims(&self) -> Vec<usize> {
        std::iter::once(self.input_dim())
            .chain(self.layers.iter().map(|l| l.out_dim))
            .collect()
    }

    pub fn activations(&self) -> Vec<Activation> {
        self.layers.iter().map(|l| l.activation).collect()
    }

    pub fn params(&self) -> Vec<&[f64]> {
        self.layers
            .iter()
            .flat_map(|l| [l.weights.as_slice(), l.bias.as_slice()])
            .collect()
    }

    /// Mutable parameter views; invalidates outstanding caches.
    pub fn params_mut(&mut self) -> Vec<&mut [f64]> {
        self.generation += 1;
        self.layers
            .iter_mut()
            .flat_map(|l| [l.weights.as_mut_slice(), l.bias.as_mut_slice()])
            .collect()
    }

    pub fn all_finite(&self) -> bool {
        self.params().iter().all(|p| p.iter().all(|v| v.is_finite()))
    }

    /// Replaces every parameter with `other`'s (same architecture required).
    pub fn copy_from(&mut self, other: &Mlp) {
        assert_eq!(self.dims(), other.dims(), "copy between different architectures");
        for (dst, src) in self.params_mut().into_iter().zip(other.params()) {
            dst.copy_from_slice(src);
        }
    }

    fn check_input(&self, input: &[f64], batch: usize) -> Result<(), NetError> {
        let expected = batch * self.input_dim();
        if input.len() != expected || batch == 0 {
            return Err(NetError::DimensionMismatch {
                expected,
                got: input.len(),
            });
        }
        Ok(())
    }

    /// Batched forward pass keeping every activation for `backward`.
    pub fn forward(&self, input: &[f64], batch: usize) -> Result<MlpCache, NetError> {
        self.check_input(input, batch)?;
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(input.to_vec());
        for layer in &self.layers {
            let mut out = vec![0.0; batch * layer.out_dim];
            layer.forward_into(acts.last().unwrap(), batch, &mut out);
            acts.push(out);
        }
        Ok(MlpCache {
            batch,
            generation: self.generation,
            acts,
        })
    }

    /// Forward pass without retaining intermediate activations.
    pub fn infer(&self, input: &[f64], batch: usize) -> Result<Vec<f64>, NetError> {
        self.check_input(input, batch)?;
        let mut cur = input.to_vec();
        for layer in &self.layers {
            let mut out = vec![0.0; batch * layer.out_dim];
            layer.forward_into(&cur, batch, &mut out);
            cur = out;
        }
        Ok(cur)
    }

    /// Reverse-mode gradients of `Σ output ⊙ output_grad` with respect to every
    /// parameter and to the input batch.
    pub fn backward(&self, cache: &MlpCache, output_grad: &[f64]) -> Result<(ParamGrads, Vec<f64>), NetError> {
        self.backward_impl(cache, output_grad, true)
    }

    /// Like [`backward`](Self::backward) but only the input gradient is produced.
    pub fn input_gradient(&self, cache: &MlpCache, output_grad: &[f64]) -> Result<Vec<f64>, NetError> {
        self.backward_impl(cache, output_grad, false).map(|(_, dx)| dx)
    }

    fn backward_impl(
        &self,
        cache: &MlpCache,
        output_grad: &[f64],
        want_params: bool,
    ) -> Result<(ParamGrads, Vec<f64>), NetError> {
        if cache.generation != self.generation || cache.acts.len() != self.layers.len() + 1 {
            return Err(NetError::StaleCache);
        }
        let batch = cache.batch;
        if output_grad.len() != batch * self.output_dim() {
            return Err(NetError::DimensionMismatch {
                expected: batch * self.output_dim(),
                got: output_grad.len(),
            });
        }
        let mut grads: Vec<Vec<f64>> = Vec::new();
        if want_params {
            grads.resize(2 * self.layers.len(), Vec::new());
        }
        let mut delta = output_grad.to_vec();
        for (l, layer) in self.layers.iter().enumerate().rev() {
            let out = &cache.acts[l + 1];
            let input = &cache.acts[l];
            if layer.activation != Activation::Linear {
                let act = layer.activation;
                delta
                    .iter_mut()
                    .zip(out)
                    .for_each(|(d, &y)| *d *= act.derivative_from_output(y));
            }
            if want_params {
                let mut dw = vec![0.0; layer.in_dim * layer.out_dim];
                // SAFETY: Xᵀ is read through strides (1, in_dim) of the batch×in input.
                unsafe {
                    matrixmultiply::dgemm(
                        layer.in_dim,
                        batch,
                        layer.out_dim,
                        1.0,
                        input.as_ptr(),
                        1,
                        layer.in_dim as isize,
                        delta.as_ptr(),
                        layer.out_dim as isize,
                        1,
                        0.0,
                        dw.as_mut_ptr(),
                        layer.out_dim as isize,
                        1,
                    );
                }
                let mut db = vec![0.0; layer.out_dim];
                for row in delta.chunks_exact(layer.out_dim) {
                    db.iter_mut().zip(row).for_each(|(b, d)| *b += d);
                }
                grads[2 * l] = dw;
                grads[2 * l + 1] = db;
            }
            let mut dx = vec![0.0; batch * layer.in_dim];
            // SAFETY: Wᵀ is read through strides (1, out_dim) of the in×out weights.
            unsafe {
                matrixmultiply::dgemm(
                    batch,
                    layer.out_dim,
                    layer.in_dim,
                    1.0,
                    delta.as_ptr(),
                    layer.out_dim as isize,
                    1,
                    layer.weights.as_ptr(),
                    1,
                    layer.out_dim as isize,
                    0.0,
                    dx.as_mut_ptr(),
                    layer.in_dim as isize,
                    1,
                );
            }
            delta = dx;
        }
        Ok((ParamGrads(grads), delta))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_network_heads() {
        let sig = Mlp::zeros(&[3, 1], &[Activation::Sigmoid]);
        assert_eq!(sig.infer(&[1.0, -2.0, 3.0], 1).unwrap(), vec![0.5]);
        let tanh = Mlp::zeros(&[3, 1], &[Activation::Tanh]);
        assert_eq!(tanh.infer(&[1.0, -2.0, 3.0], 1).unwrap(), vec![0.0]);
    }

    #[test]
    fn identity_layer() {
        let mut l = Dense::zeros(3, 3, Activation::Linear);
        for i in 0..3 {
            l.weights[i * 3 + i] = 1.0;
        }
        let net = Mlp::from_layers(vec![l]).unwrap();
        let x = [0.25, -1.5, 7.0];
        assert_eq!(net.infer(&x, 1).unwrap(), x.to_vec());
    }

    #[test]
    fn scalar_chain_rule() {
        let mut l = Dense::zeros(1, 1, Activation::Linear);
        l.weights[0] = 3.0;
        let net = Mlp::from_layers(vec![l]).unwrap();
        let cache = net.forward(&[2.0], 1).unwrap();
        assert_eq!(cache.output(), &[6.0]);
        let (g, dx) = net.backward(&cache, &[1.0]).unwrap();
        assert_eq!(g.0[0], vec![2.0]);
        assert_eq!(g.0[1], vec![1.0]);
        assert_eq!(dx, vec![3.0]);
    }

    #[test]
    fn relu_blocks_negative_preactivation() {
        let mut l = Dense::zeros(1, 1, Activation::Relu);
        l.weights[0] = 1.0;
        l.bias[0] = -5.0;
        let net = Mlp::from_layers(vec![l]).unwrap();
        let cache = net.forward(&[2.0], 1).unwrap();
        let (g, dx) = net.backward(&cache, &[1.0]).unwrap();
        assert!(g.is_zero());
        assert_eq!(dx, vec![0.0]);
    }

    #[test]
    fn stale_cache_is_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut net = Mlp::init(&[4, 3, 2], &[Activation::Relu, Activation::Linear], &mut rng);
        let cache = net.forward(&[0.1; 4], 1).unwrap();
        net.params_mut()[0][0] += 1.0;
        assert!(matches!(net.backward(&cache, &[1.0, 1.0]), Err(NetError::StaleCache)));
    }

    #[test]
    fn dimension_mismatch() {
        let net = Mlp::zeros(&[4, 2], &[Activation::Linear]);
        assert!(matches!(net.infer(&[1.0; 3], 1), Err(NetError::DimensionMismatch { expected: 4, got: 3 })));
    }

    #[test]
    fn init_is_deterministic_and_bounded() {
        let dims = [256, 64, 1];
        let acts = [Activation::Relu, Activation::Tanh];
        let a = Mlp::init(&dims, &acts, &mut ChaCha8Rng::seed_from_u64(9));
        let b = Mlp::init(&dims, &acts, &mut ChaCha8Rng::seed_from_u64(9));
        assert_eq!(a, b);
        let he = (6.0f64 / 256.0).sqrt();
        assert!(a.layers()[0].weights.iter().all(|w| w.abs() <= he));
        let xavier = (6.0f64 / 65.0).sqrt();
        assert!(a.layers()[1].weights.iter().all(|w| w.abs() <= xavier));
        assert!(a.layers().iter().all(|l| l.bias.iter().all(|&b| b == 0.0)));
    }

    #[test]
    fn forward_is_pure() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let net = Mlp::init(&[5, 7, 2], &[Activation::Relu, Activation::Sigmoid], &mut rng);
        let x: Vec<f64> = (0..15).map(|i| i as f64 * 0.1 - 0.7).collect();
        assert_eq!(net.infer(&x, 3).unwrap(), net.infer(&x, 3).unwrap());
        assert_eq!(net.forward(&x, 3).unwrap().output(), net.infer(&x, 3).unwrap().as_slice());
    }
}
