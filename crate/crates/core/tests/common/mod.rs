//! Finite-difference gradient checks shared by the gradient and acceptance targets.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use uwbnav_core::nn::{ActorNet, TwoBranchCritic, ACTION_DIM};
use uwbnav_core::OBS_DIM;

pub const H: f64 = 1e-5;
pub const BATCH: usize = 4;
/// Central differences at `h` and `h/2` further apart than this (relative)
/// mean a ReLU kink lies inside the stencil; on smooth paths they agree to
/// roundoff.
const KINK: f64 = 1e-6;

/// Worst relative error over the accepted draws.
#[derive(Clone, Copy, Debug, Default)]
pub struct GradCheck {
    pub draws: usize,
    /// Draws discarded because the loss is not differentiable inside the stencil.
    pub redrawn: usize,
    pub max_rel_err: f64,
}

impl GradCheck {
    fn record(&mut self, analytic: f64, numeric: f64) {
        self.max_rel_err = self.max_rel_err.max(rel_err(analytic, numeric));
        self.draws += 1;
    }
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

/// Central difference from loss values at `−h, −h/2, h/2, h`, or `None` across a kink.
fn central([down, half_down, half_up, up]: [f64; 4]) -> Option<f64> {
    let wide = (up - down) / (2.0 * H);
    let narrow = (half_up - half_down) / H;
    (rel_err(wide, narrow) <= KINK).then_some(wide)
}

/// `f` evaluated at `−h, −h/2, h/2, h`.
fn stencil(mut f: impl FnMut(f64) -> f64) -> [f64; 4] {
    [-H, -H / 2.0, H / 2.0, H].map(&mut f)
}

fn normal_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

fn normalize(v: &mut [Vec<f64>]) {
    let norm = v.iter().flatten().map(|x| x * x).sum::<f64>().sqrt();
    v.iter_mut().flatten().for_each(|x| *x /= norm);
}

/// Unit direction halfway between the analytic gradient and a random one, so
/// the projected derivative never vanishes by accident while every coordinate
/// still contributes.
fn probe_dir(rng: &mut ChaCha8Rng, grad: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut g = grad.to_vec();
    normalize(&mut g);
    let mut r: Vec<Vec<f64>> = grad.iter().map(|t| normal_vec(rng, t.len())).collect();
    normalize(&mut r);
    let mut u: Vec<Vec<f64>> = g.iter().zip(&r).map(|(a, b)| a.iter().zip(b).map(|(x, y)| x + y).collect()).collect();
    normalize(&mut u);
    u
}

fn dot(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter().flatten().zip(b.iter().flatten()).map(|(x, y)| x * y).sum()
}

fn nudge(params: Vec<&mut [f64]>, dirs: &[Vec<f64>], eps: f64) {
    for (p, d) in params.into_iter().zip(dirs) {
        p.iter_mut().zip(d).for_each(|(p, d)| *p += eps * d);
    }
}

fn shifted(x: &[f64], dir: &[f64], eps: f64) -> Vec<f64> {
    x.iter().zip(dir).map(|(x, d)| x + eps * d).collect()
}

fn states(rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..BATCH * OBS_DIM).map(|_| rng.random_range(0.0..1.0)).collect()
}

fn actions(rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..BATCH)
        .flat_map(|_| [rng.random_range(0.0..1.0), rng.random_range(-1.0..1.0)])
        .collect()
}

/// Loss values along `u` in parameter space at the stencil offsets.
fn param_stencil<N>(net: &mut N, u: &[Vec<f64>], params: fn(&mut N) -> Vec<&mut [f64]>, loss: impl Fn(&N) -> f64) -> [f64; 4] {
    stencil(|eps| {
        nudge(params(net), u, eps);
        let l = loss(net);
        nudge(params(net), u, -eps);
        l
    })
}

/// Directional derivatives of `L = Σ actor(s) ⊙ g` along probe directions in
/// parameter space and in state space, `draws` accepted draws.
pub fn actor_gradcheck(draws: usize, seed: u64) -> (GradCheck, GradCheck) {
    let mut params = GradCheck::default();
    let mut inputs = GradCheck::default();
    let mut k = 0u64;
    while params.draws < draws {
        k += 1;
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(1000) + k);
        let mut net = ActorNet::new(seed + k);
        let s = states(&mut rng);
        let g = normal_vec(&mut rng, BATCH * ACTION_DIM);
        let loss_at = |net: &ActorNet, s: &[f64]| -> f64 {
            net.act_batch(s, BATCH).unwrap().iter().zip(&g).map(|(a, g)| a * g).sum()
        };
        let cache = net.forward(&s, BATCH).unwrap();
        let (grads, ds) = net.backward(&cache, &g).unwrap();

        let u = probe_dir(&mut rng, &grads.0);
        let along_u = param_stencil(&mut net, &u, ActorNet::params_mut, |n| loss_at(n, &s));
        let ds = vec![ds];
        let w = probe_dir(&mut rng, &ds);
        let input_fd = central(stencil(|eps| loss_at(&net, &shifted(&s, &w[0], eps))));
        match (central(along_u), input_fd) {
            (Some(p), Some(i)) => {
                params.record(dot(&grads.0, &u), p);
                inputs.record(dot(&ds, &w), i);
            }
            _ => {
                params.redrawn += 1;
                inputs.redrawn += 1;
            }
        }
    }
    (params, inputs)
}

/// As [`actor_gradcheck`] for `L = Σ q(s, a) ⊙ g`; the second result covers the action input.
pub fn critic_gradcheck(draws: usize, seed: u64) -> (GradCheck, GradCheck) {
    let mut params = GradCheck::default();
    let mut inputs = GradCheck::default();
    let mut k = 0u64;
    while params.draws < draws {
        k += 1;
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(1000) + 500 + k);
        let mut net = TwoBranchCritic::new(seed + k);
        let s = states(&mut rng);
        let a = actions(&mut rng);
        let g = normal_vec(&mut rng, BATCH);
        let loss_at = |net: &TwoBranchCritic, a: &[f64]| -> f64 {
            net.q_values(&s, a, BATCH).unwrap().iter().zip(&g).map(|(q, g)| q * g).sum()
        };
        let cache = net.forward(&s, &a, BATCH).unwrap();
        let (grads, _, da) = net.backward(&cache, &g).unwrap();
        assert_eq!(da, net.action_gradient(&cache, &g).unwrap());

        let u = probe_dir(&mut rng, &grads.0);
        let along_u = param_stencil(&mut net, &u, TwoBranchCritic::params_mut, |n| loss_at(n, &a));
        let da = vec![da];
        let w = probe_dir(&mut rng, &da);
        let input_fd = central(stencil(|eps| loss_at(&net, &shifted(&a, &w[0], eps))));
        match (central(along_u), input_fd) {
            (Some(p), Some(i)) => {
                params.record(dot(&grads.0, &u), p);
                inputs.record(dot(&da, &w), i);
            }
            _ => {
                params.redrawn += 1;
                inputs.redrawn += 1;
            }
        }
    }
    (params, inputs)
}

/// Central differences on single coordinates: `(tensor, index, analytic, numeric)`
/// for `n` random actor parameters whose analytic gradient is not exactly zero.
pub fn actor_coordinates(n: usize, seed: u64) -> Vec<(usize, usize, f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut net = ActorNet::new(seed);
    let s = states(&mut rng);
    let g = normal_vec(&mut rng, BATCH * ACTION_DIM);
    let loss = |net: &ActorNet| -> f64 { net.act_batch(&s, BATCH).unwrap().iter().zip(&g).map(|(a, g)| a * g).sum() };
    let cache = net.forward(&s, BATCH).unwrap();
    let (grads, _) = net.backward(&cache, &g).unwrap();
    let mut out = Vec::new();
    while out.len() < n {
        let t = rng.random_range(0..grads.0.len());
        let i = rng.random_range(0..grads.0[t].len());
        let analytic = grads.0[t][i];
        if analytic == 0.0 {
            continue;
        }
        net.params_mut()[t][i] += H;
        let up = loss(&net);
        net.params_mut()[t][i] -= 2.0 * H;
        let down = loss(&net);
        net.params_mut()[t][i] += H;
        out.push((t, i, analytic, (up - down) / (2.0 * H)));
    }
    out
}
