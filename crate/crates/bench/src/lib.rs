//! Fixtures shared by the benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use uwbnav_core::ddpg::{DoneReason, ReplayBuffer, Transition};
use uwbnav_core::nn::ACTION_DIM;
use uwbnav_core::sim::{load_scenario, ScenarioSpec};
use uwbnav_core::OBS_DIM;

pub const S1: &str = include_str!("../../../scenarios/s1_analog.toml");

pub fn s1() -> ScenarioSpec {
    load_scenario(S1).expect("bundled scenario parses")
}

/// Replay buffer of `n` random transitions.
pub fn random_buffer(n: usize, seed: u64) -> ReplayBuffer {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut buf = ReplayBuffer::new(n);
    for _ in 0..n {
        let mut s = [0.0; OBS_DIM];
        let mut s_next = [0.0; OBS_DIM];
        s.iter_mut().for_each(|x| *x = rng.random_range(0.0..1.0));
        s_next.iter_mut().for_each(|x| *x = rng.random_range(0.0..1.0));
        let mut a = [0.0; ACTION_DIM];
        a[0] = rng.random_range(0.0..1.0);
        a[1] = rng.random_range(-1.0..1.0);
        buf.push(Transition {
            s,
            a,
            r: rng.random_range(-1.0..1.0),
            s_next,
            done: false,
            reason: DoneReason::Running,
        });
    }
    buf
}
