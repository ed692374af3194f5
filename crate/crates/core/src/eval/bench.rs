use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::planner::{Planner, PlannerInput};
use super::EvalError;
use crate::perception::{Observation, ObservationConfig, N_SECTORS};
use crate::sim::Command;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThroughputReport {
    pub planner: String,
    pub calls: usize,
    pub seconds: f64,
    pub decisions_per_sec: f64,
}

/// Observations with sector ranges in [0.15, max_range], goals within 5 m and
/// random previous commands.
pub fn random_observations(n: usize, cfg: &ObservationConfig, seed: u64) -> Vec<(Observation, Command)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let obs = Observation {
                sectors: (0..N_SECTORS).map(|_| rng.random_range(0.15..=cfg.max_range)).collect(),
                goal_distance: rng.random_range(0.0..5.0),
                goal_heading: rng.random_range(-std::f64::consts::PI..std::f64::consts::PI),
            };
            (obs, Command::new(rng.random_range(0.0..0.2), rng.random_range(-1.0..1.0)))
        })
        .collect()
}

/// Single-threaded wall-clock decision rate over `calls` decisions, cycling
/// through `inputs`, after `warmup` untimed calls.
pub fn throughput_bench(
    planner: &mut dyn Planner,
    inputs: &[(Observation, Command)],
    cfg: &ObservationConfig,
    warmup: usize,
    calls: usize,
) -> Result<ThroughputReport, EvalError> {
    assert!(!inputs.is_empty(), "throughput bench needs inputs");
    let prepared: Vec<_> = inputs.iter().map(|(o, c)| (o, o.normalized(cfg), *c)).collect();
    let run = |n: usize, planner: &mut dyn Planner| -> Result<f64, EvalError> {
        let mut sink = 0.0;
        for k in 0..n {
            let (obs, norm, last) = &prepared[k % prepared.len()];
            let input = PlannerInput {
                t: 0.0,
                obs,
                normalized: norm,
                last_cmd: *last,
            };
            let c = planner.decide(&input)?;
            sink += c.v + c.omega;
        }
        Ok(sink)
    };
    std::hint::black_box(run(warmup, planner)?);
    let start = Instant::now();
    std::hint::black_box(run(calls, planner)?);
    let seconds = start.elapsed().as_secs_f64();
    Ok(ThroughputReport {
        planner: planner.id(),
        calls,
        seconds,
        decisions_per_sec: calls as f64 / seconds,
    })
}
