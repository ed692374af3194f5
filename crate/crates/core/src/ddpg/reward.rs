use serde::{Deserialize, Serialize};

use super::config::RewardConfig;

/// Why a transition ended (or `Running` if it did not).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DoneReason {
    Goal,
    Collision,
    Timeout,
    Running,
}

impl DoneReason {
    pub fn is_terminal(self) -> bool {
        self != DoneReason::Running
    }
}

/// h_R = 1 − (ω_prev / (divisor · f) − heading)².
pub fn heading_reward(omega_prev: f64, heading: f64, control_freq: f64, cfg: &RewardConfig) -> f64 {
    let e = omega_prev / (cfg.heading_divisor * control_freq) - heading;
    1.0 - e * e
}

/// Goal and collision give fixed rewards; otherwise the signed progress
/// `d_prev − d_curr` is scaled by the heading reward, floored at
/// `cfg.heading_floor` when set.
pub fn compute_reward(
    d_prev: f64,
    d_curr: f64,
    heading: f64,
    omega_prev: f64,
    event: DoneReason,
    control_freq: f64,
    cfg: &RewardConfig,
) -> f64 {
    match event {
        DoneReason::Goal => cfg.goal,
        DoneReason::Collision => cfg.collision,
        DoneReason::Timeout | DoneReason::Running => {
            let mut h = heading_reward(omega_prev, heading, control_freq, cfg);
            if let Some(floor) = cfg.heading_floor {
                h = h.max(floor);
            }
            cfg.shaping_gain * h * cfg.distance_gain * (d_prev - d_curr)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const F: f64 = 1.0 / 0.33;

    #[test]
    fn terminal_rewards() {
        let cfg = RewardConfig::default();
        assert_eq!(compute_reward(1.0, 0.9, 0.3, 0.5, DoneReason::Goal, F, &cfg), 1000.0);
        assert_eq!(compute_reward(1.0, 0.9, 0.3, 0.5, DoneReason::Collision, F, &cfg), -200.0);
    }

    #[test]
    fn shaping_examples() {
        let cfg = RewardConfig::default();
        let r = compute_reward(1.0, 0.99, 0.0, 0.0, DoneReason::Running, F, &cfg);
        assert!((r - 0.3).abs() < 1e-12);
        assert_eq!(compute_reward(1.0, 0.5, 1.0, 0.0, DoneReason::Running, F, &cfg), 0.0);
        // retreating with the goal ahead is penalised
        assert!(compute_reward(1.0, 1.01, 0.0, 0.0, DoneReason::Running, F, &cfg) < 0.0);
    }

    #[test]
    fn turn_rate_matching_heading_maximises_shaping() {
        let cfg = RewardConfig::default();
        // ω_prev / (1.2 f) = heading → h_R = 1
        let heading = 0.2;
        let omega = heading * 1.2 * F;
        assert!((heading_reward(omega, heading, F, &cfg) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn retreat_from_an_off_axis_goal_is_not_rewarded() {
        // goal behind, robot driving away
        let floored = RewardConfig::default();
        assert_eq!(compute_reward(1.0, 1.05, 3.0, 0.0, DoneReason::Running, F, &floored), 0.0);
        let literal = RewardConfig {
            heading_floor: None,
            ..RewardConfig::default()
        };
        assert!(compute_reward(1.0, 1.05, 3.0, 0.0, DoneReason::Running, F, &literal) > 0.0);
    }

    proptest! {
        #[test]
        fn floored_shaping_never_rewards_retreat(d0 in 0.0..10.0f64, d1 in 0.0..10.0f64, h in -3.14..3.14f64, w in -1.0..1.0f64) {
            let r = compute_reward(d0, d1, h, w, DoneReason::Running, F, &RewardConfig::default());
            prop_assert!(r * (d0 - d1) >= 0.0);
        }

        #[test]
        fn terminal_rewards_ignore_shaping(d0 in 0.0..10.0f64, d1 in 0.0..10.0f64, h in -3.14..3.14f64, w in -1.0..1.0f64) {
            let cfg = RewardConfig::default();
            prop_assert_eq!(compute_reward(d0, d1, h, w, DoneReason::Goal, F, &cfg), 1000.0);
            prop_assert_eq!(compute_reward(d0, d1, h, w, DoneReason::Collision, F, &cfg), -200.0);
        }
    }
}
