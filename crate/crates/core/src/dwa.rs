//! Dynamic Window Approach baseline planner.
//!
//! Candidates are sampled on an `n_v × n_ω` grid over the dynamic window,
//! rolled out as constant-command arcs in the robot frame and checked against
//! obstacle points placed at the centre bearing of each pooled lidar sector.
//! Standing still never counts as a valid trajectory: when every moving
//! candidate collides the planner rotates in place toward the freer side.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{wrap_angle, Vec2};
use crate::perception::{build_observation, Observation, ObservationConfig};
use crate::sim::{Command, RobotState};

#[derive(Debug, Error, PartialEq)]
pub enum DwaError {
    #[error("{name} must be positive, got {value}")]
    NonPositive { name: &'static str, value: f64 },
    #[error("window resolution must be at least 1 x 1")]
    Resolution,
    #[error("scan is empty")]
    EmptyScan,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DwaConfig {
    /// Linear acceleration limit, m/s².
    pub a_v: f64,
    /// Angular acceleration limit, rad/s².
    pub a_omega: f64,
    pub n_v: usize,
    pub n_omega: usize,
    /// Rollout length, s.
    pub horizon: f64,
    pub dt_rollout: f64,
    /// Objective weights; normalized to sum to 1 when used.
    pub w_heading: f64,
    pub w_clearance: f64,
    pub w_velocity: f64,
    /// Clearance beyond this distance scores the same, m.
    pub clearance_cap: f64,
    /// Extra margin on top of the robot radius for the collision test, m.
    pub safety_margin: f64,
    /// Window half-width time (the control period), s.
    pub control_period: f64,
    pub v_max: f64,
    pub omega_max: f64,
    pub robot_radius: f64,
    pub obs: ObservationConfig,
}

impl Default for DwaConfig {
    fn default() -> Self {
        Self {
            a_v: 0.5,
            a_omega: 2.0,
            n_v: 7,
            n_omega: 21,
            horizon: 2.0,
            dt_rollout: 0.1,
            w_heading: 0.5,
            w_clearance: 0.3,
            w_velocity: 0.2,
            clearance_cap: 1.0,
            safety_margin: 0.03,
            control_period: 0.33,
            v_max: 0.2,
            omega_max: 1.0,
            robot_radius: 0.105,
            obs: ObservationConfig::default(),
        }
    }
}

impl DwaConfig {
    pub fn validate(&self) -> Result<(), DwaError> {
        for (name, value) in [
            ("a_v", self.a_v),
            ("a_omega", self.a_omega),
            ("horizon", self.horizon),
            ("dt_rollout", self.dt_rollout),
            ("w_heading", self.w_heading),
            ("w_clearance", self.w_clearance),
            ("w_velocity", self.w_velocity),
            ("clearance_cap", self.clearance_cap),
            ("control_period", self.control_period),
            ("v_max", self.v_max),
            ("omega_max", self.omega_max),
            ("robot_radius", self.robot_radius),
        ] {
            if !(value > 0.0) {
                return Err(DwaError::NonPositive { name, value });
            }
        }
        if self.n_v == 0 || self.n_omega == 0 {
            return Err(DwaError::Resolution);
        }
        Ok(())
    }

    /// Weights scaled to sum to one.
    pub fn weights(&self) -> [f64; 3] {
        let s = self.w_heading + self.w_clearance + self.w_velocity;
        [self.w_heading / s, self.w_clearance / s, self.w_velocity / s]
    }

    /// Reachable `(v_lo, v_hi)` and `(ω_lo, ω_hi)` from the current velocities.
    pub fn window(&self, v: f64, omega: f64) -> ((f64, f64), (f64, f64)) {
        let dv = self.a_v * self.control_period;
        let dw = self.a_omega * self.control_period;
        let v_lo = (v - dv).clamp(0.0, self.v_max);
        let v_hi = (v + dv).clamp(0.0, self.v_max);
        let w_lo = (omega - dw).clamp(-self.omega_max, self.omega_max);
        let w_hi = (omega + dw).clamp(-self.omega_max, self.omega_max);
        ((v_lo, v_hi), (w_lo, w_hi))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DwaDecision {
    pub cmd: Command,
    /// Candidates scored this call, always `n_v · n_ω`.
    pub candidates: usize,
    /// No moving candidate was collision-free; rotating in place.
    pub recovery: bool,
    pub score: f64,
}

/// Obstacle points in the robot frame from pooled sector minima; free
/// sectors (at max range) contribute nothing.
pub fn sector_points(obs: &Observation, max_range: f64) -> Vec<Vec2> {
    let n = obs.sectors.len();
    obs.sectors
        .iter()
        .enumerate()
        .filter(|(_, &r)| r < max_range)
        .map(|(k, &r)| Vec2::from_angle(2.0 * std::f64::consts::PI * (k as f64 + 0.5) / n as f64) * r)
        .collect()
}

fn grid(lo: f64, hi: f64, n: usize, i: usize) -> f64 {
    if n == 1 {
        (lo + hi) / 2.0
    } else {
        lo + (hi - lo) * i as f64 / (n - 1) as f64
    }
}

/// Score terms of one candidate, or `None` if its rollout collides.
/// Returns `[heading, clearance, velocity]`, each in [0, 1].
pub fn score_candidate(v: f64, omega: f64, goal: Vec2, points: &[Vec2], cfg: &DwaConfig) -> Option<[f64; 3]> {
    let steps = (cfg.horizon / cfg.dt_rollout).round().max(1.0) as usize;
    let limit = cfg.robot_radius + cfg.safety_margin;
    let mut pose = RobotState::default();
    let mut min_d = f64::INFINITY;
    for _ in 0..steps {
        pose = crate::sim::step_kinematics(&pose, Command::new(v, omega), cfg.dt_rollout, cfg.v_max, cfg.omega_max);
        let p = pose.position();
        for q in points {
            min_d = min_d.min(p.distance(*q));
        }
        if min_d < limit {
            return None;
        }
    }
    let to_goal = goal - pose.position();
    let heading_err = if to_goal.norm() < 1e-9 {
        0.0
    } else {
        wrap_angle(to_goal.y.atan2(to_goal.x) - pose.theta).abs()
    };
    let heading = 1.0 - heading_err / std::f64::consts::PI;
    let clearance = ((min_d - limit) / cfg.clearance_cap).clamp(0.0, 1.0);
    let velocity = v / cfg.v_max;
    Some([heading, clearance, velocity])
}

/// Plans from the observation the RL agent would see plus the current
/// velocities. Ties keep the first candidate in (v, ω) grid order.
pub fn dwa_plan_obs(v: f64, omega: f64, obs: &Observation, cfg: &DwaConfig) -> DwaDecision {
    let points = sector_points(obs, cfg.obs.max_range);
    let goal = Vec2::from_angle(obs.goal_heading) * obs.goal_distance;
    let ((v_lo, v_hi), (w_lo, w_hi)) = cfg.window(v, omega);
    let w = cfg.weights();
    let mut best: Option<(f64, Command)> = None;
    for i in 0..cfg.n_v {
        let cv = grid(v_lo, v_hi, cfg.n_v, i);
        for j in 0..cfg.n_omega {
            let cw = grid(w_lo, w_hi, cfg.n_omega, j);
            if cv <= 0.0 {
                continue;
            }
            if let Some(s) = score_candidate(cv, cw, goal, &points, cfg) {
                let total = w[0] * s[0] + w[1] * s[1] + w[2] * s[2];
                if best.is_none_or(|(b, _)| total > b) {
                    best = Some((total, Command::new(cv, cw)));
                }
            }
        }
    }
    let candidates = cfg.n_v * cfg.n_omega;
    match best {
        Some((score, cmd)) => DwaDecision {
            cmd,
            candidates,
            recovery: false,
            score,
        },
        None => {
            let sign = match free_side(obs) {
                Some(s) => s,
                None if obs.goal_heading >= 0.0 => 1.0,
                None => -1.0,
            };
            DwaDecision {
                cmd: Command::new(0.0, sign * cfg.omega_max),
                candidates,
                recovery: true,
                score: f64::NEG_INFINITY,
            }
        }
    }
}

/// +1 if the left half of the scan is more open than the right, -1 if less,
/// `None` on a tie.
fn free_side(obs: &Observation) -> Option<f64> {
    let n = obs.sectors.len();
    let left: f64 = obs.sectors[..n / 2].iter().sum();
    let right: f64 = obs.sectors[n - n / 2..].iter().sum();
    if (left - right).abs() < 1e-9 {
        None
    } else if left > right {
        Some(1.0)
    } else {
        Some(-1.0)
    }
}

/// Plans from a pose, goal and dense scan; `state.v` and `state.omega` centre the window.
pub fn dwa_plan(state: &RobotState, goal: Vec2, scan: &[f64], cfg: &DwaConfig) -> Result<DwaDecision, DwaError> {
    if scan.is_empty() {
        return Err(DwaError::EmptyScan);
    }
    let obs = build_observation(scan, (state.x, state.y, state.theta), goal, &cfg.obs).map_err(|_| DwaError::EmptyScan)?;
    Ok(dwa_plan_obs(state.v, state.omega, &obs, cfg))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{scan_lidar, step_kinematics, Bounds, SimConfig, StepEvent, World, WorldMap};
    use crate::geom::Segment;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn free_scan() -> Vec<f64> {
        vec![3.5; 360]
    }

    #[test]
    fn open_space_goal_ahead() {
        let cfg = DwaConfig::default();
        let mut s = RobotState::default();
        s.v = 0.2;
        let d = dwa_plan(&s, Vec2::new(3.0, 0.0), &free_scan(), &cfg).unwrap();
        assert_eq!(d.cmd.v, 0.2);
        assert!(d.cmd.omega.abs() < 1e-12);
        assert_eq!(d.candidates, 7 * 21);
        assert!(!d.recovery);
    }

    #[test]
    fn window_clipping_from_rest() {
        let cfg = DwaConfig::default();
        let ((lo, hi), _) = cfg.window(0.0, 0.0);
        assert_eq!(lo, 0.0);
        assert!((hi - 0.165).abs() < 1e-12);
        let d = dwa_plan(&RobotState::default(), Vec2::new(3.0, 0.0), &free_scan(), &cfg).unwrap();
        assert!(d.cmd.v <= 0.165 + 1e-12);
    }

    #[test]
    fn boxed_in_robot_rotates_toward_goal() {
        let cfg = DwaConfig::default();
        let scan = vec![0.12; 360];
        let d = dwa_plan(&RobotState::default(), Vec2::new(0.0, -2.0), &scan, &cfg).unwrap();
        assert!(d.recovery);
        assert_eq!(d.cmd, Command::new(0.0, -1.0));
    }

    #[test]
    fn never_parks_behind_a_blocking_panel() {
        let cfg = DwaConfig::default();
        let b = Bounds::new(Vec2::new(-5.0, -5.0), Vec2::new(5.0, 5.0));
        let map = WorldMap::new(vec![Segment::from_coords(0.2, -0.3, 0.2, 0.5)], b).unwrap();
        let scan = scan_lidar(&map, &[], &RobotState::default(), 360, 3.5);
        let d = dwa_plan(&RobotState::default(), Vec2::new(2.0, 0.0), &scan, &cfg).unwrap();
        assert!(d.cmd.v > 0.0 || d.cmd.omega != 0.0);
        if d.recovery {
            assert_eq!(d.cmd.omega, -1.0);
        }
    }

    #[test]
    fn drives_around_a_panel_to_the_goal() {
        let cfg = DwaConfig::default();
        let b = Bounds::new(Vec2::new(-1.0, -1.5), Vec2::new(4.0, 1.5));
        let map = WorldMap::new(vec![Segment::from_coords(1.0, -0.3, 1.0, 0.5)], b).unwrap();
        let goal = Vec2::new(2.5, 0.0);
        let mut world = World::new(map, vec![], RobotState::default(), SimConfig::default());
        let mut reached = false;
        for _ in 0..400 {
            let d = dwa_plan(world.state(), goal, &world.scan(), &cfg).unwrap();
            assert_eq!(world.step_control(d.cmd), StepEvent::Running, "hit at {:?}", world.state().position());
            if world.state().position().distance(goal) < 0.15 {
                reached = true;
                break;
            }
        }
        assert!(reached, "stuck at {:?}", world.state().position());
    }

    #[test]
    fn config_validation() {
        assert!(DwaConfig::default().validate().is_ok());
        assert_eq!(
            DwaConfig { n_v: 0, ..Default::default() }.validate(),
            Err(DwaError::Resolution)
        );
        assert!(DwaConfig { horizon: 0.0, ..Default::default() }.validate().is_err());
        let w = DwaConfig::default().weights();
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    /// Independent scorer: rollout by fine integration with the simulator
    /// kinematics, sampled at the same instants.
    fn oracle_best(v0: f64, w0: f64, obs: &Observation, cfg: &DwaConfig) -> Option<(f64, Vec<(f64, f64)>)> {
        let pts: Vec<Vec2> = (0..obs.sectors.len())
            .filter(|&k| obs.sectors[k] < cfg.obs.max_range)
            .map(|k| {
                let a = (k as f64 + 0.5) * std::f64::consts::TAU / obs.sectors.len() as f64;
                Vec2::new(a.cos() * obs.sectors[k], a.sin() * obs.sectors[k])
            })
            .collect();
        let goal = Vec2::new(obs.goal_distance * obs.goal_heading.cos(), obs.goal_distance * obs.goal_heading.sin());
        let dv = cfg.a_v * cfg.control_period;
        let dw = cfg.a_omega * cfg.control_period;
        let (vl, vh) = ((v0 - dv).max(0.0).min(cfg.v_max), (v0 + dv).min(cfg.v_max).max(0.0));
        let (wl, wh) = ((w0 - dw).max(-cfg.omega_max), (w0 + dw).min(cfg.omega_max));
        let wsum = cfg.w_heading + cfg.w_clearance + cfg.w_velocity;
        let mut scored = Vec::new();
        for i in 0..cfg.n_v {
            for j in 0..cfg.n_omega {
                let v = vl + (vh - vl) * i as f64 / (cfg.n_v - 1) as f64;
                let w = wl + (wh - wl) * j as f64 / (cfg.n_omega - 1) as f64;
                if v == 0.0 {
                    continue;
                }
                let mut s = RobotState::default();
                let mut min_d = f64::INFINITY;
                for _ in 0..20 {
                    for _ in 0..10 {
                        s = step_kinematics(&s, Command::new(v, w), 0.01, cfg.v_max, cfg.omega_max);
                    }
                    for q in &pts {
                        min_d = min_d.min(s.position().distance(*q));
                    }
                }
                let limit = cfg.robot_radius + cfg.safety_margin;
                if min_d < limit {
                    continue;
                }
                let g = goal - s.position();
                let err = (g.y.atan2(g.x) - s.theta).sin().atan2((g.y.atan2(g.x) - s.theta).cos()).abs();
                let total = (cfg.w_heading * (1.0 - err / std::f64::consts::PI)
                    + cfg.w_clearance * ((min_d - limit) / cfg.clearance_cap).min(1.0)
                    + cfg.w_velocity * v / cfg.v_max)
                    / wsum;
                scored.push((total, (v, w)));
            }
        }
        let best = scored.iter().map(|s| s.0).fold(f64::NEG_INFINITY, f64::max);
        if scored.is_empty() {
            None
        } else {
            Some((best, scored.into_iter().filter(|s| s.0 > best - 1e-9).map(|s| s.1).collect()))
        }
    }

    #[test]
    fn wall_ahead_turns_and_matches_oracle() {
        let cfg = DwaConfig::default();
        let b = Bounds::new(Vec2::new(-5.0, -5.0), Vec2::new(5.0, 5.0));
        let map = WorldMap::new(vec![Segment::from_coords(0.3, -1.0, 0.3, 1.0)], b).unwrap();
        let mut s = RobotState::default();
        s.v = 0.2;
        let scan = scan_lidar(&map, &[], &s, 360, 3.5);
        let obs = build_observation(&scan, (0.0, 0.0, 0.0), Vec2::new(1.5, 0.5), &cfg.obs).unwrap();
        let d = dwa_plan_obs(s.v, s.omega, &obs, &cfg);
        assert!(d.cmd.omega.abs() > 0.0);
        let (best, argmax) = oracle_best(s.v, s.omega, &obs, &cfg).unwrap();
        assert!((d.score - best).abs() < 1e-9);
        assert!(argmax.iter().any(|&(v, w)| (v - d.cmd.v).abs() < 1e-12 && (w - d.cmd.omega).abs() < 1e-12));
    }

    #[test]
    fn random_scenes_agree_with_oracle() {
        let cfg = DwaConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let b = Bounds::new(Vec2::new(-5.0, -5.0), Vec2::new(5.0, 5.0));
        let mut recoveries = 0;
        for _ in 0..40 {
            let segs: Vec<Segment> = (0..5)
                .map(|_| {
                    let c = Vec2::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
                    let a = rng.random_range(0.0..std::f64::consts::PI);
                    let h = rng.random_range(0.1..0.6);
                    Segment::new(c - Vec2::from_angle(a) * h, c + Vec2::from_angle(a) * h)
                })
                .filter(|s| s.distance_to(Vec2::ZERO) > 0.2)
                .collect();
            let map = WorldMap::new(segs, b).unwrap();
            let v0 = rng.random_range(0.0..0.2);
            let w0 = rng.random_range(-1.0..1.0);
            let scan = scan_lidar(&map, &[], &RobotState::default(), 360, 3.5);
            let goal = Vec2::new(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
            let obs = build_observation(&scan, (0.0, 0.0, 0.0), goal, &cfg.obs).unwrap();
            let d = dwa_plan_obs(v0, w0, &obs, &cfg);
            let ((vl, vh), (wl, wh)) = cfg.window(v0, w0);
            assert!(d.cmd.v >= vl - 1e-12 && d.cmd.v <= vh + 1e-12);
            assert!(d.cmd.omega >= wl - 1e-12 && d.cmd.omega <= wh + 1e-12);
            match oracle_best(v0, w0, &obs, &cfg) {
                Some((best, _)) => {
                    assert!(!d.recovery);
                    assert!((d.score - best).abs() < 1e-9, "{} vs {}", d.score, best);
                }
                None => {
                    assert!(d.recovery);
                    recoveries += 1;
                }
            }
        }
        assert!(recoveries < 40);
    }
}
