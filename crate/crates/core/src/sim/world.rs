use serde::{Deserialize, Serialize};

use crate::geom::Segment;

use super::kinematics::{step_kinematics, Command, RobotState};
use super::lidar::scan_lidar;
use super::map::WorldMap;
use super::obstacle::{advance_obstacles, ObstacleScript};
use super::scenario::ScenarioSpec;

/// Disc radius of the robot body.
pub const DEFAULT_ROBOT_RADIUS: f64 = 0.105;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    /// Integration step, seconds.
    pub dt: f64,
    /// Period at which a planner command is held, seconds.
    pub control_period: f64,
    pub robot_radius: f64,
    pub v_max: f64,
    pub omega_max: f64,
    pub n_rays: usize,
    pub max_range: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt: 0.0035,
            control_period: 0.33,
            robot_radius: DEFAULT_ROBOT_RADIUS,
            v_max: 0.2,
            omega_max: 1.0,
            n_rays: 360,
            max_range: 3.5,
        }
    }
}

impl SimConfig {
    /// Integration steps per control period, ⌈control_period / dt⌉.
    pub fn substeps(&self) -> usize {
        ((self.control_period / self.dt) - 1e-9).ceil().max(1.0) as usize
    }

    /// Simulated time covered by one control step.
    pub fn control_dt(&self) -> f64 {
        self.substeps() as f64 * self.dt
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum StepEvent {
    Running,
    Collision,
}

/// One simulated world: a static map, scripted obstacles and the robot.
#[derive(Clone, Debug)]
pub struct World {
    map: WorldMap,
    obstacles: Vec<ObstacleScript>,
    state: RobotState,
    cfg: SimConfig,
}

impl World {
    pub fn new(map: WorldMap, obstacles: Vec<ObstacleScript>, start: RobotState, cfg: SimConfig) -> Self {
        Self {
            map,
            obstacles,
            state: start,
            cfg,
        }
    }

    pub fn from_scenario(scenario: &ScenarioSpec, cfg: SimConfig) -> Self {
        let s = scenario.start;
        Self::new(
            scenario.map.clone(),
            scenario.obstacles.clone(),
            RobotState::at(s.x, s.y, s.theta),
            cfg,
        )
    }

    pub fn state(&self) -> &RobotState {
        &self.state
    }

    pub fn map(&self) -> &WorldMap {
        &self.map
    }

    pub fn config(&self) -> &SimConfig {
        &self.cfg
    }

    pub fn scripts(&self) -> &[ObstacleScript] {
        &self.obstacles
    }

    pub fn reset(&mut self, start: RobotState) {
        self.state = start;
    }

    pub fn set_map(&mut self, map: WorldMap, obstacles: Vec<ObstacleScript>) {
        self.map = map;
        self.obstacles = obstacles;
    }

    pub fn obstacles_now(&self) -> Vec<Segment> {
        advance_obstacles(&self.obstacles, self.state.t)
    }

    pub fn clearance(&self) -> f64 {
        let p = self.state.position();
        let t = self.state.t;
        self.map
            .segments
            .iter()
            .map(|s| s.distance_to(p))
            .chain(
                self.obstacles
                    .iter()
                    .flat_map(|o| o.segments_at(t))
                    .map(|s| s.distance_to(p)),
            )
            .fold(f64::INFINITY, f64::min)
    }

    pub fn in_collision(&self) -> bool {
        self.clearance() < self.cfg.robot_radius
    }

    /// Holds `cmd` for one control period, checking for collision after every
    /// integration step. Stops at the first colliding step.
    pub fn step_control(&mut self, cmd: Command) -> StepEvent {
        self.step_control_with(cmd, |_| {})
    }

    /// As [`World::step_control`], calling `after_substep` with the state after every integration step.
    pub fn step_control_with(&mut self, cmd: Command, mut after_substep: impl FnMut(&RobotState)) -> StepEvent {
        let cmd = cmd.clipped(self.cfg.v_max, self.cfg.omega_max);
        for _ in 0..self.cfg.substeps() {
            self.state = step_kinematics(&self.state, cmd, self.cfg.dt, self.cfg.v_max, self.cfg.omega_max);
            after_substep(&self.state);
            if self.in_collision() {
                return StepEvent::Collision;
            }
        }
        StepEvent::Running
    }

    /// Dense lidar scan from the true pose.
    pub fn scan(&self) -> Vec<f64> {
        scan_lidar(
            &self.map,
            &self.obstacles_now(),
            &self.state,
            self.cfg.n_rays,
            self.cfg.max_range,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Vec2;
    use crate::sim::map::Bounds;

    #[test]
    fn ninety_five_substeps_per_control_period() {
        let cfg = SimConfig::default();
        assert_eq!(cfg.substeps(), 95);
        assert!((cfg.control_dt() - 0.3325).abs() < 1e-12);
    }

    #[test]
    fn drives_into_wall_and_stops() {
        let b = Bounds::new(Vec2::new(-1.0, -1.0), Vec2::new(1.0, 1.0));
        let mut w = World::new(WorldMap::room(b), vec![], RobotState::default(), SimConfig::default());
        let mut steps = 0;
        while w.step_control(Command::new(0.2, 0.0)) == StepEvent::Running {
            steps += 1;
            assert!(steps < 100);
        }
        // first substep whose centre is closer than the radius to x = 1
        assert!(w.state().x > 1.0 - 0.105 && w.state().x < 1.0 - 0.105 + 0.2 * 0.0035 + 1e-12);
    }
}
