//! Deterministic fixed-step 2D world.

mod kinematics;
mod lidar;
mod map;
mod obstacle;
mod scenario;
mod world;

pub use kinematics::{step_kinematics, Command, RobotState};
pub use lidar::{raycast, raycast_all, scan_lidar};
pub use map::{check_collision, min_clearance, Bounds, MapError, WorldMap};
pub use obstacle::{advance_obstacles, Keyframe, ObstacleError, ObstacleScript};
pub use scenario::{load_scenario, AnchorLayout, ScenarioError, ScenarioSpec, StartPose};
pub use world::{SimConfig, StepEvent, World, DEFAULT_ROBOT_RADIUS};
