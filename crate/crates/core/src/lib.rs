//! Point-to-point indoor navigation laboratory.
//!
//! A fixed-step 2D world with a differential-drive robot and ray-cast lidar,
//! a simulated four-anchor UWB localizer, a DDPG agent with the actor/critic
//! shapes used for the navigation policy, a Dynamic Window Approach baseline,
//! and an evaluation harness that scores planners on scenario files.

pub mod config;
pub mod ddpg;
pub mod dwa;
pub mod eval;
pub mod geom;
pub mod nn;
pub mod perception;
pub mod sim;
pub mod teleop;
pub mod uwb;

pub use geom::{wrap_angle, Segment, Vec2};
pub use perception::{Observation, ObservationConfig, OBS_DIM};
pub use sim::{Command, RobotState, ScenarioSpec, SimConfig, World};
