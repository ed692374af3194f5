use serde::{Deserialize, Serialize};

use crate::geom::{wrap_angle, Vec2};

/// Planar pose and the velocities currently commanded to the base.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RobotState {
    pub x: f64,
    pub y: f64,
    /// Heading in (−π, π].
    pub theta: f64,
    pub v: f64,
    pub omega: f64,
    /// Simulation time in seconds.
    pub t: f64,
}

impl RobotState {
    pub fn at(x: f64, y: f64, theta: f64) -> Self {
        Self {
            x,
            y,
            theta: wrap_angle(theta),
            ..Self::default()
        }
    }

    pub fn position(&self) -> Vec2 {
        Vec2::new(self.x, self.y)
    }
}

/// Velocity command in physical units (m/s, rad/s).
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Command {
    pub v: f64,
    pub omega: f64,
}

impl Command {
    pub const STOP: Command = Command { v: 0.0, omega: 0.0 };

    pub fn new(v: f64, omega: f64) -> Self {
        Self { v, omega }
    }

    /// Clips to the non-negative forward speed range and the symmetric turn-rate range.
    pub fn clipped(self, v_max: f64, omega_max: f64) -> Command {
        let v = if self.v.is_nan() { 0.0 } else { self.v.clamp(0.0, v_max) };
        let omega = if self.omega.is_nan() {
            0.0
        } else {
            self.omega.clamp(-omega_max, omega_max)
        };
        Command { v, omega }
    }
}

/// Exact-arc unicycle integration of a constant command over `dt`.
///
/// The command is clipped to `[0, v_max] × [−omega_max, omega_max]` first.
pub fn step_kinematics(
    state: &RobotState,
    cmd: Command,
    dt: f64,
    v_max: f64,
    omega_max: f64,
) -> RobotState {
    let Command { v, omega } = cmd.clipped(v_max, omega_max);
    let theta = state.theta;
    let (x, y) = if omega.abs() > 1e-9 {
        let r = v / omega;
        let theta_end = theta + omega * dt;
        (
            state.x + r * (theta_end.sin() - theta.sin()),
            state.y + r * (theta.cos() - theta_end.cos()),
        )
    } else {
        (
            state.x + v * dt * theta.cos(),
            state.y + v * dt * theta.sin(),
        )
    };
    RobotState {
        x,
        y,
        theta: wrap_angle(theta + omega * dt),
        v,
        omega,
        t: state.t + dt,
    }
}
