//! Human teleoperation sessions.
//!
//! A [`Session`] owns one episode and the connections watching it. It is a
//! plain state machine: the network layer feeds it connection events and text
//! frames, calls [`Session::tick`] once per control period and delivers the
//! returned frames. State frames carry only what the learned planner sees
//! (sector ranges, estimated pose, goal distance and bearing), never the true
//! pose or the map.
//!
//! Frames are JSON objects tagged by `type`:
//!
//! ```json
//! {"type":"hello","protocol":1,"role":"driver","name":"ana"}
//! {"type":"command","v":0.5,"omega":-0.2}
//! ```
//!
//! Rules: the first client to say hello as driver takes control and starts the
//! episode; later driver requests are refused and the connection is seated
//! as a spectator. Commands are normalized (`v` in [0, 1], `omega` in [-1, 1]),
//! scaled like agent actions and held until the next one. If the driver
//! leaves mid-run the session ends as `aborted`.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::eval::{EpisodeStepper, EvalConfig, EvalError, EventKind, Step, TrajectoryLog};
use crate::perception::N_SECTORS;
use crate::sim::{Command, ScenarioSpec};

pub const PROTOCOL_VERSION: u32 = 1;

pub type ConnId = u64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Driver,
    Spectator,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Limits {
    pub v_max: f64,
    pub omega_max: f64,
    pub control_period: f64,
    pub max_range: f64,
    pub n_sectors: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Hello {
    pub protocol: u32,
    pub role: Role,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    /// Set by the server in its reply.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub session: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub limits: Option<Limits>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstPose {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Velocity {
    pub v: f64,
    pub omega: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateFrame {
    pub seq: u64,
    /// Episode time, s.
    pub t: f64,
    pub waypoint: usize,
    pub waypoints: usize,
    /// Pooled lidar sector minima, m.
    pub sectors: Vec<f64>,
    pub goal_distance: f64,
    /// Goal direction relative to the robot heading, rad.
    pub goal_bearing: f64,
    pub est_pose: EstPose,
    /// Command currently held, physical units.
    pub command: Velocity,
}

/// Driver command in normalized units.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CommandFrame {
    pub v: f64,
    pub omega: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EventFrame {
    pub t: f64,
    pub kind: EventKind,
    pub waypoint: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Goal,
    Collision,
    Timeout,
    Aborted,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResultFrame {
    pub outcome: Outcome,
    pub t: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    Malformed,
    Protocol,
    NotDriver,
    DriverTaken,
    NotRunning,
    Finished,
    Clipped,
    Unexpected,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ErrorFrame {
    pub code: ErrorCode,
    pub severity: Severity,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum WireMessage {
    Hello(Hello),
    State(StateFrame),
    Command(CommandFrame),
    Event(EventFrame),
    Result(ResultFrame),
    Error(ErrorFrame),
}

impl WireMessage {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("wire messages serialize")
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        serde_json::from_str(text).map_err(|e| e.to_string())
    }

    fn error(code: ErrorCode, message: impl Into<String>) -> Self {
        WireMessage::Error(ErrorFrame {
            code,
            severity: Severity::Error,
            message: message.into(),
        })
    }

    fn warning(code: ErrorCode, message: impl Into<String>) -> Self {
        WireMessage::Error(ErrorFrame {
            code,
            severity: Severity::Warning,
            message: message.into(),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Recipient {
    One(ConnId),
    All,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Outgoing {
    pub to: Recipient,
    pub msg: WireMessage,
}

fn to(conn: ConnId, msg: WireMessage) -> Outgoing {
    Outgoing {
        to: Recipient::One(conn),
        msg,
    }
}

fn all(msg: WireMessage) -> Outgoing {
    Outgoing { to: Recipient::All, msg }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SessionStatus {
    Lobby,
    Running,
    Finished(Outcome),
}

/// Clips a normalized command to the action bounds and scales it to physical
/// units. The flag is set when clipping changed the input.
pub fn scale_command(c: CommandFrame, v_max: f64, omega_max: f64) -> (Command, bool) {
    let v = c.v.clamp(0.0, 1.0);
    let w = c.omega.clamp(-1.0, 1.0);
    (Command::new(v * v_max, w * omega_max), v != c.v || w != c.omega)
}

pub struct Session {
    id: String,
    scenario: ScenarioSpec,
    cfg: EvalConfig,
    seed: u64,
    status: SessionStatus,
    connected: BTreeSet<ConnId>,
    driver: Option<ConnId>,
    spectators: BTreeSet<ConnId>,
    stepper: Option<EpisodeStepper>,
    held: Command,
    seq: u64,
    events_sent: usize,
    log: Option<TrajectoryLog>,
    keep_aborted: bool,
}

impl Session {
    pub fn new(id: impl Into<String>, scenario: ScenarioSpec, cfg: EvalConfig, seed: u64) -> Result<Self, EvalError> {
        // Fail early on scenarios the episode would reject.
        EpisodeStepper::new(&scenario, &cfg, "human", seed)?;
        Ok(Self {
            id: id.into(),
            scenario,
            cfg,
            seed,
            status: SessionStatus::Lobby,
            connected: BTreeSet::new(),
            driver: None,
            spectators: BTreeSet::new(),
            stepper: None,
            held: Command::STOP,
            seq: 0,
            events_sent: 0,
            log: None,
            keep_aborted: false,
        })
    }

    /// Keep the log of an aborted run so it counts as a failure in the
    /// metrics; by default aborted runs are left out.
    pub fn keep_aborted(mut self, keep: bool) -> Self {
        self.keep_aborted = keep;
        self
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn status(&self) -> SessionStatus {
        self.status
    }

    pub fn driver(&self) -> Option<ConnId> {
        self.driver
    }

    pub fn spectators(&self) -> &BTreeSet<ConnId> {
        &self.spectators
    }

    pub fn connected(&self) -> &BTreeSet<ConnId> {
        &self.connected
    }

    /// Simulated time of the running episode; zero before it starts.
    pub fn t(&self) -> f64 {
        self.stepper.as_ref().map_or(0.0, |s| s.t())
    }

    pub fn held(&self) -> Command {
        self.held
    }

    /// The finished episode's log; `None` while running and for aborted
    /// sessions unless `keep_aborted` was set in [`Session::finish`].
    pub fn log(&self) -> Option<&TrajectoryLog> {
        self.log.as_ref()
    }

    pub fn limits(&self) -> Limits {
        Limits {
            v_max: self.cfg.sim.v_max,
            omega_max: self.cfg.sim.omega_max,
            control_period: self.cfg.sim.control_dt(),
            max_range: self.cfg.obs.max_range,
            n_sectors: N_SECTORS,
        }
    }

    pub fn connect(&mut self, conn: ConnId) {
        self.connected.insert(conn);
    }

    /// Parses and handles one text frame.
    pub fn receive(&mut self, conn: ConnId, text: &str) -> Vec<Outgoing> {
        match WireMessage::parse(text) {
            Ok(msg) => self.handle(conn, msg),
            Err(e) => vec![to(conn, WireMessage::error(ErrorCode::Malformed, e))],
        }
    }

    pub fn handle(&mut self, conn: ConnId, msg: WireMessage) -> Vec<Outgoing> {
        if !self.connected.contains(&conn) {
            return Vec::new();
        }
        if let SessionStatus::Finished(_) = self.status {
            return vec![to(conn, WireMessage::error(ErrorCode::Finished, "session has finished"))];
        }
        match msg {
            WireMessage::Hello(h) => self.hello(conn, h),
            WireMessage::Command(c) => match self.handle_command(conn, c) {
                Ok((_, None)) => Vec::new(),
                Ok((_, Some(w))) => vec![to(conn, w)],
                Err(e) => vec![to(conn, e)],
            },
            _ => vec![to(conn, WireMessage::error(ErrorCode::Unexpected, "clients may send hello or command"))],
        }
    }

    fn hello(&mut self, conn: ConnId, h: Hello) -> Vec<Outgoing> {
        if h.protocol != PROTOCOL_VERSION {
            return vec![to(
                conn,
                WireMessage::error(
                    ErrorCode::Protocol,
                    format!("protocol {} unsupported, server speaks {PROTOCOL_VERSION}", h.protocol),
                ),
            )];
        }
        if self.driver == Some(conn) || self.spectators.contains(&conn) {
            return vec![to(conn, WireMessage::error(ErrorCode::Unexpected, "already greeted"))];
        }
        let mut out = Vec::new();
        let role = if h.role == Role::Driver && self.driver.is_none() {
            Role::Driver
        } else {
            if h.role == Role::Driver {
                out.push(to(conn, WireMessage::error(ErrorCode::DriverTaken, "another client is driving; seated as spectator")));
            }
            Role::Spectator
        };
        out.push(to(
            conn,
            WireMessage::Hello(Hello {
                protocol: PROTOCOL_VERSION,
                role,
                name: h.name.clone(),
                session: Some(self.id.clone()),
                limits: Some(self.limits()),
            }),
        ));
        match role {
            Role::Driver => {
                self.driver = Some(conn);
                let name = h.name.unwrap_or_else(|| "anonymous".into());
                let stepper = EpisodeStepper::new(&self.scenario, &self.cfg, &format!("human:{name}"), self.seed)
                    .expect("scenario validated at session creation");
                self.stepper = Some(stepper);
                self.status = SessionStatus::Running;
                out.extend(self.observe_and_broadcast());
            }
            Role::Spectator => {
                self.spectators.insert(conn);
                if let Some(f) = self.state_frame() {
                    out.push(to(conn, WireMessage::State(f)));
                }
            }
        }
        out
    }

    /// Applies a driver command; returns the held physical command and a
    /// warning frame when the input was clipped.
    pub fn handle_command(&mut self, conn: ConnId, c: CommandFrame) -> Result<(Command, Option<WireMessage>), WireMessage> {
        if self.driver != Some(conn) {
            return Err(WireMessage::error(ErrorCode::NotDriver, "only the driver may send commands"));
        }
        if self.status != SessionStatus::Running {
            return Err(WireMessage::error(ErrorCode::NotRunning, "session is not running"));
        }
        if !(c.v.is_finite() && c.omega.is_finite()) {
            return Err(WireMessage::error(ErrorCode::Malformed, "command values must be finite"));
        }
        let (cmd, clipped) = scale_command(c, self.cfg.sim.v_max, self.cfg.sim.omega_max);
        self.held = cmd;
        let warning = clipped.then(|| {
            WireMessage::warning(
                ErrorCode::Clipped,
                format!("command ({}, {}) clipped to v in [0, 1], omega in [-1, 1]", c.v, c.omega),
            )
        });
        Ok((cmd, warning))
    }

    pub fn disconnect(&mut self, conn: ConnId) -> Vec<Outgoing> {
        self.connected.remove(&conn);
        self.spectators.remove(&conn);
        if self.driver == Some(conn) {
            self.driver = None;
            if self.status == SessionStatus::Running {
                return self.finish(Outcome::Aborted, self.keep_aborted);
            }
        }
        Vec::new()
    }

    /// Advances the world one control period with the held command.
    pub fn tick(&mut self) -> Vec<Outgoing> {
        if self.status != SessionStatus::Running {
            return Vec::new();
        }
        let stepper = self.stepper.as_mut().expect("running session has an episode");
        if let Err(e) = stepper.apply(self.held) {
            let mut out = vec![all(WireMessage::error(ErrorCode::Unexpected, e.to_string()))];
            out.extend(self.finish(Outcome::Aborted, self.keep_aborted));
            return out;
        }
        self.observe_and_broadcast()
    }

    fn new_events(&mut self) -> Vec<Outgoing> {
        let Some(stepper) = &self.stepper else { return Vec::new() };
        let events = &stepper.log().events[self.events_sent..];
        self.events_sent += events.len();
        events
            .iter()
            .map(|e| {
                all(WireMessage::Event(EventFrame {
                    t: e.t,
                    kind: e.kind,
                    waypoint: e.goal_index,
                }))
            })
            .collect()
    }

    fn observe_and_broadcast(&mut self) -> Vec<Outgoing> {
        let step = self.stepper.as_mut().expect("running session has an episode").observe();
        let mut out = self.new_events();
        match step {
            Ok(Step::Decide(_)) => {
                self.seq += 1;
                if let Some(f) = self.state_frame() {
                    out.push(all(WireMessage::State(f)));
                }
            }
            Ok(Step::Done(kind)) => {
                let outcome = match kind {
                    EventKind::GoalReached => Outcome::Goal,
                    EventKind::Collision => Outcome::Collision,
                    _ => Outcome::Timeout,
                };
                out.extend(self.finish(outcome, false));
            }
            Err(e) => {
                out.push(all(WireMessage::error(ErrorCode::Unexpected, e.to_string())));
                out.extend(self.finish(Outcome::Aborted, self.keep_aborted));
            }
        }
        out
    }

    /// Latest state as broadcast to clients, while running.
    pub fn state_frame(&mut self) -> Option<StateFrame> {
        if self.status != SessionStatus::Running {
            return None;
        }
        let stepper = self.stepper.as_mut()?;
        let Ok(Step::Decide(d)) = stepper.observe() else { return None };
        Some(StateFrame {
            seq: self.seq,
            t: d.t,
            waypoint: d.goal_index,
            waypoints: self.scenario.goals.len(),
            sectors: d.obs.sectors.clone(),
            goal_distance: d.obs.goal_distance,
            goal_bearing: d.obs.goal_heading,
            est_pose: EstPose {
                x: d.est_pose[0],
                y: d.est_pose[1],
                theta: d.est_pose[2],
            },
            command: Velocity {
                v: self.held.v,
                omega: self.held.omega,
            },
        })
    }

    /// Ends the session and sends the result frame. Aborted episodes keep
    /// their log only when `keep_aborted` is set, which counts them as
    /// failures in the metrics; otherwise they are left out.
    pub fn finish(&mut self, outcome: Outcome, keep_aborted: bool) -> Vec<Outgoing> {
        if let SessionStatus::Finished(_) = self.status {
            return Vec::new();
        }
        self.status = SessionStatus::Finished(outcome);
        self.held = Command::STOP;
        let t = self.t();
        if let Some(stepper) = self.stepper.take() {
            if outcome != Outcome::Aborted || keep_aborted {
                self.log = Some(stepper.into_log());
            }
        }
        vec![all(WireMessage::Result(ResultFrame { outcome, t }))]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::{compute_metrics, Localization};
    use crate::sim::load_scenario;
    use proptest::prelude::*;

    fn scenario(goal_x: f64) -> ScenarioSpec {
        load_scenario(&format!(
            "name = \"teleop\"\n[map]\nmin = [-1.0, -1.5]\nmax = [3.0, 1.5]\nboundary_walls = true\n[start]\nx = 0.0\ny = 0.0\n[goals]\npoints = [[{goal_x}, 0.0]]\n[limits]\nt_max = 30.0\n"
        ))
        .unwrap()
    }

    fn session(goal_x: f64) -> Session {
        Session::new("s", scenario(goal_x), EvalConfig::default(), 3).unwrap()
    }

    fn hello(role: Role) -> WireMessage {
        WireMessage::Hello(Hello {
            protocol: PROTOCOL_VERSION,
            role,
            name: Some("tester".into()),
            session: None,
            limits: None,
        })
    }

    fn errors(out: &[Outgoing]) -> Vec<ErrorCode> {
        out.iter()
            .filter_map(|o| match &o.msg {
                WireMessage::Error(e) => Some(e.code),
                _ => None,
            })
            .collect()
    }

    #[test]
    fn command_scaling_matches_agent_actions() {
        let (c, clipped) = scale_command(CommandFrame { v: 1.0, omega: 0.0 }, 0.2, 1.0);
        assert_eq!((c, clipped), (Command::new(0.2, 0.0), false));
        let (c, clipped) = scale_command(CommandFrame { v: 0.5, omega: 2.0 }, 0.2, 1.0);
        assert_eq!((c, clipped), (Command::new(0.1, 1.0), true));
        let (c, _) = scale_command(CommandFrame { v: -1.0, omega: -3.0 }, 0.2, 1.0);
        assert_eq!(c, Command::new(0.0, -1.0));
    }

    #[test]
    fn driver_reaches_goal() {
        let mut s = session(1.0);
        s.connect(1);
        s.connect(2);
        let out = s.handle(2, hello(Role::Spectator));
        assert!(matches!(out[0].msg, WireMessage::Hello(Hello { role: Role::Spectator, .. })));
        assert_eq!(s.status(), SessionStatus::Lobby);
        let out = s.handle(1, hello(Role::Driver));
        assert_eq!(s.status(), SessionStatus::Running);
        assert!(out.iter().any(|o| o.to == Recipient::All && matches!(o.msg, WireMessage::State(_))));
        let out = s.receive(1, r#"{"type":"command","v":1.0,"omega":0.0}"#);
        assert!(out.is_empty());
        assert_eq!(s.held(), Command::new(0.2, 0.0));
        let mut result = None;
        for _ in 0..100 {
            for o in s.tick() {
                if let WireMessage::Result(r) = o.msg {
                    result = Some(r);
                }
            }
        }
        let r = result.expect("session finished");
        assert_eq!(r.outcome, Outcome::Goal);
        let log = s.log().unwrap();
        assert_eq!(log.planner, "human:tester");
        let m = compute_metrics(std::slice::from_ref(log)).unwrap();
        assert_eq!(m.success_rate, 1.0);
        assert!((m.t_mean.unwrap() - r.t).abs() < 1e-9);
    }

    #[test]
    fn state_frames_report_sector_ranges() {
        let mut s = Session::new(
            "s",
            load_scenario("name = \"open\"\n[map]\nmin = [-20.0, -20.0]\nmax = [20.0, 20.0]\n[start]\nx = 0.0\ny = 0.0\n[goals]\npoints = [[5.0, 0.0]]\n").unwrap(),
            EvalConfig { localization: Localization::TruePose, ..Default::default() },
            0,
        )
        .unwrap();
        s.connect(1);
        s.handle(1, hello(Role::Driver));
        let f = s.state_frame().unwrap();
        assert_eq!(f.sectors.len(), N_SECTORS);
        assert!(f.sectors.iter().all(|&r| r == 3.5));
        assert!((f.goal_distance - 5.0).abs() < 1e-12);
        let t0 = f.t;
        let out = s.tick();
        let WireMessage::State(next) = &out.last().unwrap().msg else { panic!("expected state") };
        assert!((next.t - t0 - s.limits().control_period).abs() < 1e-9);
        assert_eq!(next.seq, f.seq + 1);
    }

    #[test]
    fn spectators_cannot_drive() {
        let mut s = session(2.0);
        for c in 1..=3 {
            s.connect(c);
        }
        s.handle(1, hello(Role::Driver));
        let out = s.handle(2, hello(Role::Driver));
        assert_eq!(errors(&out), vec![ErrorCode::DriverTaken]);
        s.handle(3, hello(Role::Spectator));
        assert_eq!(s.driver(), Some(1));
        let out = s.receive(2, r#"{"type":"command","v":1.0,"omega":0.0}"#);
        assert_eq!(errors(&out), vec![ErrorCode::NotDriver]);
        assert_eq!(s.held(), Command::STOP);
    }

    #[test]
    fn clipping_warns_and_malformed_frames_are_reported() {
        let mut s = session(2.0);
        s.connect(1);
        s.handle(1, hello(Role::Driver));
        let out = s.receive(1, r#"{"type":"command","v":0.5,"omega":2.0}"#);
        assert_eq!(errors(&out), vec![ErrorCode::Clipped]);
        let WireMessage::Error(e) = &out[0].msg else { unreachable!() };
        assert_eq!(e.severity, Severity::Warning);
        assert_eq!(s.held(), Command::new(0.1, 1.0));
        for bad in ["not json", r#"{"type":"command","v":"fast"}"#, r#"{"type":"warp"}"#, r#"{"type":"command","v":1,"omega":0,"x":3}"#] {
            assert_eq!(errors(&s.receive(1, bad)), vec![ErrorCode::Malformed], "{bad}");
        }
        let out = s.handle(1, WireMessage::Result(ResultFrame { outcome: Outcome::Goal, t: 0.0 }));
        assert_eq!(errors(&out), vec![ErrorCode::Unexpected]);
        assert_eq!(s.status(), SessionStatus::Running);
    }

    #[test]
    fn wrong_protocol_is_refused() {
        let mut s = session(2.0);
        s.connect(1);
        let out = s.receive(1, r#"{"type":"hello","protocol":99,"role":"driver"}"#);
        assert_eq!(errors(&out), vec![ErrorCode::Protocol]);
        assert_eq!(s.driver(), None);
    }

    #[test]
    fn driver_disconnect_aborts() {
        let mut s = session(2.0);
        s.connect(1);
        s.handle(1, hello(Role::Driver));
        s.tick();
        let out = s.disconnect(1);
        assert!(matches!(out[0].msg, WireMessage::Result(ResultFrame { outcome: Outcome::Aborted, .. })));
        assert!(s.log().is_none());
        assert_eq!(errors(&s.receive(1, r#"{"type":"command","v":1,"omega":0}"#)), Vec::<ErrorCode>::new());

        let mut s = session(2.0).keep_aborted(true);
        s.connect(1);
        s.handle(1, hello(Role::Driver));
        s.tick();
        s.disconnect(1);
        let m = compute_metrics(std::slice::from_ref(s.log().unwrap())).unwrap();
        assert_eq!((m.runs, m.success_rate), (1, 0.0));
    }

    #[test]
    fn collision_ends_session() {
        let mut s = Session::new(
            "c",
            load_scenario("name = \"wall\"\n[map]\nmin = [-1.0, -1.0]\nmax = [1.0, 1.0]\nboundary_walls = true\n[start]\nx = 0.0\ny = 0.0\ntheta = 3.14159\n[goals]\npoints = [[0.5, 0.5]]\n").unwrap(),
            EvalConfig::default(),
            0,
        )
        .unwrap();
        s.connect(1);
        s.handle(1, hello(Role::Driver));
        s.receive(1, r#"{"type":"command","v":1.0,"omega":0.0}"#);
        let mut outcome = None;
        for _ in 0..100 {
            for o in s.tick() {
                if let WireMessage::Result(r) = o.msg {
                    outcome = Some(r.outcome);
                }
            }
        }
        assert_eq!(outcome, Some(Outcome::Collision));
        let m = compute_metrics(std::slice::from_ref(s.log().unwrap())).unwrap();
        assert_eq!((m.success_rate, m.collisions), (0.0, 1.0));
    }

    #[derive(Clone, Debug)]
    enum Op {
        Connect(ConnId),
        Hello(ConnId, bool),
        Command(ConnId, f64, f64),
        Disconnect(ConnId),
        Tick,
    }

    fn op() -> impl Strategy<Value = Op> {
        let conn = 0u64..4;
        prop_oneof![
            conn.clone().prop_map(Op::Connect),
            (conn.clone(), any::<bool>()).prop_map(|(c, d)| Op::Hello(c, d)),
            (conn.clone(), -2.0..2.0f64, -2.0..2.0f64).prop_map(|(c, v, w)| Op::Command(c, v, w)),
            conn.prop_map(Op::Disconnect),
            Just(Op::Tick),
        ]
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn single_driver_under_any_interleaving(ops in proptest::collection::vec(op(), 1..60)) {
            let mut s = session(2.0);
            let mut finished_log: Option<Option<TrajectoryLog>> = None;
            for op in ops {
                let before_t = s.t();
                let before_status = s.status();
                let out = match op {
                    Op::Connect(c) => { s.connect(c); Vec::new() }
                    Op::Hello(c, d) => s.handle(c, hello(if d { Role::Driver } else { Role::Spectator })),
                    Op::Command(c, v, w) => s.handle(c, WireMessage::Command(CommandFrame { v, omega: w })),
                    Op::Disconnect(c) => s.disconnect(c),
                    Op::Tick => s.tick(),
                };
                if let Some(d) = s.driver() {
                    prop_assert!(s.connected().contains(&d));
                    prop_assert!(!s.spectators().contains(&d));
                }
                prop_assert!(s.spectators().is_subset(s.connected()));
                if before_status != SessionStatus::Running {
                    prop_assert_eq!(s.t(), before_t);
                }
                if let SessionStatus::Finished(_) = before_status {
                    prop_assert_eq!(s.status(), before_status);
                    prop_assert!(out.iter().all(|o| matches!(o.msg, WireMessage::Error(_))));
                    prop_assert_eq!(finished_log.as_ref().unwrap(), &s.log().cloned());
                }
                if let SessionStatus::Finished(_) = s.status() {
                    finished_log.get_or_insert_with(|| s.log().cloned());
                }
                for o in &out {
                    if let WireMessage::Hello(h) = &o.msg {
                        if h.role == Role::Driver {
                            prop_assert_eq!(o.to, Recipient::One(s.driver().unwrap()));
                        }
                    }
                }
            }
        }
    }
}
