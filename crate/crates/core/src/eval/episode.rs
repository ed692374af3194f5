use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::planner::{Planner, PlannerInput};
use super::{EpisodeAborted, EvalError};
use crate::geom::Vec2;
use crate::perception::{build_observation, Observation, ObservationConfig, OBS_DIM};
use crate::sim::{advance_obstacles, Command, ScenarioSpec, SimConfig, StepEvent, World};
use crate::uwb::{simulate_ranges, AnchorSet, Localizer, LocalizerConfig, RangingNoiseModel, UwbError};

/// Where the goal-relative part of the observation gets its position from.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Localization {
    #[default]
    Uwb,
    TruePose,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    pub sim: SimConfig,
    pub obs: ObservationConfig,
    pub localizer: LocalizerConfig,
    pub noise: RangingNoiseModel,
    pub localization: Localization,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    GoalReached,
    Collision,
    Timeout,
    WaypointAdvanced,
}

impl EventKind {
    pub fn is_terminal(self) -> bool {
        self != EventKind::WaypointAdvanced
    }
}

/// State at one decision and the command issued there.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySample {
    pub t: f64,
    /// True (x, y, θ).
    pub pose: [f64; 3],
    /// Estimated (x, y, θ) the planner used.
    pub est_pose: [f64; 3],
    pub v: f64,
    pub omega: f64,
    pub goal_index: usize,
    /// True distance to the active goal.
    pub goal_distance: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryEvent {
    pub t: f64,
    pub kind: EventKind,
    pub goal_index: usize,
    /// True pose when the event fired.
    pub pose: [f64; 3],
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct UwbFixSample {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub converged: bool,
}

/// One line of a persisted trajectory log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum TrajectoryRecord {
    Header { planner: String, scenario: String, seed: u64 },
    Sample(TrajectorySample),
    Event(TrajectoryEvent),
    Fix(UwbFixSample),
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrajectoryLog {
    pub planner: String,
    pub scenario: String,
    pub seed: u64,
    pub samples: Vec<TrajectorySample>,
    pub events: Vec<TrajectoryEvent>,
    pub uwb: Vec<UwbFixSample>,
}

impl TrajectoryLog {
    pub fn terminal(&self) -> Option<&TrajectoryEvent> {
        self.events.iter().find(|e| e.kind.is_terminal())
    }

    pub fn success(&self) -> bool {
        self.terminal().is_some_and(|e| e.kind == EventKind::GoalReached) && self.collisions() == 0
    }

    pub fn collisions(&self) -> usize {
        self.events.iter().filter(|e| e.kind == EventKind::Collision).count()
    }

    pub fn records(&self) -> Vec<TrajectoryRecord> {
        let mut out = vec![TrajectoryRecord::Header {
            planner: self.planner.clone(),
            scenario: self.scenario.clone(),
            seed: self.seed,
        }];
        out.extend(self.samples.iter().copied().map(TrajectoryRecord::Sample));
        out.extend(self.uwb.iter().copied().map(TrajectoryRecord::Fix));
        out.extend(self.events.iter().copied().map(TrajectoryRecord::Event));
        out
    }

    pub fn to_jsonl(&self) -> String {
        let mut s = String::new();
        for r in self.records() {
            s.push_str(&serde_json::to_string(&r).expect("records serialize"));
            s.push('\n');
        }
        s
    }

    pub fn from_jsonl<R: BufRead>(r: R) -> Result<Self, EvalError> {
        let mut log = TrajectoryLog::default();
        let mut header = false;
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: TrajectoryRecord = serde_json::from_str(&line).map_err(|e| EvalError::Log {
                line: i + 1,
                message: e.to_string(),
            })?;
            match rec {
                TrajectoryRecord::Header { planner, scenario, seed } => {
                    log.planner = planner;
                    log.scenario = scenario;
                    log.seed = seed;
                    header = true;
                }
                TrajectoryRecord::Sample(s) => log.samples.push(s),
                TrajectoryRecord::Event(e) => log.events.push(e),
                TrajectoryRecord::Fix(f) => log.uwb.push(f),
            }
        }
        if !header {
            return Err(EvalError::Log {
                line: 1,
                message: "missing header record".into(),
            });
        }
        Ok(log)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> std::io::Result<()> {
        fs::write(path, self.to_jsonl())
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self, EvalError> {
        Self::from_jsonl(BufReader::new(fs::File::open(path)?))
    }

    /// x-y series for plotting: `series,t,x,y` rows for the true track, the
    /// estimate used by the planner and the raw UWB fixes.
    pub fn plot_csv(&self) -> String {
        let mut out = String::from("series,t,x,y\n");
        for s in &self.samples {
            out.push_str(&format!("true,{},{},{}\n", s.t, s.pose[0], s.pose[1]));
        }
        for s in &self.samples {
            out.push_str(&format!("estimated,{},{},{}\n", s.t, s.est_pose[0], s.est_pose[1]));
        }
        for f in &self.uwb {
            out.push_str(&format!("uwb,{},{},{}\n", f.t, f.x, f.y));
        }
        out
    }

    pub fn write_plot_csv(&self, mut w: impl Write) -> std::io::Result<()> {
        w.write_all(self.plot_csv().as_bytes())
    }
}

struct UwbSim {
    anchors: AnchorSet,
    scripts: Vec<crate::sim::ObstacleScript>,
    noise: RangingNoiseModel,
    rng: ChaCha8Rng,
    loc: Localizer,
    period: f64,
    tick: u64,
    error: Option<UwbError>,
}

impl UwbSim {
    /// Emits every fix due at or before `t`, measuring from position `p`.
    fn advance(&mut self, t: f64, p: Vec2, out: &mut Vec<UwbFixSample>) {
        while self.tick as f64 * self.period <= t + 1e-9 {
            let tk = self.tick as f64 * self.period;
            let m = simulate_ranges(&self.anchors, p, &advance_obstacles(&self.scripts, t), &self.noise, &mut self.rng);
            match self.loc.update(tk, &m) {
                Ok(f) => out.push(UwbFixSample {
                    t: tk,
                    x: f.position.x,
                    y: f.position.y,
                    converged: f.converged,
                }),
                Err(e) => {
                    self.error.get_or_insert(e);
                }
            }
            self.tick += 1;
        }
    }
}

/// What the episode needs next.
#[derive(Clone, Debug, PartialEq)]
pub enum Step {
    /// A command is due; the observation is built as the planner sees it.
    Decide(Decision),
    /// The episode has ended with this terminal event.
    Done(EventKind),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Decision {
    pub t: f64,
    pub obs: Observation,
    pub normalized: [f64; OBS_DIM],
    /// Estimated (x, y, θ) used for the goal terms.
    pub est_pose: [f64; 3],
    pub goal_index: usize,
}

/// Closed-loop episode advanced one decision at a time. The lidar always
/// scans from the true pose; the goal distance and bearing use the estimated
/// position. UWB fixes are produced every localizer period of simulated time,
/// with range noise drawn from `seed`; only moving obstacles occlude the
/// radio links.
pub struct EpisodeStepper {
    scenario: ScenarioSpec,
    cfg: EvalConfig,
    world: World,
    uwb: UwbSim,
    goal_index: usize,
    last_cmd: Command,
    pending: Option<Decision>,
    done: Option<EventKind>,
    log: TrajectoryLog,
}

impl EpisodeStepper {
    pub fn new(scenario: &ScenarioSpec, cfg: &EvalConfig, planner: &str, seed: u64) -> Result<Self, EvalError> {
        if scenario.goals.is_empty() {
            return Err(EvalError::Scenario("scenario has no goals".into()));
        }
        cfg.noise.validate()?;
        let anchors = AnchorSet::from_layout(&scenario.anchors)?;
        let world = World::from_scenario(scenario, cfg.sim.clone());
        let mut uwb = UwbSim {
            loc: Localizer::new(anchors.clone(), scenario.start.position(), cfg.localizer.clone()),
            anchors,
            scripts: scenario.obstacles.clone(),
            noise: cfg.noise.clone(),
            rng: ChaCha8Rng::seed_from_u64(seed),
            period: cfg.localizer.period(),
            tick: 0,
            error: None,
        };
        let mut log = TrajectoryLog {
            planner: planner.to_string(),
            scenario: scenario.name.clone(),
            seed,
            ..Default::default()
        };
        let start = *world.state();
        uwb.advance(start.t, start.position(), &mut log.uwb);
        Ok(Self {
            scenario: scenario.clone(),
            cfg: cfg.clone(),
            world,
            uwb,
            goal_index: 0,
            last_cmd: Command::STOP,
            pending: None,
            done: None,
            log,
        })
    }

    pub fn t(&self) -> f64 {
        self.world.state().t
    }

    pub fn goal_index(&self) -> usize {
        self.goal_index
    }

    pub fn last_cmd(&self) -> Command {
        self.last_cmd
    }

    pub fn finished(&self) -> Option<EventKind> {
        self.done
    }

    pub fn scenario(&self) -> &ScenarioSpec {
        &self.scenario
    }

    pub fn log(&self) -> &TrajectoryLog {
        &self.log
    }

    pub fn into_log(self) -> TrajectoryLog {
        self.log
    }

    fn event(&mut self, kind: EventKind) {
        let s = *self.world.state();
        self.log.events.push(TrajectoryEvent {
            t: s.t,
            kind,
            goal_index: self.goal_index,
            pose: [s.x, s.y, s.theta],
        });
        if kind.is_terminal() {
            self.done = Some(kind);
        }
    }

    /// Advances waypoints and checks goal and timeout at the current instant.
    pub fn observe(&mut self) -> Result<Step, EvalError> {
        if let Some(kind) = self.done {
            return Ok(Step::Done(kind));
        }
        if let Some(d) = &self.pending {
            return Ok(Step::Decide(d.clone()));
        }
        if let Some(e) = self.uwb.error.take() {
            return Err(e.into());
        }
        let st = *self.world.state();
        let est = match self.cfg.localization {
            Localization::Uwb => self.uwb.loc.last_position(),
            Localization::TruePose => st.position(),
        };
        let scan = self.world.scan();
        let obs_cfg = self.cfg.obs.clone();
        let observe = |goal: Vec2| {
            build_observation(&scan, (est.x, est.y, st.theta), goal, &obs_cfg)
                .map_err(|e| EvalError::Scenario(e.to_string()))
        };
        let mut obs = observe(self.scenario.goals[self.goal_index])?;
        while obs.goal_distance < self.scenario.goal_radius {
            if self.goal_index + 1 == self.scenario.goals.len() {
                self.event(EventKind::GoalReached);
                return Ok(Step::Done(EventKind::GoalReached));
            }
            self.event(EventKind::WaypointAdvanced);
            self.goal_index += 1;
            obs = observe(self.scenario.goals[self.goal_index])?;
        }
        if st.t > self.scenario.t_max {
            self.event(EventKind::Timeout);
            return Ok(Step::Done(EventKind::Timeout));
        }
        let d = Decision {
            t: st.t,
            normalized: obs.normalized(&self.cfg.obs),
            obs,
            est_pose: [est.x, est.y, st.theta],
            goal_index: self.goal_index,
        };
        self.pending = Some(d.clone());
        Ok(Step::Decide(d))
    }

    /// Holds `cmd` (clipped to the robot limits) for one control period.
    /// Returns the terminal event if the step ended the episode.
    pub fn apply(&mut self, cmd: Command) -> Result<Option<EventKind>, EvalError> {
        let d = match self.observe()? {
            Step::Done(kind) => return Ok(Some(kind)),
            Step::Decide(d) => d,
        };
        self.pending = None;
        let cmd = cmd.clipped(self.cfg.sim.v_max, self.cfg.sim.omega_max);
        let st = *self.world.state();
        self.log.samples.push(TrajectorySample {
            t: st.t,
            pose: [st.x, st.y, st.theta],
            est_pose: d.est_pose,
            v: cmd.v,
            omega: cmd.omega,
            goal_index: self.goal_index,
            goal_distance: st.position().distance(self.scenario.goals[self.goal_index]),
        });
        let (uwb, fixes) = (&mut self.uwb, &mut self.log.uwb);
        let stepped = self.world.step_control_with(cmd, |s| uwb.advance(s.t, s.position(), fixes));
        self.last_cmd = cmd;
        if stepped == StepEvent::Collision {
            self.event(EventKind::Collision);
            return Ok(Some(EventKind::Collision));
        }
        Ok(None)
    }
}

/// Runs one closed-loop episode to its terminal event.
pub fn run_episode(
    planner: &mut dyn Planner,
    scenario: &ScenarioSpec,
    cfg: &EvalConfig,
    seed: u64,
) -> Result<TrajectoryLog, EpisodeAborted> {
    let mut ep = match EpisodeStepper::new(scenario, cfg, &planner.id(), seed) {
        Ok(ep) => ep,
        Err(source) => {
            let partial = TrajectoryLog {
                planner: planner.id(),
                scenario: scenario.name.clone(),
                seed,
                ..Default::default()
            };
            return Err(EpisodeAborted { partial, source });
        }
    };
    planner.reset();
    loop {
        let result = ep.observe().and_then(|step| match step {
            Step::Done(kind) => Ok(Some(kind)),
            Step::Decide(d) => {
                let input = PlannerInput {
                    t: d.t,
                    obs: &d.obs,
                    normalized: &d.normalized,
                    last_cmd: ep.last_cmd(),
                };
                let cmd = planner.decide(&input)?;
                ep.apply(cmd).map(|_| None)
            }
        });
        match result {
            Ok(Some(_)) => return Ok(ep.into_log()),
            Ok(None) => {}
            Err(source) => {
                return Err(EpisodeAborted {
                    partial: ep.into_log(),
                    source,
                })
            }
        }
    }
}

/// Runs one episode per seed, spread over `threads` workers, each with its
/// own planner from `make`. Logs come back in seed order.
pub fn run_many<P, F>(
    make: F,
    scenario: &ScenarioSpec,
    cfg: &EvalConfig,
    seeds: &[u64],
    threads: usize,
) -> Result<Vec<TrajectoryLog>, EpisodeAborted>
where
    P: Planner,
    F: Fn() -> P + Sync,
{
    let threads = threads.clamp(1, seeds.len().max(1));
    let chunk = seeds.len().div_ceil(threads).max(1);
    let results: Vec<Result<Vec<TrajectoryLog>, EpisodeAborted>> = std::thread::scope(|scope| {
        let handles: Vec<_> = seeds
            .chunks(chunk)
            .map(|part| {
                let make = &make;
                scope.spawn(move || {
                    let mut planner = make();
                    part.iter().map(|&seed| run_episode(&mut planner, scenario, cfg, seed)).collect()
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("episode worker panicked")).collect()
    });
    let mut logs = Vec::with_capacity(seeds.len());
    for r in results {
        logs.extend(r?);
    }
    Ok(logs)
}
