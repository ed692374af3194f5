use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::agent::{select_action, DdpgAgent};
use super::config::{epsilon, ConfigError, DdpgConfig};
use super::replay::{ReplayBuffer, Transition};
use super::reward::{compute_reward, DoneReason};
use super::DdpgError;
use crate::geom::{Segment, Vec2};
use crate::nn::{self, ActorNet, ACTION_DIM};
use crate::perception::{build_observation, Observation, ObservationConfig, OBS_DIM};
use crate::sim::{Bounds, Command, Keyframe, ObstacleScript, RobotState, SimConfig, StepEvent, World, WorldMap};

/// The world of one training episode.
#[derive(Clone, Debug)]
pub struct EpisodeSetup {
    pub map: WorldMap,
    pub obstacles: Vec<ObstacleScript>,
    pub start: RobotState,
    pub goal: Vec2,
}

/// Produces a fresh episode world from the episode's random stream.
pub trait ScenarioSampler {
    fn sample(&self, rng: &mut ChaCha8Rng) -> EpisodeSetup;
}

/// Walled rectangle with a fixed start and a uniform goal kept `wall_margin`
/// away from the walls.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmptyArena {
    pub bounds: Bounds,
    pub start: RobotState,
    pub wall_margin: f64,
    /// Goals closer than this to the start are redrawn.
    pub min_goal_distance: f64,
}

impl EmptyArena {
    /// `2·half × 2·half` room centred on the origin, start at the centre facing +x.
    pub fn square(half: f64) -> Self {
        Self {
            bounds: Bounds::new(Vec2::new(-half, -half), Vec2::new(half, half)),
            start: RobotState::default(),
            wall_margin: 0.5,
            min_goal_distance: 0.4,
        }
    }
}

fn uniform_in(rng: &mut ChaCha8Rng, b: &Bounds, inset: f64) -> Vec2 {
    Vec2::new(
        rng.random_range(b.min.x + inset..=b.max.x - inset),
        rng.random_range(b.min.y + inset..=b.max.y - inset),
    )
}

impl ScenarioSampler for EmptyArena {
    fn sample(&self, rng: &mut ChaCha8Rng) -> EpisodeSetup {
        let goal = loop {
            let g = uniform_in(rng, &self.bounds, self.wall_margin);
            if g.distance(self.start.position()) >= self.min_goal_distance {
                break g;
            }
        };
        EpisodeSetup {
            map: WorldMap::room(self.bounds),
            obstacles: vec![],
            start: self.start,
            goal,
        }
    }
}

/// Walled rectangle with random boxes and sliding panels, regenerated every episode.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClutteredRoom {
    pub bounds: Bounds,
    pub start: RobotState,
    /// Inclusive range of static box counts.
    pub boxes: (usize, usize),
    /// Side length range of the boxes.
    pub box_side: (f64, f64),
    /// Inclusive range of moving panel counts.
    pub panels: (usize, usize),
    pub panel_length: (f64, f64),
    /// Nothing is placed (or swept) closer than this to the start.
    pub start_clearance: f64,
    /// Goal clearance from every wall, box and panel keyframe position.
    pub goal_clearance: f64,
    pub min_goal_distance: f64,
    /// Draw the start heading uniformly instead of using `start.theta`.
    pub random_heading: bool,
}

impl ClutteredRoom {
    pub fn new(bounds: Bounds, start: RobotState) -> Self {
        Self {
            bounds,
            start,
            boxes: (0, 4),
            box_side: (0.2, 0.6),
            panels: (0, 1),
            panel_length: (0.4, 0.9),
            start_clearance: 0.5,
            goal_clearance: 0.5,
            min_goal_distance: 0.8,
            random_heading: true,
        }
    }

    fn sample_boxes(&self, rng: &mut ChaCha8Rng) -> Vec<Segment> {
        let n = rng.random_range(self.boxes.0..=self.boxes.1);
        let mut segs = Vec::new();
        let mut placed = 0;
        let mut tries = 0;
        while placed < n && tries < 200 {
            tries += 1;
            let hw = rng.random_range(self.box_side.0..=self.box_side.1) / 2.0;
            let hh = rng.random_range(self.box_side.0..=self.box_side.1) / 2.0;
            let b = &self.bounds;
            if b.width() <= 2.0 * hw || b.height() <= 2.0 * hh {
                continue;
            }
            let c = Vec2::new(
                rng.random_range(b.min.x + hw..b.max.x - hw),
                rng.random_range(b.min.y + hh..b.max.y - hh),
            );
            let sides = rect(c, hw, hh);
            if sides.iter().any(|s| s.distance_to(self.start.position()) < self.start_clearance) {
                continue;
            }
            segs.extend(sides);
            placed += 1;
        }
        segs
    }

    fn sample_panel(&self, rng: &mut ChaCha8Rng) -> Option<ObstacleScript> {
        for _ in 0..100 {
            let half = rng.random_range(self.panel_length.0..=self.panel_length.1) / 2.0;
            let orient = rng.random_range(0.0..std::f64::consts::PI);
            let shape = vec![Segment::new(Vec2::from_angle(orient) * -half, Vec2::from_angle(orient) * half)];
            let p0 = uniform_in(rng, &self.bounds, half.min(self.bounds.width().min(self.bounds.height()) / 2.0));
            let p1 = p0 + Vec2::from_angle(rng.random_range(-std::f64::consts::PI..std::f64::consts::PI)) * rng.random_range(0.3..1.2);
            if !self.bounds.contains(p1) {
                continue;
            }
            let t0 = rng.random_range(0.0..12.0);
            let duration = rng.random_range(2.0..5.0);
            let script = ObstacleScript {
                shape,
                keyframes: vec![Keyframe { t: t0, x: p0.x, y: p0.y }, Keyframe { t: t0 + duration, x: p1.x, y: p1.y }],
            };
            let sweep_clear = (0..=10).all(|k| {
                let t = t0 + duration * k as f64 / 10.0;
                script
                    .segments_at(t)
                    .all(|s| s.distance_to(self.start.position()) >= self.start_clearance)
            });
            if sweep_clear {
                return Some(script);
            }
        }
        None
    }
}

fn rect(c: Vec2, hw: f64, hh: f64) -> [Segment; 4] {
    let p = [
        Vec2::new(c.x - hw, c.y - hh),
        Vec2::new(c.x + hw, c.y - hh),
        Vec2::new(c.x + hw, c.y + hh),
        Vec2::new(c.x - hw, c.y + hh),
    ];
    [Segment::new(p[0], p[1]), Segment::new(p[1], p[2]), Segment::new(p[2], p[3]), Segment::new(p[3], p[0])]
}

impl ScenarioSampler for ClutteredRoom {
    fn sample(&self, rng: &mut ChaCha8Rng) -> EpisodeSetup {
        let mut start = self.start;
        if self.random_heading {
            start.theta = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
        }
        loop {
            let mut segs = self.bounds.walls();
            segs.extend(self.sample_boxes(rng));
            let n_panels = rng.random_range(self.panels.0..=self.panels.1);
            let obstacles: Vec<ObstacleScript> = (0..n_panels).filter_map(|_| self.sample_panel(rng)).collect();
            let mut keyframe_segs: Vec<Segment> = Vec::new();
            for o in &obstacles {
                for k in &o.keyframes {
                    keyframe_segs.extend(o.segments_at(k.t));
                }
            }
            for _ in 0..500 {
                let g = uniform_in(rng, &self.bounds, self.goal_clearance);
                if g.distance(start.position()) < self.min_goal_distance {
                    continue;
                }
                if segs.iter().chain(&keyframe_segs).all(|s| s.distance_to(g) >= self.goal_clearance) {
                    let map = WorldMap {
                        segments: segs,
                        bounds: self.bounds,
                    };
                    return EpisodeSetup {
                        map,
                        obstacles,
                        start,
                        goal: g,
                    };
                }
            }
        }
    }
}

/// Stops training once the success rate over the last `window` episodes reaches `success_rate`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EarlyStop {
    pub window: usize,
    pub success_rate: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub ddpg: DdpgConfig,
    pub sim: SimConfig,
    pub obs: ObservationConfig,
    pub goal_radius: f64,
    pub episodes: u64,
    /// Episodes between checkpoints; 0 disables them.
    pub checkpoint_every: u64,
    pub early_stop: Option<EarlyStop>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            ddpg: DdpgConfig::default(),
            sim: SimConfig::default(),
            obs: ObservationConfig::default(),
            goal_radius: 0.2,
            episodes: 3000,
            checkpoint_every: 100,
            early_stop: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), DdpgError> {
        self.ddpg.validate()?;
        if !(self.goal_radius > 0.0) {
            return Err(ConfigError::NonPositive { name: "goal_radius", value: self.goal_radius }.into());
        }
        if self.sim.substeps() == 0 {
            return Err(ConfigError::NonPositive { name: "substeps", value: 0.0 }.into());
        }
        Ok(())
    }
}

/// Normalized action to a physical velocity command.
pub fn action_to_command(a: [f64; ACTION_DIM], sim: &SimConfig) -> Command {
    Command::new(a[0] * sim.v_max, a[1] * sim.omega_max)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub episode: u64,
    pub steps: u64,
    #[serde(rename = "return")]
    pub episode_return: f64,
    pub outcome: DoneReason,
    pub epsilon: f64,
    /// Mean pre-step critic loss over the episode's updates; absent during warmup.
    pub critic_loss: Option<f64>,
    pub mean_q: Option<f64>,
    pub updates: u64,
}

/// Per-episode records, stored as JSON lines.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainingLog {
    pub records: Vec<EpisodeRecord>,
}

impl TrainingLog {
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(r).expect("records serialize"));
            out.push('\n');
        }
        out
    }

    pub fn write(&self, path: impl AsRef<Path>) -> std::io::Result<()> {
        fs::write(path, self.to_jsonl())
    }

    pub fn read(path: impl AsRef<Path>) -> std::io::Result<Self> {
        let mut records = Vec::new();
        for line in BufReader::new(fs::File::open(path)?).lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            records.push(serde_json::from_str(&line).map_err(std::io::Error::other)?);
        }
        Ok(Self { records })
    }

    /// Fraction of goal outcomes among the last `window` episodes (fewer if the log is shorter).
    pub fn moving_success(&self, window: usize) -> Option<f64> {
        let n = self.records.len().min(window);
        if n == 0 {
            return None;
        }
        let hits = self.records[self.records.len() - n..]
            .iter()
            .filter(|r| r.outcome == DoneReason::Goal)
            .count();
        Some(hits as f64 / n as f64)
    }
}

#[derive(Serialize, Deserialize)]
struct CheckpointState {
    seed: u64,
    episode: u64,
    updates: u64,
    config: TrainConfig,
}

fn observe(world: &World, goal: Vec2, cfg: &ObservationConfig) -> (Observation, [f64; OBS_DIM]) {
    let s = world.state();
    let obs = build_observation(&world.scan(), (s.x, s.y, s.theta), goal, cfg).expect("scan length divisible by sectors");
    let norm = obs.normalized(cfg);
    (obs, norm)
}

/// Resumable DDPG training state. Each episode draws from its own random
/// stream derived from the seed, so runs are reproducible episode by episode.
pub struct Trainer {
    pub cfg: TrainConfig,
    pub seed: u64,
    pub agent: DdpgAgent,
    pub buffer: ReplayBuffer,
    pub log: TrainingLog,
    /// Index of the next episode.
    pub episode: u64,
}

impl Trainer {
    pub fn new(cfg: TrainConfig, seed: u64) -> Result<Self, DdpgError> {
        cfg.validate()?;
        Ok(Self {
            agent: DdpgAgent::from_seed(seed),
            buffer: ReplayBuffer::new(cfg.ddpg.buffer_capacity),
            log: TrainingLog::default(),
            episode: 0,
            seed,
            cfg,
        })
    }

    fn episode_rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.episode);
        rng
    }

    pub fn run_episode(&mut self, sampler: &dyn ScenarioSampler) -> Result<&EpisodeRecord, DdpgError> {
        let mut rng = self.episode_rng();
        let ddpg = &self.cfg.ddpg;
        let setup = sampler.sample(&mut rng);
        let goal = setup.goal;
        let mut world = World::new(setup.map, setup.obstacles, setup.start, self.cfg.sim.clone());
        let eps = epsilon(self.episode, ddpg);
        let freq = ddpg.control_frequency();

        let (mut obs, mut s) = observe(&world, goal, &self.cfg.obs);
        let (mut steps, mut ret) = (0u64, 0.0);
        let (mut loss_sum, mut q_sum, mut n_updates) = (0.0, 0.0, 0u64);
        let outcome = loop {
            let a = select_action(&self.agent.actor, &s, eps, &mut rng)?;
            let cmd = action_to_command(a, &self.cfg.sim);
            let event = world.step_control(cmd);
            let (obs2, s2) = observe(&world, goal, &self.cfg.obs);
            steps += 1;
            let reason = if event == StepEvent::Collision {
                DoneReason::Collision
            } else if obs2.goal_distance < self.cfg.goal_radius {
                DoneReason::Goal
            } else if world.state().t >= ddpg.episode_timeout {
                DoneReason::Timeout
            } else {
                DoneReason::Running
            };
            let r = compute_reward(
                obs.goal_distance,
                obs2.goal_distance,
                obs2.goal_heading,
                cmd.omega,
                reason,
                freq,
                &ddpg.reward,
            );
            ret += r;
            self.buffer.push(Transition {
                s,
                a,
                r,
                s_next: s2,
                // a timeout truncates the episode but is not a terminal state
                done: matches!(reason, DoneReason::Goal | DoneReason::Collision),
                reason,
            });
            if self.buffer.len() >= ddpg.warmup_transitions.max(ddpg.batch_size) {
                let batch = self.buffer.sample(ddpg.batch_size, &mut rng);
                let stats = self.agent.update(&batch, ddpg)?;
                loss_sum += stats.critic_loss;
                q_sum += stats.mean_q;
                n_updates += 1;
            }
            if reason.is_terminal() {
                break reason;
            }
            obs = obs2;
            s = s2;
        };
        let mean = |sum: f64| (n_updates > 0).then(|| sum / n_updates as f64);
        self.log.records.push(EpisodeRecord {
            episode: self.episode,
            steps,
            episode_return: ret,
            outcome,
            epsilon: eps,
            critic_loss: mean(loss_sum),
            mean_q: mean(q_sum),
            updates: self.agent.updates,
        });
        self.episode += 1;
        Ok(self.log.records.last().unwrap())
    }

    pub fn finished(&self) -> bool {
        if self.episode >= self.cfg.episodes {
            return true;
        }
        match &self.cfg.early_stop {
            Some(stop) => {
                self.log.records.len() >= stop.window
                    && self.log.moving_success(stop.window).unwrap_or(0.0) >= stop.success_rate
            }
            None => false,
        }
    }

    /// Writes networks, optimizer state, the log and the episode counter to `dir`.
    /// The replay buffer is not saved; a resumed run refills it before updating.
    pub fn save_checkpoint(&self, dir: impl AsRef<Path>) -> Result<(), DdpgError> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;
        let a = &self.agent;
        nn::save_actor(&a.actor, dir.join("actor.bin"))?;
        nn::save_critic(&a.critic, dir.join("critic.bin"))?;
        nn::save_actor(&a.target_actor, dir.join("target_actor.bin"))?;
        nn::save_critic(&a.target_critic, dir.join("target_critic.bin"))?;
        nn::save_adam(&a.actor_opt, dir.join("actor_adam.bin"))?;
        nn::save_adam(&a.critic_opt, dir.join("critic_adam.bin"))?;
        self.log.write(dir.join("training_log.jsonl"))?;
        let state = CheckpointState {
            seed: self.seed,
            episode: self.episode,
            updates: a.updates,
            config: self.cfg.clone(),
        };
        let mut w = BufWriter::new(fs::File::create(dir.join("state.json"))?);
        serde_json::to_writer_pretty(&mut w, &state).map_err(|e| DdpgError::Checkpoint(e.to_string()))?;
        w.flush()?;
        Ok(())
    }

    pub fn resume(dir: impl AsRef<Path>) -> Result<Self, DdpgError> {
        let dir = dir.as_ref();
        let text = fs::read_to_string(dir.join("state.json"))?;
        let state: CheckpointState = serde_json::from_str(&text).map_err(|e| DdpgError::Checkpoint(e.to_string()))?;
        state.config.validate()?;
        let actor = nn::load_actor(dir.join("actor.bin"))?;
        let critic = nn::load_critic(dir.join("critic.bin"))?;
        let agent = DdpgAgent {
            target_actor: nn::load_actor(dir.join("target_actor.bin"))?,
            target_critic: nn::load_critic(dir.join("target_critic.bin"))?,
            actor_opt: nn::load_adam(dir.join("actor_adam.bin"))?,
            critic_opt: nn::load_adam(dir.join("critic_adam.bin"))?,
            updates: state.updates,
            actor,
            critic,
        };
        if agent.actor_opt.moments().0.len() != agent.actor.params().len()
            || agent.critic_opt.moments().0.len() != agent.critic.params().len()
        {
            return Err(DdpgError::Checkpoint("optimizer state does not match the networks".into()));
        }
        let log = TrainingLog::read(dir.join("training_log.jsonl"))?;
        if log.records.len() as u64 != state.episode {
            return Err(DdpgError::Checkpoint(format!(
                "log holds {} episodes, state says {}",
                log.records.len(),
                state.episode
            )));
        }
        Ok(Self {
            buffer: ReplayBuffer::new(state.config.ddpg.buffer_capacity),
            cfg: state.config,
            seed: state.seed,
            agent,
            log,
            episode: state.episode,
        })
    }

    /// Runs episodes until `finished`, checkpointing into `checkpoint_dir` on schedule
    /// and once more at the end.
    pub fn run(
        &mut self,
        sampler: &dyn ScenarioSampler,
        checkpoint_dir: Option<&Path>,
        mut on_episode: impl FnMut(&EpisodeRecord),
    ) -> Result<(), DdpgError> {
        while !self.finished() {
            on_episode(self.run_episode(sampler)?);
            if let Some(dir) = checkpoint_dir {
                if self.cfg.checkpoint_every > 0 && self.episode % self.cfg.checkpoint_every == 0 {
                    self.save_checkpoint(dir)?;
                }
            }
        }
        if let Some(dir) = checkpoint_dir {
            self.save_checkpoint(dir)?;
        }
        Ok(())
    }
}

/// Trains from scratch and returns the online actor with the episode log.
pub fn train(sampler: &dyn ScenarioSampler, cfg: &TrainConfig, seed: u64) -> Result<(ActorNet, TrainingLog), DdpgError> {
    let mut trainer = Trainer::new(cfg.clone(), seed)?;
    trainer.run(sampler, None, |_| {})?;
    Ok((trainer.agent.actor, trainer.log))
}
