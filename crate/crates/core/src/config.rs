//! Run configuration.
//!
//! Values resolve in a fixed order: built-in defaults, then the TOML config
//! file, then command-line overrides. Robot, lidar and observation settings
//! live once at the top level and are copied into the training, evaluation
//! and DWA configs on resolution.
//!
//! ```toml
//! seed = 7
//! out = "runs"
//!
//! [sim]
//! v_max = 0.2
//!
//! [train]
//! episodes = 3000
//! arena = { kind = "empty", half = 2.0 }
//!
//! [eval]
//! scenarios = ["scenarios/s1_analog.toml"]
//! planners = ["rl", "dwa"]
//! runs = 11
//! actor = "models/s1_actor.bin"
//!
//! [uwb.noise]
//! sigma = 0.05
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ddpg::{ClutteredRoom, DdpgConfig, EarlyStop, EmptyArena, ScenarioSampler, TrainConfig};
use crate::dwa::DwaConfig;
use crate::eval::{EvalConfig, Localization};
use crate::geom::Vec2;
use crate::perception::ObservationConfig;
use crate::sim::{Bounds, RobotState, SimConfig};
use crate::uwb::{LocalizerConfig, RangingNoiseModel};

#[derive(Debug, Error)]
pub enum RunConfigError {
    #[error("cannot read config {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("config {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TrainArena {
    /// Open square of side `2 * half` centred on the start.
    Empty { half: f64 },
    /// Walled room with random boxes and sliding panels.
    Cluttered { min: [f64; 2], max: [f64; 2] },
}

impl TrainArena {
    pub fn sampler(&self) -> Box<dyn ScenarioSampler> {
        match *self {
            TrainArena::Empty { half } => Box::new(EmptyArena::square(half)),
            TrainArena::Cluttered { min, max } => {
                let bounds = Bounds::new(Vec2::new(min[0], min[1]), Vec2::new(max[0], max[1]));
                Box::new(ClutteredRoom::new(bounds, RobotState::default()))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainSection {
    pub episodes: u64,
    pub goal_radius: f64,
    pub checkpoint_every: u64,
    pub early_stop: Option<EarlyStop>,
    pub arena: TrainArena,
}

impl Default for TrainSection {
    fn default() -> Self {
        let base = TrainConfig::default();
        Self {
            episodes: base.episodes,
            goal_radius: base.goal_radius,
            checkpoint_every: base.checkpoint_every,
            early_stop: base.early_stop,
            arena: TrainArena::Empty { half: 2.0 },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct UwbSection {
    pub localizer: LocalizerConfig,
    pub noise: RangingNoiseModel,
    pub localization: Localization,
}

/// Range noise applied by `eval` and `serve` when no sweep is given, meters.
pub const DEFAULT_EVAL_SIGMA: f64 = 0.05;

impl Default for UwbSection {
    fn default() -> Self {
        Self {
            localizer: LocalizerConfig::default(),
            noise: RangingNoiseModel {
                sigma: DEFAULT_EVAL_SIGMA,
                ..RangingNoiseModel::default()
            },
            localization: Localization::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalSection {
    pub scenarios: Vec<PathBuf>,
    pub planners: Vec<String>,
    pub runs: usize,
    /// Actor weights used by the `rl` planner.
    pub actor: Option<PathBuf>,
    /// UWB noise levels to sweep; empty means the single `uwb.noise.sigma`.
    pub noise_sweep: Vec<f64>,
}

impl Default for EvalSection {
    fn default() -> Self {
        Self {
            scenarios: vec![PathBuf::from("scenarios/s1_analog.toml")],
            planners: vec!["rl".into(), "dwa".into()],
            runs: 11,
            actor: None,
            noise_sweep: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchSection {
    pub calls: usize,
    pub warmup: usize,
    /// Distinct random observations cycled through.
    pub inputs: usize,
}

impl Default for BenchSection {
    fn default() -> Self {
        Self {
            calls: 10_000,
            warmup: 500,
            inputs: 256,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ServeSection {
    pub host: String,
    pub port: u16,
    /// Simulated seconds per wall-clock second; 1 is real time.
    pub speed: f64,
    /// Outgoing frames buffered per connection before it is dropped.
    pub queue: usize,
    /// Count aborted sessions as failures instead of leaving them out.
    pub aborted_counts_as_failure: bool,
}

impl Default for ServeSection {
    fn default() -> Self {
        Self {
            host: "127.0.0.1".into(),
            port: 8080,
            speed: 1.0,
            queue: 64,
            aborted_counts_as_failure: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub seed: u64,
    /// Parent directory of timestamped run directories.
    pub out: PathBuf,
    pub sim: SimConfig,
    pub obs: ObservationConfig,
    pub ddpg: DdpgConfig,
    pub train: TrainSection,
    pub dwa: DwaConfig,
    pub uwb: UwbSection,
    pub eval: EvalSection,
    pub bench: BenchSection,
    pub serve: ServeSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            out: PathBuf::from("runs"),
            sim: SimConfig::default(),
            obs: ObservationConfig::default(),
            ddpg: DdpgConfig::default(),
            train: TrainSection::default(),
            dwa: DwaConfig::default(),
            uwb: UwbSection::default(),
            eval: EvalSection::default(),
            bench: BenchSection::default(),
            serve: ServeSection::default(),
        }
    }
}

/// Command-line values; `None` leaves the file or default value in place.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub scenarios: Option<Vec<PathBuf>>,
    pub planners: Option<Vec<String>>,
    pub noise_sigma: Option<Vec<f64>>,
    pub episodes: Option<u64>,
    pub out: Option<PathBuf>,
    pub port: Option<u16>,
    pub actor: Option<PathBuf>,
    pub runs: Option<usize>,
}

impl RunConfig {
    pub fn from_toml_str(text: &str, path: &Path) -> Result<Self, RunConfigError> {
        toml::from_str(text).map_err(|e| RunConfigError::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }

    /// Defaults, then `file` if given, then `overrides`; validated.
    pub fn resolve(file: Option<&Path>, overrides: &Overrides) -> Result<Self, RunConfigError> {
        let mut cfg = match file {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|source| RunConfigError::Read {
                    path: path.to_path_buf(),
                    source,
                })?;
                Self::from_toml_str(&text, path)?
            }
            None => Self::default(),
        };
        cfg.apply(overrides);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(seed) = o.seed {
            self.seed = seed;
        }
        if let Some(s) = &o.scenarios {
            self.eval.scenarios = s.clone();
        }
        if let Some(p) = &o.planners {
            self.eval.planners = p.clone();
        }
        if let Some(sigmas) = &o.noise_sigma {
            match sigmas.as_slice() {
                [single] => {
                    self.uwb.noise.sigma = *single;
                    self.eval.noise_sweep.clear();
                }
                _ => self.eval.noise_sweep = sigmas.clone(),
            }
        }
        if let Some(n) = o.episodes {
            self.train.episodes = n;
        }
        if let Some(out) = &o.out {
            self.out = out.clone();
        }
        if let Some(port) = o.port {
            self.serve.port = port;
        }
        if let Some(actor) = &o.actor {
            self.eval.actor = Some(actor.clone());
        }
        if let Some(runs) = o.runs {
            self.eval.runs = runs;
        }
    }

    pub fn validate(&self) -> Result<(), RunConfigError> {
        let invalid = |m: String| Err(RunConfigError::Invalid(m));
        self.train_config().validate().map_err(|e| RunConfigError::Invalid(e.to_string()))?;
        self.dwa_config().validate().map_err(|e| RunConfigError::Invalid(e.to_string()))?;
        self.uwb.noise.validate().map_err(|e| RunConfigError::Invalid(e.to_string()))?;
        for &s in &self.eval.noise_sweep {
            if !(s >= 0.0 && s.is_finite()) {
                return invalid(format!("noise sweep value {s} must be a finite non-negative sigma"));
            }
        }
        if !(self.uwb.localizer.rate_hz > 0.0) {
            return invalid(format!("localizer rate {} must be positive", self.uwb.localizer.rate_hz));
        }
        if self.sim.substeps() == 0 {
            return invalid("control period shorter than the physics step".into());
        }
        match self.train.arena {
            TrainArena::Empty { half } if !(half > 0.5) => {
                return invalid(format!("arena half-width {half} leaves no room for goals"));
            }
            TrainArena::Cluttered { min, max } if !(max[0] - min[0] > 2.0 && max[1] - min[1] > 2.0) => {
                return invalid("cluttered arena must be at least 2 m on each side".into());
            }
            _ => {}
        }
        if let Some(es) = &self.train.early_stop {
            if es.window == 0 || !(0.0..=1.0).contains(&es.success_rate) {
                return invalid("early stop needs a positive window and a rate in [0, 1]".into());
            }
        }
        if self.eval.runs == 0 {
            return invalid("eval.runs must be positive".into());
        }
        for p in &self.eval.planners {
            if !matches!(p.as_str(), "rl" | "dwa") {
                return invalid(format!("unknown planner '{p}' (expected rl or dwa)"));
            }
        }
        if self.bench.calls == 0 || self.bench.inputs == 0 {
            return invalid("bench calls and inputs must be positive".into());
        }
        if !(self.serve.speed > 0.0 && self.serve.speed.is_finite()) {
            return invalid(format!("serve.speed {} must be positive", self.serve.speed));
        }
        if self.serve.queue == 0 {
            return invalid("serve.queue must be positive".into());
        }
        Ok(())
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            ddpg: self.ddpg.clone(),
            sim: self.sim.clone(),
            obs: self.obs.clone(),
            goal_radius: self.train.goal_radius,
            episodes: self.train.episodes,
            checkpoint_every: self.train.checkpoint_every,
            early_stop: self.train.early_stop.clone(),
        }
    }

    pub fn dwa_config(&self) -> DwaConfig {
        DwaConfig {
            v_max: self.sim.v_max,
            omega_max: self.sim.omega_max,
            robot_radius: self.sim.robot_radius,
            obs: self.obs.clone(),
            ..self.dwa.clone()
        }
    }

    /// Evaluation settings at UWB noise level `sigma`.
    pub fn eval_config(&self, sigma: f64) -> EvalConfig {
        EvalConfig {
            sim: self.sim.clone(),
            obs: self.obs.clone(),
            localizer: self.uwb.localizer.clone(),
            noise: RangingNoiseModel { sigma, ..self.uwb.noise.clone() },
            localization: self.uwb.localization,
        }
    }

    /// Noise levels evaluated by a run.
    pub fn sigmas(&self) -> Vec<f64> {
        if self.eval.noise_sweep.is_empty() {
            vec![self.uwb.noise.sigma]
        } else {
            self.eval.noise_sweep.clone()
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("run config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layering_order() {
        let file = "seed = 3\n[train]\nepisodes = 50\n[uwb.noise]\nsigma = 0.05\n";
        let mut cfg = RunConfig::from_toml_str(file, Path::new("x.toml")).unwrap();
        assert_eq!((cfg.seed, cfg.train.episodes), (3, 50));
        assert_eq!(cfg.ddpg, DdpgConfig::default());
        cfg.apply(&Overrides {
            seed: Some(9),
            noise_sigma: Some(vec![0.1]),
            ..Default::default()
        });
        assert_eq!((cfg.seed, cfg.train.episodes, cfg.uwb.noise.sigma), (9, 50, 0.1));
        assert_eq!(cfg.sigmas(), vec![0.1]);
        cfg.apply(&Overrides {
            noise_sigma: Some(vec![0.0, 0.05, 0.1]),
            ..Default::default()
        });
        assert_eq!(cfg.sigmas().len(), 3);
    }

    #[test]
    fn resolved_copy_roundtrips() {
        let mut cfg = RunConfig::default();
        cfg.train.arena = TrainArena::Cluttered { min: [-0.8, -1.5], max: [5.2, 1.5] };
        cfg.train.early_stop = Some(EarlyStop { window: 100, success_rate: 0.8 });
        let back = RunConfig::from_toml_str(&cfg.to_toml(), Path::new("r.toml")).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn shared_sections_propagate() {
        let mut cfg = RunConfig::default();
        cfg.sim.v_max = 0.3;
        cfg.obs.max_range = 3.0;
        assert_eq!(cfg.dwa_config().v_max, 0.3);
        assert_eq!(cfg.dwa_config().obs.max_range, 3.0);
        assert_eq!(cfg.train_config().sim.v_max, 0.3);
        assert_eq!(cfg.eval_config(0.07).noise.sigma, 0.07);
        assert_eq!(cfg.eval_config(0.07).obs.max_range, 3.0);
    }

    #[test]
    fn rejects_bad_values() {
        let bad = [
            "[ddpg]\nbatch_size = 0\n",
            "[eval]\nplanners = [\"astar\"]\n",
            "[eval]\nruns = 0\n",
            "[uwb.noise]\nsigma = -1.0\n",
            "[train]\narena = { kind = \"empty\", half = 0.1 }\n",
        ];
        for text in bad {
            let cfg = RunConfig::from_toml_str(text, Path::new("c.toml")).unwrap();
            assert!(cfg.validate().is_err(), "{text}");
        }
        assert!(matches!(
            RunConfig::from_toml_str("seed = \"x\"", Path::new("c.toml")),
            Err(RunConfigError::Parse { .. })
        ));
        let err = RunConfig::resolve(Some(Path::new("/nonexistent/cfg.toml")), &Overrides::default()).unwrap_err();
        assert!(err.to_string().contains("/nonexistent/cfg.toml"));
    }
}
