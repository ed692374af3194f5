use crate::ddpg::action_to_command;
use crate::dwa::{dwa_plan_obs, DwaConfig};
use crate::nn::ActorNet;
use crate::perception::{Observation, OBS_DIM};
use crate::sim::{Command, SimConfig};

use super::EvalError;

/// What a planner sees at a decision: the observation built from the
/// estimated pose and the previous command.
#[derive(Clone, Debug)]
pub struct PlannerInput<'a> {
    pub t: f64,
    pub obs: &'a Observation,
    pub normalized: &'a [f64; OBS_DIM],
    pub last_cmd: Command,
}

pub trait Planner {
    fn id(&self) -> String;

    fn reset(&mut self) {}

    fn decide(&mut self, input: &PlannerInput) -> Result<Command, EvalError>;
}

/// Deterministic actor policy.
pub struct RlPlanner {
    pub actor: ActorNet,
    pub sim: SimConfig,
    pub label: String,
}

impl RlPlanner {
    pub fn new(actor: ActorNet, sim: SimConfig) -> Self {
        Self {
            actor,
            sim,
            label: "rl".into(),
        }
    }
}

impl Planner for RlPlanner {
    fn id(&self) -> String {
        self.label.clone()
    }

    fn decide(&mut self, input: &PlannerInput) -> Result<Command, EvalError> {
        let a = self
            .actor
            .act(input.normalized)
            .map_err(|e| EvalError::Planner(e.to_string()))?;
        Ok(action_to_command(a, &self.sim))
    }
}

pub struct DwaPlanner {
    pub cfg: DwaConfig,
}

impl Planner for DwaPlanner {
    fn id(&self) -> String {
        "dwa".into()
    }

    fn decide(&mut self, input: &PlannerInput) -> Result<Command, EvalError> {
        let last = input.last_cmd;
        Ok(dwa_plan_obs(last.v, last.omega, input.obs, &self.cfg).cmd)
    }
}

/// Commands from an outside source, e.g. a human operator.
pub struct ExternalPlanner<F> {
    pub label: String,
    pub source: F,
}

impl<F> Planner for ExternalPlanner<F>
where
    F: FnMut(&PlannerInput) -> Result<Command, EvalError>,
{
    fn id(&self) -> String {
        self.label.clone()
    }

    fn decide(&mut self, input: &PlannerInput) -> Result<Command, EvalError> {
        (self.source)(input)
    }
}

pub struct ConstantPlanner(pub Command);

impl Planner for ConstantPlanner {
    fn id(&self) -> String {
        "constant".into()
    }

    fn decide(&mut self, _: &PlannerInput) -> Result<Command, EvalError> {
        Ok(self.0)
    }
}
