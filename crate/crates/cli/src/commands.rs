use std::path::{Path, PathBuf};

use serde::Serialize;
use uwbnav_core::config::RunConfig;
use uwbnav_core::ddpg::{TrainingLog, Trainer};
use uwbnav_core::eval::{
    compute_metrics, random_observations, run_many, throughput_bench, ComparisonRow, ComparisonTable, DwaPlanner,
    MetricsReport, RlPlanner, ThroughputReport, TrajectoryLog,
};
use uwbnav_core::nn::{self, ActorNet};

use crate::{create_run_dir, load_scenario_file, runtime, CliError};

pub struct TrainOutcome {
    pub run_dir: PathBuf,
    pub log: TrainingLog,
}

pub fn train(cfg: &RunConfig, resume: Option<&Path>) -> Result<TrainOutcome, CliError> {
    let mut trainer = match resume {
        Some(dir) => {
            let mut t = Trainer::resume(dir)
                .map_err(|e| CliError::Config(format!("cannot resume from {}: {e}", dir.display())))?;
            t.cfg.episodes = cfg.train.episodes;
            t.cfg.early_stop = cfg.train.early_stop.clone();
            t
        }
        None => Trainer::new(cfg.train_config(), cfg.seed).map_err(|e| CliError::Config(e.to_string()))?,
    };
    let run_dir = create_run_dir(cfg, "train")?;
    let sampler = cfg.train.arena.sampler();
    let checkpoints = run_dir.join("checkpoints");
    eprintln!("training from episode {} into {}", trainer.episode, run_dir.display());
    let mut successes = std::collections::VecDeque::new();
    trainer
        .run(sampler.as_ref(), Some(&checkpoints), |r| {
            successes.push_back(r.outcome == uwbnav_core::ddpg::DoneReason::Goal);
            if successes.len() > 100 {
                successes.pop_front();
            }
            if (r.episode + 1) % 10 == 0 {
                let rate = successes.iter().filter(|&&s| s).count() as f64 / successes.len() as f64;
                eprintln!(
                    "episode {:>5}  steps {:>4}  return {:>8.1}  eps {:.3}  success(100) {:.2}",
                    r.episode + 1,
                    r.steps,
                    r.episode_return,
                    r.epsilon,
                    rate
                );
            }
        })
        .map_err(runtime)?;
    nn::save_actor(&trainer.agent.actor, run_dir.join("actor.bin")).map_err(runtime)?;
    trainer.log.write(run_dir.join("training_log.jsonl")).map_err(runtime)?;
    let ms = trainer.log.moving_success(100);
    println!(
        "trained {} episodes; success over last 100: {}; actor at {}",
        trainer.episode,
        ms.map_or("-".to_string(), |m| format!("{m:.2}")),
        run_dir.join("actor.bin").display()
    );
    Ok(TrainOutcome {
        run_dir,
        log: trainer.log,
    })
}

#[derive(Debug, Serialize)]
pub struct EvalEntry {
    pub scenario: String,
    pub sigma: f64,
    pub planner: String,
    pub report: MetricsReport,
}

pub struct EvalOutcome {
    pub run_dir: PathBuf,
    pub entries: Vec<EvalEntry>,
    pub tables: Vec<(String, f64, ComparisonTable)>,
}

pub fn load_actor(cfg: &RunConfig) -> Result<ActorNet, CliError> {
    let path = cfg
        .eval
        .actor
        .as_ref()
        .ok_or_else(|| CliError::Config("planner rl needs an actor checkpoint (--actor or eval.actor)".into()))?;
    nn::load_actor(path).map_err(|e| CliError::Config(format!("cannot load actor checkpoint {}: {e}", path.display())))
}

fn threads() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

pub fn eval(cfg: &RunConfig) -> Result<EvalOutcome, CliError> {
    let scenarios = cfg
        .eval
        .scenarios
        .iter()
        .map(|p| load_scenario_file(p).map(|s| (p.clone(), s)))
        .collect::<Result<Vec<_>, _>>()?;
    let actor = if cfg.eval.planners.iter().any(|p| p == "rl") {
        Some(load_actor(cfg)?)
    } else {
        None
    };
    let run_dir = create_run_dir(cfg, "eval")?;
    let seeds: Vec<u64> = (0..cfg.eval.runs as u64).map(|k| cfg.seed + k).collect();
    let mut entries = Vec::new();
    let mut tables = Vec::new();
    let mut text = String::new();
    for (path, scenario) in &scenarios {
        for sigma in cfg.sigmas() {
            let ecfg = cfg.eval_config(sigma);
            let mut rows = Vec::new();
            for planner in &cfg.eval.planners {
                let logs = match planner.as_str() {
                    "rl" => {
                        let actor = actor.as_ref().expect("actor loaded for rl");
                        run_many(|| RlPlanner::new(actor.clone(), cfg.sim.clone()), scenario, &ecfg, &seeds, threads())
                    }
                    "dwa" => run_many(|| DwaPlanner { cfg: cfg.dwa_config() }, scenario, &ecfg, &seeds, threads()),
                    other => return Err(CliError::Config(format!("unknown planner '{other}'"))),
                }
                .map_err(|e| runtime(format!("{} on {}: {}", planner, path.display(), e.source)))?;
                let dir = run_dir.join("logs").join(&scenario.name).join(format!("sigma-{sigma}")).join(planner);
                std::fs::create_dir_all(&dir).map_err(runtime)?;
                for (k, log) in logs.iter().enumerate() {
                    log.write(dir.join(format!("run-{k:02}.jsonl"))).map_err(runtime)?;
                }
                let report = compute_metrics(&logs).map_err(runtime)?;
                rows.push(ComparisonRow {
                    label: planner.clone(),
                    report: report.clone(),
                });
                entries.push(EvalEntry {
                    scenario: scenario.name.clone(),
                    sigma,
                    planner: planner.clone(),
                    report,
                });
            }
            let table = ComparisonTable { rows };
            let block = format!(
                "scenario {} ({}), uwb sigma {sigma} m, {} runs\n{}\n",
                scenario.name,
                path.display(),
                cfg.eval.runs,
                table.to_text()
            );
            print!("{block}");
            text.push_str(&block);
            tables.push((scenario.name.clone(), sigma, table));
        }
    }
    std::fs::write(run_dir.join("tables.txt"), text).map_err(runtime)?;
    let csv: String = tables
        .iter()
        .enumerate()
        .map(|(i, (_, sigma, t))| {
            let body = t.to_csv();
            let mut lines = body.lines();
            let header = lines.next().unwrap_or_default();
            let mut out = String::new();
            if i == 0 {
                out.push_str(&format!("sigma,{header}\n"));
            }
            for l in lines {
                out.push_str(&format!("{sigma},{l}\n"));
            }
            out
        })
        .collect();
    std::fs::write(run_dir.join("tables.csv"), csv).map_err(runtime)?;
    std::fs::write(run_dir.join("metrics.json"), serde_json::to_string_pretty(&entries).map_err(runtime)?)
        .map_err(runtime)?;
    Ok(EvalOutcome {
        run_dir,
        entries,
        tables,
    })
}

#[derive(Debug, Serialize)]
pub struct BenchOutcome {
    pub rl: ThroughputReport,
    pub dwa: ThroughputReport,
    pub ratio: f64,
}

pub const MIN_RL_RATE: f64 = 400.0;

pub fn bench(cfg: &RunConfig) -> Result<BenchOutcome, CliError> {
    let actor = match &cfg.eval.actor {
        Some(_) => load_actor(cfg)?,
        None => ActorNet::new(cfg.seed),
    };
    let run_dir = create_run_dir(cfg, "bench")?;
    let inputs = random_observations(cfg.bench.inputs, &cfg.obs, cfg.seed);
    let mut rl = RlPlanner::new(actor, cfg.sim.clone());
    let mut dwa = DwaPlanner { cfg: cfg.dwa_config() };
    let rl = throughput_bench(&mut rl, &inputs, &cfg.obs, cfg.bench.warmup, cfg.bench.calls).map_err(runtime)?;
    let dwa = throughput_bench(&mut dwa, &inputs, &cfg.obs, cfg.bench.warmup, cfg.bench.calls).map_err(runtime)?;
    let outcome = BenchOutcome {
        ratio: rl.decisions_per_sec / dwa.decisions_per_sec,
        rl,
        dwa,
    };
    println!("rl   {:>12.0} decisions/s ({} calls)", outcome.rl.decisions_per_sec, outcome.rl.calls);
    println!("dwa  {:>12.0} decisions/s ({} calls)", outcome.dwa.decisions_per_sec, outcome.dwa.calls);
    println!("rl:dwa speed ratio {:.1}", outcome.ratio);
    std::fs::write(run_dir.join("bench.json"), serde_json::to_string_pretty(&outcome).map_err(runtime)?)
        .map_err(runtime)?;
    if outcome.rl.decisions_per_sec < MIN_RL_RATE {
        return Err(runtime(format!(
            "rl throughput {:.0}/s below {MIN_RL_RATE}/s",
            outcome.rl.decisions_per_sec
        )));
    }
    Ok(outcome)
}

pub fn replay(path: &Path, csv: Option<&Path>) -> Result<(), CliError> {
    let log = TrajectoryLog::read(path).map_err(|e| CliError::Config(format!("cannot read log {}: {e}", path.display())))?;
    let outcome = log
        .terminal()
        .map_or("unfinished".to_string(), |e| format!("{:?} at t = {:.1} s", e.kind, e.t));
    println!("planner {}  scenario {}  seed {}", log.planner, log.scenario, log.seed);
    println!("outcome {outcome}");
    println!("{} decisions, {} uwb fixes, {} events", log.samples.len(), log.uwb.len(), log.events.len());
    let err: Vec<f64> = log
        .samples
        .iter()
        .map(|s| (s.pose[0] - s.est_pose[0]).hypot(s.pose[1] - s.est_pose[1]))
        .collect();
    if !err.is_empty() {
        let rms = (err.iter().map(|e| e * e).sum::<f64>() / err.len() as f64).sqrt();
        println!("localization error rms {rms:.3} m, max {:.3} m", err.iter().cloned().fold(0.0, f64::max));
    }
    let m = compute_metrics(std::slice::from_ref(&log)).map_err(runtime)?;
    println!(
        "v_rms_accel {}  w_rms_accel {}",
        m.v_rms_accel.map_or("-".into(), |v| format!("{v:.4}")),
        m.w_rms_accel.map_or("-".into(), |v| format!("{v:.4}"))
    );
    if let Some(p) = csv {
        std::fs::write(p, log.plot_csv()).map_err(runtime)?;
        println!("plot data written to {}", p.display());
    }
    Ok(())
}
