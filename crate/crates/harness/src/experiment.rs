//! The multi-run epoch loop.

use oel_core::agent::{scenario_goal_ids, Counters};
use oel_core::{Agent, EpochRecord, GoalRepresentationMap, Tabletop, Variant};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::Result;
use crate::summary::{ExperimentData, VariantData};

/// Frozen-policy evaluation after `epoch` completed epochs, one flag per
/// scenario goal.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Evaluation {
    pub epoch: u32,
    pub goals: Vec<bool>,
}

impl Evaluation {
    /// Fraction of scenario goals achieved.
    pub fn competence(&self) -> f64 {
        if self.goals.is_empty() {
            return 0.0;
        }
        self.goals.iter().filter(|&&g| g).count() as f64 / self.goals.len() as f64
    }
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub variant: Variant,
    pub run: u32,
    pub seed: u64,
    pub records: Vec<EpochRecord>,
    pub evaluations: Vec<Evaluation>,
    /// Per scenario goal: the 1-based epoch of its discovery.
    pub discovery: Vec<Option<u32>>,
    pub goal_map: GoalRepresentationMap,
    pub q_tables: String,
    pub counters: Counters,
}

#[derive(Debug, Clone)]
pub struct ResultsBundle {
    pub config: ExperimentConfig,
    pub goal_names: Vec<String>,
    /// Ordered by variant (config order), then run index.
    pub runs: Vec<RunResult>,
}

impl ResultsBundle {
    pub fn runs_of(&self, variant: Variant) -> impl Iterator<Item = &RunResult> {
        self.runs.iter().filter(move |r| r.variant == variant)
    }

    /// The part of the bundle that the written artifacts preserve.
    pub fn data(&self) -> ExperimentData {
        ExperimentData {
            epochs: self.config.epochs,
            goal_names: self.goal_names.clone(),
            variants: self
                .config
                .variants
                .iter()
                .map(|&variant| VariantData {
                    variant,
                    evaluations: self.runs_of(variant).map(|r| r.evaluations.clone()).collect(),
                    discovery: self.runs_of(variant).map(|r| r.discovery.clone()).collect(),
                })
                .collect(),
        }
    }
}

fn evaluation_seed(run_seed: u64, epoch: u32) -> u64 {
    run_seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ u64::from(epoch)
}

/// One independent run: the full epoch loop with periodic frozen evaluation.
pub fn run_single(config: &ExperimentConfig, tabletop: &Tabletop, variant: Variant, run: u32) -> Result<RunResult> {
    let seed = config.seed(run);
    let mut agent = Agent::new(variant, config.agent_params(), tabletop, seed)?;
    let scenario = tabletop.config();
    let mut records = Vec::with_capacity(config.epochs as usize);
    let mut evaluations = Vec::new();
    for epoch in 0..config.epochs {
        let phase = scenario.phase_at(epoch);
        records.push(agent.run_epoch(tabletop, epoch, phase)?);
        let done = epoch + 1;
        if done % config.eval_interval == 0 {
            let goals = agent.evaluate_scenario_goals(tabletop, phase, evaluation_seed(seed, done))?;
            evaluations.push(Evaluation { epoch: done, goals });
        }
    }
    let goal_map = agent.goals().clone();
    let discovery = scenario_goal_ids(tabletop, &goal_map)
        .into_iter()
        .map(|id| -> Result<Option<u32>> {
            match id {
                Some(g) => Ok(Some(goal_map.get(g)?.discovery_epoch + 1)),
                None => Ok(None),
            }
        })
        .collect::<Result<_>>()?;
    Ok(RunResult {
        variant,
        run,
        seed,
        records,
        evaluations,
        discovery,
        q_tables: agent.dump_q_tables(),
        counters: agent.counters(),
        goal_map,
    })
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<ResultsBundle> {
    run_experiment_with(config, |_| {})
}

/// Runs every (variant, run) pair in parallel. `on_done` is called as each
/// run finishes, in completion order; the bundle itself is ordered.
pub fn run_experiment_with(config: &ExperimentConfig, on_done: impl Fn(&RunResult) + Sync) -> Result<ResultsBundle> {
    config.validate()?;
    let tabletop = config.tabletop()?;
    let jobs: Vec<(Variant, u32)> = config
        .variants
        .iter()
        .flat_map(|&v| (0..config.runs).map(move |r| (v, r)))
        .collect();
    let runs = jobs
        .into_par_iter()
        .map(|(variant, run)| {
            let result = run_single(config, &tabletop, variant, run)?;
            on_done(&result);
            Ok(result)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ResultsBundle {
        config: config.clone(),
        goal_names: tabletop.config().goals.iter().map(|g| g.name.clone()).collect(),
        runs,
    })
}
