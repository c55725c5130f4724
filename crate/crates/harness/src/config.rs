//! Experiment configuration: which variants to run, how long, and with
//! which agent hyperparameters.

use std::fs;
use std::path::{Path, PathBuf};

use oel_core::{AgentParams, ScenarioConfig, Tabletop, Variant};
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Scenario TOML, relative to the experiment file. The built-in
    /// tabletop is used when absent.
    pub scenario: Option<PathBuf>,
    pub variants: Vec<Variant>,
    pub runs: u32,
    pub epochs: u32,
    /// Epoch at which the second phase of a two-phase schedule starts.
    pub phase_switch: u32,
    pub trials_per_epoch: u32,
    pub steps_per_trial: u32,
    pub eval_interval: u32,
    pub base_seed: u64,
    /// Remaining agent hyperparameters. Its trial and step budgets are
    /// replaced by the top-level ones.
    pub agent: AgentParams,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            scenario: None,
            variants: Variant::ALL.to_vec(),
            runs: 10,
            epochs: 1500,
            phase_switch: 750,
            trials_per_epoch: 8,
            steps_per_trial: 70,
            eval_interval: 25,
            base_seed: 0,
            agent: AgentParams::default(),
        }
    }
}

impl ExperimentConfig {
    /// Reads a config file. A relative `scenario` path is resolved against
    /// the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        let mut config = Self::from_toml_str(&text).map_err(|e| match e {
            HarnessError::Config(msg) => HarnessError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })?;
        if let Some(scenario) = &config.scenario {
            if scenario.is_relative() {
                let base = path.parent().unwrap_or_else(|| Path::new(""));
                config.scenario = Some(base.join(scenario));
            }
        }
        Ok(config)
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: ExperimentConfig = toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    /// 2 runs of 100 epochs, for quick checks.
    pub fn smoke(mut self) -> Self {
        self.runs = 2;
        self.epochs = 100;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("runs", self.runs),
            ("epochs", self.epochs),
            ("phase_switch", self.phase_switch),
            ("trials_per_epoch", self.trials_per_epoch),
            ("steps_per_trial", self.steps_per_trial),
            ("eval_interval", self.eval_interval),
        ];
        if let Some((name, _)) = counts.iter().find(|(_, v)| *v == 0) {
            return Err(HarnessError::Config(format!("{name} must be positive")));
        }
        if self.variants.is_empty() {
            return Err(HarnessError::Config("at least one variant is required".into()));
        }
        let mut seen = self.variants.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.variants.len() {
            return Err(HarnessError::Config("variants must not repeat".into()));
        }
        self.agent_params().validate()?;
        Ok(())
    }

    pub fn agent_params(&self) -> AgentParams {
        AgentParams {
            trials_per_epoch: self.trials_per_epoch,
            steps_per_trial: self.steps_per_trial,
            ..self.agent.clone()
        }
    }

    pub fn seed(&self, run: u32) -> u64 {
        self.base_seed.wrapping_add(u64::from(run))
    }

    /// Scenario with the configured phase switch applied.
    pub fn scenario_config(&self) -> Result<ScenarioConfig> {
        let mut scenario = match &self.scenario {
            Some(path) => {
                let text = fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
                ScenarioConfig::from_toml_str(&text)
                    .map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?
            }
            None => ScenarioConfig::default_tabletop(),
        };
        match scenario.phase_schedule.len() {
            1 => {}
            2 => scenario.phase_schedule[1].epoch = self.phase_switch,
            n => {
                return Err(HarnessError::Config(format!(
                    "phase_switch needs a schedule with at most two entries, found {n}"
                )))
            }
        }
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn tabletop(&self) -> Result<Tabletop> {
        Ok(Tabletop::new(self.scenario_config()?)?)
    }

    /// Epochs (1-based, counted after completion) at which the agent is
    /// evaluated.
    pub fn evaluation_epochs(&self) -> impl Iterator<Item = u32> + '_ {
        (1..=self.epochs / self.eval_interval).map(|k| k * self.eval_interval)
    }
}
