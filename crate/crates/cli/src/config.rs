//! Experiment configuration file (JSON).

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use tmdt_core::corefn::{mix64, StateWidth};
use tmdt_core::node::{NodeConfig, Role};
use tmdt_core::sim::SimConfig;
use tmdt_core::{Budget, Mode, SystemParams};

use crate::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DifficultyLevel {
    pub j: u32,
    pub ell: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsBlock {
    pub n: u32,
    /// Zero-prefix length of the challenge proof-of-work.
    pub d: u32,
    pub slot_ticks: u64,
    pub challenge_ticks: u64,
    pub mode: Mode,
    pub difficulties: Vec<DifficultyLevel>,
    #[serde(default)]
    pub challenge_trial_cap: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BudgetEntry {
    pub j: u32,
    pub rows: u64,
    pub chain_len: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeEntry {
    pub id: u64,
    pub role: Role,
    pub seed: u64,
    pub budgets: Vec<BudgetEntry>,
    /// Expands into this many elementary nodes with ids `id, id+1, ...`.
    #[serde(default = "one")]
    pub count: u64,
}

fn one() -> u64 {
    1
}

fn default_trials() -> u64 {
    10_000
}

fn default_txs() -> usize {
    4
}

fn default_factor() -> f64 {
    tmdt_core::analysis::DEFAULT_SAFETY_FACTOR
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunBlock {
    pub rounds: u64,
    pub seed: u64,
    pub tx_stream_seed: u64,
    /// Difficulty the simulation and estimates run at; defaults to the lowest level.
    #[serde(default)]
    pub difficulty: Option<u32>,
    #[serde(default = "default_txs")]
    pub txs_per_block: usize,
    #[serde(default = "default_trials")]
    pub trials: u64,
    #[serde(default)]
    pub trial_seed: u64,
    #[serde(default = "default_factor")]
    pub safety_factor: f64,
    /// Success target for the PoW/PoS comparison rows.
    #[serde(default = "one_f64")]
    pub target_probability: f64,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
}

fn one_f64() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub params: ParamsBlock,
    pub nodes: Vec<NodeEntry>,
    pub run: RunBlock,
}

/// A loaded and checked configuration.
#[derive(Clone, Debug)]
pub struct Experiment {
    pub raw: ExperimentConfig,
    pub params: SystemParams,
    pub nodes: Vec<NodeConfig>,
    pub difficulty: u32,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text)
            .map_err(|e| CliError::Config(format!("line {}, column {}: {e}", e.line(), e.column())))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    /// Replaces every seed with one derived from `seed`.
    pub fn override_seed(&mut self, seed: u64) {
        self.run.seed = seed;
        self.run.tx_stream_seed = mix64(seed ^ 0x7478);
        self.run.trial_seed = mix64(seed ^ 0x74_7269_616c);
        for node in &mut self.nodes {
            node.seed = mix64(seed ^ mix64(node.id));
        }
    }

    pub fn resolve(self) -> Result<Experiment, CliError> {
        let cfg_err = |e: tmdt_core::Error| CliError::Config(e.to_string());
        let p = &self.params;
        let mut difficulties = BTreeMap::new();
        for level in &p.difficulties {
            if difficulties.insert(level.j, level.ell).is_some() {
                return Err(CliError::Config(format!("difficulty {} listed twice", level.j)));
            }
        }
        let params = SystemParams {
            width: StateWidth::new(p.n).map_err(cfg_err)?,
            zero_prefix: p.d,
            slot_ticks: p.slot_ticks,
            challenge_ticks: p.challenge_ticks,
            mode: p.mode,
            difficulties,
            challenge_trial_cap: p.challenge_trial_cap,
        };
        params.validate().map_err(cfg_err)?;

        let mut nodes = Vec::new();
        for entry in &self.nodes {
            if entry.count == 0 {
                return Err(CliError::Config(format!("node {}: count must be positive", entry.id)));
            }
            let mut budgets = BTreeMap::new();
            for b in &entry.budgets {
                params.ell(b.j).map_err(cfg_err)?;
                if budgets.insert(b.j, Budget::new(b.rows, b.chain_len)).is_some() {
                    return Err(CliError::Config(format!(
                        "node {}: difficulty {} budgeted twice",
                        entry.id, b.j
                    )));
                }
            }
            for k in 0..entry.count {
                let id = entry
                    .id
                    .checked_add(k)
                    .ok_or_else(|| CliError::Config(format!("node {}: id overflow", entry.id)))?;
                nodes.push(NodeConfig {
                    id,
                    role: entry.role,
                    budgets: budgets.clone(),
                    seed: if k == 0 {
                        entry.seed
                    } else {
                        mix64(entry.seed.wrapping_add(k))
                    },
                });
            }
        }
        let difficulty = match self.run.difficulty {
            Some(j) => {
                params.ell(j).map_err(cfg_err)?;
                j
            }
            None => *params.difficulties.keys().next().unwrap(),
        };
        if self.run.safety_factor.is_nan() || self.run.safety_factor <= 0.0 {
            return Err(CliError::Config("safety_factor must be positive".into()));
        }
        if !(self.run.target_probability > 0.0 && self.run.target_probability <= 1.0) {
            return Err(CliError::Config("target_probability must be in (0, 1]".into()));
        }
        let exp = Experiment {
            params,
            nodes,
            difficulty,
            raw: self,
        };
        exp.sim_config().validate().map_err(cfg_err)?;
        Ok(exp)
    }
}

impl Experiment {
    pub fn sim_config(&self) -> SimConfig {
        SimConfig {
            params: self.params.clone(),
            nodes: self.nodes.clone(),
            rounds: self.raw.run.rounds,
            seed: self.raw.run.seed,
            tx_stream_seed: self.raw.run.tx_stream_seed,
            difficulty: self.difficulty,
            txs_per_block: self.raw.run.txs_per_block,
        }
    }

    pub fn node(&self, id: u64) -> Option<&NodeConfig> {
        self.nodes.iter().find(|n| n.id == id)
    }
}
