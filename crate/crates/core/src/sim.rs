//! Round-synchronous race between an honest and a malicious pool.
//!
//! Every round is one slot of `Δ` ticks. Each participating node runs one
//! mining round on its pool's current tip; all solved blocks are published at
//! the end of the round and appended in node-id order. Each pool extends the
//! best branch made of its own blocks, so the canonical chain at any point is
//! whichever pool's branch is longer.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{pool_budgets, security_condition, SecurityConditionReport, DEFAULT_SAFETY_FACTOR};
use crate::corefn::mix64;
use crate::error::{Error, Result};
use crate::ledger::{Block, Ledger, NodeId};
use crate::node::{mine_round, MiningOutcome, NodeConfig, Role};
use crate::params::{Budget, SystemParams};
use crate::tmdto::TradeoffTable;

fn default_txs_per_block() -> usize {
    4
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub params: SystemParams,
    pub nodes: Vec<NodeConfig>,
    pub rounds: u64,
    pub seed: u64,
    pub tx_stream_seed: u64,
    /// Difficulty level every block is mined at.
    pub difficulty: u32,
    #[serde(default = "default_txs_per_block")]
    pub txs_per_block: usize,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.params.ell(self.difficulty)?;
        if self.rounds == 0 {
            return Err(Error::Config("rounds must be at least 1".into()));
        }
        if self.txs_per_block == 0 {
            return Err(Error::Config("txs_per_block must be at least 1".into()));
        }
        if !self.nodes.iter().any(|n| n.role == Role::Honest) {
            return Err(Error::Config("at least one honest node is required".into()));
        }
        let mut ids = HashSet::new();
        for n in &self.nodes {
            if !ids.insert(n.id) {
                return Err(Error::Config(format!("duplicate node id {}", n.id)));
            }
            for &j in n.budgets.keys() {
                self.params.ell(j)?;
            }
        }
        Ok(())
    }
}

/// Tables keyed by `(node, difficulty)`.
pub type TableSet = HashMap<(NodeId, u32), TradeoffTable>;

/// Builds every nonzero-budget table of every node.
pub fn build_tables(params: &SystemParams, nodes: &[NodeConfig]) -> Result<TableSet> {
    let jobs: Vec<(&NodeConfig, u32)> = nodes
        .iter()
        .flat_map(|n| n.budgets.keys().map(move |&j| (n, j)))
        .collect();
    jobs.into_par_iter()
        .filter_map(|(node, j)| match node.build_table(params, j) {
            Ok(Some(table)) => Some(Ok(((node.id, j), table))),
            Ok(None) => None,
            Err(e) => Some(Err(e)),
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Schedule {
    Serial,
    Parallel,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeRoundSummary {
    pub node: NodeId,
    pub role: Role,
    pub attempts: u64,
    pub solved: bool,
    pub ticks: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: u64,
    pub nodes: Vec<NodeRoundSummary>,
    pub honest_blocks: u64,
    pub malicious_blocks: u64,
    /// Solved blocks the ledger refused (e.g. a transaction id collision).
    pub rejected_blocks: u64,
    pub canonical_height: u64,
    /// `None` while the canonical tip is genesis.
    pub canonical_tip_pool: Option<Role>,
}

#[derive(Clone, Debug)]
pub struct SimOutcome {
    pub records: Vec<RoundRecord>,
    pub ledger: Ledger,
    roles: HashMap<NodeId, Role>,
}

impl SimOutcome {
    pub fn tip_pool(&self) -> Option<Role> {
        role_of(&self.roles, self.ledger.canonical_tip())
    }

    pub fn total_blocks(&self, role: Role) -> u64 {
        self.records
            .iter()
            .map(|r| match role {
                Role::Honest => r.honest_blocks,
                Role::Malicious => r.malicious_blocks,
            })
            .sum()
    }

    /// `round,node,role,attempts,solved,ticks`
    pub fn rounds_csv(&self) -> String {
        let mut out = String::from("round,node,role,attempts,solved,ticks\n");
        for r in &self.records {
            for n in &r.nodes {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{}",
                    r.round,
                    n.node,
                    n.role.as_str(),
                    n.attempts,
                    n.solved as u8,
                    n.ticks
                );
            }
        }
        out
    }

    /// One line per round with the pool block counts and the canonical tip.
    pub fn blocks_csv(&self) -> String {
        let mut out =
            String::from("round,honest_blocks,malicious_blocks,rejected_blocks,canonical_height,canonical_tip_pool\n");
        for r in &self.records {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                r.round,
                r.honest_blocks,
                r.malicious_blocks,
                r.rejected_blocks,
                r.canonical_height,
                r.canonical_tip_pool.map_or("genesis", Role::as_str)
            );
        }
        out
    }
}

fn role_of(roles: &HashMap<NodeId, Role>, block: &Block) -> Option<Role> {
    if block.is_genesis() {
        None
    } else {
        roles.get(&block.miner).copied()
    }
}

/// Which end of the per-attempt time range bounds a pool's attempt count.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Bound {
    /// Honest lower bound: every node pays `t_max`.
    Lower,
    /// Adversarial upper bound: every node pays `t_min`.
    Upper,
}

/// Expected new blocks from a pool in one slot,
/// `floor(Δ / (δ + t_bound)) Σ M_i t_i / 2^space_bits`.
pub fn pool_expected_blocks_in(pool: &[Budget], params: &SystemParams, bound: Bound, space_bits: u32) -> Result<f64> {
    if pool.is_empty() {
        return Err(Error::EmptyPool);
    }
    let t_bound = match bound {
        Bound::Lower => pool.iter().map(|b| b.chain_len).max(),
        Bound::Upper => pool.iter().map(|b| b.chain_len).min(),
    }
    .unwrap();
    let mass: u128 = pool.iter().map(|b| b.rows as u128 * b.chain_len as u128).sum();
    Ok(params.attempts_for(t_bound) as f64 * mass as f64 / (1u128 << space_bits) as f64)
}

/// As [`pool_expected_blocks_in`] with `N` fixed by the system mode.
pub fn pool_expected_blocks(pool: &[Budget], params: &SystemParams, difficulty: u32, bound: Bound) -> Result<f64> {
    pool_expected_blocks_in(pool, params, bound, params.solution_space_bits(difficulty)?)
}

fn tx_batch(stream_seed: u64, round: u64, node: NodeId, count: usize) -> Vec<u64> {
    let base = mix64(mix64(stream_seed ^ mix64(round)) ^ node);
    (0..count as u64).map(|i| mix64(base ^ mix64(i))).collect()
}

fn better_tip(candidate: &Block, current: &Block) -> bool {
    (candidate.height, std::cmp::Reverse(candidate.digest)) > (current.height, std::cmp::Reverse(current.digest))
}

pub fn run_simulation(config: &SimConfig, tables: &TableSet, schedule: Schedule) -> Result<SimOutcome> {
    config.validate()?;
    let params = &config.params;
    let j = config.difficulty;

    let mut miners: Vec<(NodeConfig, &TradeoffTable)> = Vec::new();
    for node in &config.nodes {
        if node.budget(j).is_none() {
            continue;
        }
        let table = tables.get(&(node.id, j)).ok_or(Error::NoTableForDifficulty {
            node: node.id,
            difficulty: j,
        })?;
        if table.spec().rows == 0 {
            continue;
        }
        // the run seed perturbs nonce selection without touching the tables
        let mut mining = node.clone();
        mining.seed = mix64(node.seed ^ mix64(config.seed));
        miners.push((mining, table));
    }
    miners.sort_by_key(|(n, _)| n.id);
    for (node, table) in &miners {
        let ell = params.ell(j)?;
        if table.spec().ell != ell || table.spec().mode != params.mode || table.width() != params.width {
            return Err(Error::TableMismatch(format!("node {}", node.id)));
        }
    }

    let roles: HashMap<NodeId, Role> = config.nodes.iter().map(|n| (n.id, n.role)).collect();
    let mut ledger = Ledger::new(params.clone());
    let genesis = ledger.genesis().clone();
    let mut pool_tips: BTreeMap<Role, Block> =
        BTreeMap::from([(Role::Honest, genesis.clone()), (Role::Malicious, genesis)]);
    let mut records = Vec::with_capacity(config.rounds as usize);

    for round in 0..config.rounds {
        let mine = |(node, table): &(NodeConfig, &TradeoffTable)| -> Result<MiningOutcome> {
            let parent = &pool_tips[&node.role];
            let txs = tx_batch(config.tx_stream_seed, round, node.id, config.txs_per_block);
            mine_round(node, Some(table), parent, &txs, params, j)
        };
        let outcomes: Vec<MiningOutcome> = match schedule {
            Schedule::Serial => miners.iter().map(mine).collect::<Result<_>>()?,
            Schedule::Parallel => miners.par_iter().map(mine).collect::<Result<_>>()?,
        };

        let mut record = RoundRecord {
            round,
            nodes: Vec::with_capacity(miners.len()),
            honest_blocks: 0,
            malicious_blocks: 0,
            rejected_blocks: 0,
            canonical_height: 0,
            canonical_tip_pool: None,
        };
        for ((node, _), outcome) in miners.iter().zip(outcomes) {
            record.nodes.push(NodeRoundSummary {
                node: node.id,
                role: node.role,
                attempts: outcome.attempts_used,
                solved: outcome.solved(),
                ticks: outcome.ticks_used,
            });
            let Some(block) = outcome.block() else {
                continue;
            };
            match ledger.append_block(block.clone()) {
                Ok(()) => {
                    match node.role {
                        Role::Honest => record.honest_blocks += 1,
                        Role::Malicious => record.malicious_blocks += 1,
                    }
                    let tip = pool_tips.get_mut(&node.role).unwrap();
                    if better_tip(block, tip) {
                        *tip = block.clone();
                    }
                }
                Err(reason) => {
                    log::debug!("round {round}: block from node {} rejected: {reason}", node.id);
                    record.rejected_blocks += 1;
                }
            }
        }
        let tip = ledger.canonical_tip();
        record.canonical_height = tip.height;
        record.canonical_tip_pool = role_of(&roles, tip);
        records.push(record);
    }

    Ok(SimOutcome { records, ledger, roles })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoolSummary {
    pub nodes: usize,
    pub accepted_blocks: u64,
    pub canonical_blocks: u64,
    pub node_rounds: u64,
    pub solved_node_rounds: u64,
    /// Solved node-rounds over node-rounds.
    pub empirical_solve_rate: f64,
    /// Expected blocks per slot with the mode's `N`, at the pool's bound.
    pub predicted_blocks_per_round: Option<f64>,
    /// Same, with `N = 2^ell`.
    pub predicted_blocks_per_round_ell: Option<f64>,
    pub empirical_blocks_per_round: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimSummary {
    pub rounds: u64,
    pub difficulty: u32,
    pub canonical_height: u64,
    pub canonical_tip_pool: Option<Role>,
    pub rejected_blocks: u64,
    pub honest: PoolSummary,
    pub malicious: PoolSummary,
    pub security_condition: Option<SecurityConditionReport>,
}

pub fn summarize(config: &SimConfig, outcome: &SimOutcome) -> Result<SimSummary> {
    let params = &config.params;
    let j = config.difficulty;
    let ell = params.ell(j)?;
    let canonical = outcome.ledger.canonical_chain();
    let pool = |role: Role, bound: Bound| -> Result<PoolSummary> {
        let budgets = pool_budgets(&config.nodes, role, j);
        let summaries = outcome.records.iter().flat_map(|r| &r.nodes).filter(|n| n.role == role);
        let node_rounds = summaries.clone().count() as u64;
        let solved = summaries.filter(|n| n.solved).count() as u64;
        let accepted = outcome.total_blocks(role);
        let predicted = |bits| -> Result<Option<f64>> {
            if budgets.is_empty() {
                Ok(None)
            } else {
                pool_expected_blocks_in(&budgets, params, bound, bits).map(Some)
            }
        };
        Ok(PoolSummary {
            nodes: budgets.len(),
            accepted_blocks: accepted,
            canonical_blocks: canonical
                .iter()
                .filter(|b| role_of(&outcome.roles, b) == Some(role))
                .count() as u64,
            node_rounds,
            solved_node_rounds: solved,
            empirical_solve_rate: if node_rounds == 0 {
                0.0
            } else {
                solved as f64 / node_rounds as f64
            },
            predicted_blocks_per_round: predicted(params.solution_space_bits(j)?)?,
            predicted_blocks_per_round_ell: predicted(ell)?,
            empirical_blocks_per_round: accepted as f64 / config.rounds as f64,
        })
    };
    let honest = pool(Role::Honest, Bound::Lower)?;
    let malicious = pool(Role::Malicious, Bound::Upper)?;
    let hb = pool_budgets(&config.nodes, Role::Honest, j);
    let mb = pool_budgets(&config.nodes, Role::Malicious, j);
    let security_condition = if hb.is_empty() || mb.is_empty() {
        None
    } else {
        Some(security_condition(&hb, &mb, params, DEFAULT_SAFETY_FACTOR)?)
    };
    Ok(SimSummary {
        rounds: config.rounds,
        difficulty: j,
        canonical_height: outcome.ledger.canonical_tip().height,
        canonical_tip_pool: outcome.tip_pool(),
        rejected_blocks: outcome.records.iter().map(|r| r.rejected_blocks).sum(),
        honest,
        malicious,
        security_condition,
    })
}
