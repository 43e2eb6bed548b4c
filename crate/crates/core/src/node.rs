//! One node's mining round: repeated challenge construction and inversion
//! attempts within a slot's tick budget.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::corefn::mix64;
use crate::error::{Error, Result};
use crate::ledger::{puzzle_bytes, Block, NodeId};
use crate::params::{Budget, SystemParams};
use crate::puzzle::make_challenge;
use crate::tmdto::{TableSpec, TradeoffTable};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Honest,
    Malicious,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::Honest => "honest",
            Role::Malicious => "malicious",
        }
    }
}

/// An elementary node: one table per difficulty it participates in.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeConfig {
    pub id: NodeId,
    pub role: Role,
    /// Difficulty to `(M, t)`. A zero budget means the node sits that level out.
    pub budgets: BTreeMap<u32, Budget>,
    pub seed: u64,
}

impl NodeConfig {
    /// Budget for `difficulty` if the node takes part in it.
    pub fn budget(&self, difficulty: u32) -> Option<Budget> {
        self.budgets.get(&difficulty).copied().filter(|b| !b.is_zero())
    }

    /// Seed of this node's table for `difficulty`.
    pub fn table_seed(&self, difficulty: u32) -> u64 {
        mix64(self.seed ^ mix64(u64::from(difficulty)))
    }

    pub fn table_spec(&self, params: &SystemParams, difficulty: u32) -> Result<Option<TableSpec>> {
        let ell = params.ell(difficulty)?;
        Ok(self.budget(difficulty).map(|b| TableSpec {
            difficulty,
            ell,
            rows: b.rows,
            chain_len: b.chain_len,
            mode: params.mode,
            seed: self.table_seed(difficulty),
        }))
    }

    /// Builds the table for `difficulty`, or `None` for a zero budget.
    pub fn build_table(&self, params: &SystemParams, difficulty: u32) -> Result<Option<TradeoffTable>> {
        self.table_spec(params, difficulty)?
            .map(|spec| TradeoffTable::build(spec, params.width))
            .transpose()
    }

    fn nonce_seed(&self, parent: u64, attempt: u64) -> u64 {
        mix64(self.seed ^ mix64(parent ^ mix64(attempt)))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum MiningResult {
    Solved(Block),
    Exhausted,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MiningOutcome {
    pub result: MiningResult,
    /// Distinct challenges tried, the data parameter `D`.
    pub attempts_used: u64,
    pub ticks_used: u64,
    /// One-way evaluations actually spent inside inversions.
    pub evaluations: u64,
}

impl MiningOutcome {
    pub fn block(&self) -> Option<&Block> {
        match &self.result {
            MiningResult::Solved(b) => Some(b),
            MiningResult::Exhausted => None,
        }
    }

    pub fn solved(&self) -> bool {
        self.block().is_some()
    }
}

/// Mines one block on `parent` carrying `txs`.
///
/// Up to `floor(Δ / (δ + t))` attempts are made. Each attempt builds a fresh
/// challenge (charged `δ` ticks) and runs one inversion (charged the full `t`
/// ticks even when it exits early).
pub fn mine_round(
    config: &NodeConfig,
    table: Option<&TradeoffTable>,
    parent: &Block,
    txs: &[u64],
    params: &SystemParams,
    difficulty: u32,
) -> Result<MiningOutcome> {
    let table = table
        .filter(|t| t.spec().difficulty == difficulty)
        .ok_or(Error::NoTableForDifficulty {
            node: config.id,
            difficulty,
        })?;
    let ell = params.ell(difficulty)?;
    let spec = table.spec();
    if spec.ell != ell || spec.mode != params.mode || table.width() != params.width {
        return Err(Error::TableMismatch(format!(
            "node {} table (n={}, ell={}, {:?}) vs system (n={}, ell={ell}, {:?})",
            config.id,
            table.width().bits(),
            spec.ell,
            spec.mode,
            params.width.bits(),
            params.mode
        )));
    }
    if txs.is_empty() {
        return Err(Error::EmptyTransactions);
    }

    let height = parent.height + 1;
    let bytes = puzzle_bytes(height, parent.digest, config.id, difficulty, txs);
    let budget = params.attempts_for(spec.chain_len);
    let attempt_cost = params.challenge_ticks + spec.chain_len;

    let mut outcome = MiningOutcome {
        result: MiningResult::Exhausted,
        attempts_used: 0,
        ticks_used: 0,
        evaluations: 0,
    };
    for attempt in 0..budget {
        let challenge = make_challenge(&bytes, params, difficulty, config.nonce_seed(parent.digest, attempt))?;
        let search = table.invert(challenge.value)?;
        outcome.attempts_used += 1;
        outcome.ticks_used += attempt_cost;
        outcome.evaluations += search.evaluations;
        if let Some(key) = search.key {
            outcome.result = MiningResult::Solved(Block::sealed(
                height,
                parent.digest,
                txs.to_vec(),
                config.id,
                difficulty,
                challenge.nonce,
                key,
            ));
            break;
        }
    }
    Ok(outcome)
}
