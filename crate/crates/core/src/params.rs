use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::corefn::{check_suffix_len, StateWidth};
use crate::error::{Error, Result};

/// Which inversion variant the system runs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Chains iterate the bare one-way step over the full `2^n` space.
    Unconstrained,
    /// Every state is forced into the subspace whose top `n - ell` bits are ones.
    Constrained,
}

impl Mode {
    pub fn code(self) -> u32 {
        match self {
            Mode::Unconstrained => 0,
            Mode::Constrained => 1,
        }
    }

    pub fn from_code(code: u32) -> Option<Mode> {
        match code {
            0 => Some(Mode::Unconstrained),
            1 => Some(Mode::Constrained),
            _ => None,
        }
    }
}

/// Per-node, per-difficulty resources: `M` table rows and chain length `t`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Budget {
    pub rows: u64,
    pub chain_len: u64,
}

impl Budget {
    pub fn new(rows: u64, chain_len: u64) -> Self {
        Budget { rows, chain_len }
    }

    pub fn is_zero(&self) -> bool {
        self.rows == 0 || self.chain_len == 0
    }

    /// Number of inversion attempts that fit in one slot, `floor(slot / (challenge + t))`.
    pub fn attempts(&self, params: &SystemParams) -> u64 {
        params.attempts_for(self.chain_len)
    }
}

/// Global protocol parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    /// Key/state width `n`.
    pub width: StateWidth,
    /// Zero-prefix length of the challenge mini proof-of-work.
    pub zero_prefix: u32,
    /// Slot duration `Δ` in ticks.
    pub slot_ticks: u64,
    /// Challenge construction cost `δ` in ticks.
    pub challenge_ticks: u64,
    pub mode: Mode,
    /// Difficulty level `j` to challenge length `ell^j`.
    pub difficulties: BTreeMap<u32, u32>,
    /// Nonce trial cap for challenge construction; `None` means `2^(d + 8)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub challenge_trial_cap: Option<u64>,
}

impl SystemParams {
    pub fn validate(&self) -> Result<()> {
        if self.zero_prefix > 64 {
            return Err(Error::InvalidPrefixLength(self.zero_prefix));
        }
        if self.difficulties.is_empty() {
            return Err(Error::Config("no difficulty levels".into()));
        }
        for &ell in self.difficulties.values() {
            check_suffix_len(ell, self.width)?;
        }
        Ok(())
    }

    pub fn ell(&self, difficulty: u32) -> Result<u32> {
        self.difficulties
            .get(&difficulty)
            .copied()
            .ok_or(Error::UnknownDifficulty(difficulty))
    }

    pub fn trial_cap(&self) -> u64 {
        self.challenge_trial_cap
            .unwrap_or_else(|| 1u64.checked_shl(self.zero_prefix + 8).unwrap_or(u64::MAX))
    }

    /// `floor(Δ / (δ + t))`, zero when the denominator is zero.
    pub fn attempts_for(&self, chain_len: u64) -> u64 {
        match self.challenge_ticks.checked_add(chain_len) {
            Some(0) | None => 0,
            Some(cost) => self.slot_ticks / cost,
        }
    }

    /// `log2 N` for Lemma-1 style predictions: `ell` unconstrained, `n` constrained.
    pub fn solution_space_bits(&self, difficulty: u32) -> Result<u32> {
        Ok(match self.mode {
            Mode::Unconstrained => self.ell(difficulty)?,
            Mode::Constrained => self.width.bits(),
        })
    }
}

#[cfg(test)]
pub(crate) fn test_params(n: u32, ell: u32, mode: Mode) -> SystemParams {
    SystemParams {
        width: StateWidth::new(n).unwrap(),
        zero_prefix: 2,
        slot_ticks: 1000,
        challenge_ticks: 10,
        mode,
        difficulties: BTreeMap::from([(1, ell)]),
        challenge_trial_cap: None,
    }
}
