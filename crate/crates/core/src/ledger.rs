//! Blocks, chain validation and longest-chain fork choice.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corefn::{block_digest, extract_challenge};
use crate::error::{Error, Result};
use crate::params::SystemParams;
use crate::puzzle::{nonce_digest, verify_solution, Challenge, PuzzleSolution};

pub type NodeId = u64;

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Block {
    pub height: u64,
    pub prev_digest: u64,
    pub tx_ids: Vec<u64>,
    pub miner: NodeId,
    pub difficulty: u32,
    pub nonce: u64,
    pub solution_key: u64,
    /// Digest of [`Block::to_bytes`].
    pub digest: u64,
}

impl Block {
    /// Assembles a block and computes its digest.
    pub fn sealed(
        height: u64,
        prev_digest: u64,
        tx_ids: Vec<u64>,
        miner: NodeId,
        difficulty: u32,
        nonce: u64,
        solution_key: u64,
    ) -> Self {
        let mut block = Block {
            height,
            prev_digest,
            tx_ids,
            miner,
            difficulty,
            nonce,
            solution_key,
            digest: 0,
        };
        block.digest = block_digest(&block.to_bytes());
        block
    }

    /// Height 0, all-zero parent, no transactions and no solution.
    pub fn genesis() -> Self {
        Block::sealed(0, 0, Vec::new(), 0, 0, 0, 0)
    }

    pub fn is_genesis(&self) -> bool {
        self.height == 0
    }

    /// The bytes the challenge is computed over: everything before the nonce.
    pub fn puzzle_bytes(&self) -> Vec<u8> {
        puzzle_bytes(self.height, self.prev_digest, self.miner, self.difficulty, &self.tx_ids)
    }

    /// `height ‖ prev ‖ miner ‖ j ‖ tx_count ‖ tx_ids ‖ nonce ‖ key`, little-endian.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = self.puzzle_bytes();
        buf.extend_from_slice(&self.nonce.to_le_bytes());
        buf.extend_from_slice(&self.solution_key.to_le_bytes());
        buf
    }

    /// Rebuilds the puzzle solution from the block's own fields.
    pub fn solution(&self, params: &SystemParams) -> Result<PuzzleSolution> {
        let ell = params.ell(self.difficulty)?;
        let digest = nonce_digest(&self.puzzle_bytes(), self.nonce);
        Ok(PuzzleSolution {
            key: self.solution_key,
            challenge: Challenge {
                nonce: self.nonce,
                digest,
                value: extract_challenge(digest, ell)?,
                difficulty: self.difficulty,
                zero_prefix: params.zero_prefix,
                trials: 0,
            },
        })
    }

    /// Stateless check of digest and puzzle solution.
    pub fn check(&self, params: &SystemParams) -> std::result::Result<(), RejectReason> {
        if block_digest(&self.to_bytes()) != self.digest {
            return Err(RejectReason::DigestMismatch);
        }
        let sol = self.solution(params).map_err(|_| RejectReason::BadSolution)?;
        if !verify_solution(&sol, &self.puzzle_bytes(), params) {
            return Err(RejectReason::BadSolution);
        }
        Ok(())
    }

    /// One export line: hex fields, transactions comma-separated (`-` when empty).
    pub fn to_record(&self) -> String {
        let txs = if self.tx_ids.is_empty() {
            "-".to_string()
        } else {
            self.tx_ids
                .iter()
                .map(|t| format!("{t:016x}"))
                .collect::<Vec<_>>()
                .join(",")
        };
        format!(
            "{:x} {:016x} {:x} {:x} {} {:016x} {:016x} {:016x}",
            self.height, self.prev_digest, self.miner, self.difficulty, txs, self.nonce, self.solution_key, self.digest
        )
    }

    pub fn from_record(line: &str) -> std::result::Result<Self, String> {
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 8 {
            return Err(format!("expected 8 fields, found {}", fields.len()));
        }
        let hex = |s: &str| u64::from_str_radix(s, 16).map_err(|e| format!("bad hex {s:?}: {e}"));
        let tx_ids = if fields[4] == "-" {
            Vec::new()
        } else {
            fields[4].split(',').map(hex).collect::<std::result::Result<_, _>>()?
        };
        Ok(Block {
            height: hex(fields[0])?,
            prev_digest: hex(fields[1])?,
            miner: hex(fields[2])?,
            difficulty: u32::try_from(hex(fields[3])?).map_err(|e| e.to_string())?,
            tx_ids,
            nonce: hex(fields[5])?,
            solution_key: hex(fields[6])?,
            digest: hex(fields[7])?,
        })
    }
}

pub fn puzzle_bytes(height: u64, prev: u64, miner: NodeId, difficulty: u32, txs: &[u64]) -> Vec<u8> {
    let mut buf = Vec::with_capacity(40 + 8 * txs.len() + 16);
    buf.extend_from_slice(&height.to_le_bytes());
    buf.extend_from_slice(&prev.to_le_bytes());
    buf.extend_from_slice(&miner.to_le_bytes());
    buf.extend_from_slice(&u64::from(difficulty).to_le_bytes());
    buf.extend_from_slice(&(txs.len() as u64).to_le_bytes());
    for tx in txs {
        buf.extend_from_slice(&tx.to_le_bytes());
    }
    buf
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Error, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RejectReason {
    #[error("unknown-parent")]
    UnknownParent,
    #[error("bad-height")]
    BadHeight,
    #[error("bad-solution")]
    BadSolution,
    #[error("duplicate-transaction")]
    DuplicateTransaction,
    #[error("digest-mismatch")]
    DigestMismatch,
}

/// Block tree rooted at genesis.
#[derive(Clone, Debug)]
pub struct Ledger {
    params: SystemParams,
    blocks: HashMap<u64, Block>,
    tips: BTreeSet<u64>,
    genesis: u64,
}

impl Ledger {
    pub fn new(params: SystemParams) -> Self {
        let genesis = Block::genesis();
        let digest = genesis.digest;
        Ledger {
            params,
            blocks: HashMap::from([(digest, genesis)]),
            tips: BTreeSet::from([digest]),
            genesis: digest,
        }
    }

    pub fn params(&self) -> &SystemParams {
        &self.params
    }

    pub fn genesis(&self) -> &Block {
        &self.blocks[&self.genesis]
    }

    pub fn get(&self, digest: u64) -> Option<&Block> {
        self.blocks.get(&digest)
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn tips(&self) -> impl Iterator<Item = &Block> {
        self.tips.iter().map(move |d| &self.blocks[d])
    }

    /// Walks from `tip` back to genesis, tip first.
    pub fn branch(&self, tip: u64) -> impl Iterator<Item = &Block> {
        let mut next = self.blocks.get(&tip);
        std::iter::from_fn(move || {
            let block = next?;
            next = if block.is_genesis() {
                None
            } else {
                self.blocks.get(&block.prev_digest)
            };
            Some(block)
        })
    }

    /// Accepts a block iff its parent is known, its height follows the
    /// parent's, its puzzle solution verifies and none of its transactions is
    /// already on its branch.
    pub fn append_block(&mut self, block: Block) -> std::result::Result<(), RejectReason> {
        block.check(&self.params)?;
        if self.blocks.contains_key(&block.digest) {
            // identical block: all of its transactions are already on this branch
            return Err(RejectReason::DuplicateTransaction);
        }
        let parent = self.blocks.get(&block.prev_digest).ok_or(RejectReason::UnknownParent)?;
        if block.height != parent.height + 1 {
            return Err(RejectReason::BadHeight);
        }
        let mut own = HashSet::with_capacity(block.tx_ids.len());
        if !block.tx_ids.iter().all(|tx| own.insert(*tx)) {
            return Err(RejectReason::DuplicateTransaction);
        }
        let clash = self
            .branch(block.prev_digest)
            .any(|b| b.tx_ids.iter().any(|tx| own.contains(tx)));
        if clash {
            return Err(RejectReason::DuplicateTransaction);
        }

        self.tips.remove(&block.prev_digest);
        self.tips.insert(block.digest);
        self.blocks.insert(block.digest, block);
        Ok(())
    }

    /// Highest tip; equal heights go to the numerically smaller digest.
    pub fn canonical_tip(&self) -> &Block {
        self.tips()
            .max_by(|a, b| a.height.cmp(&b.height).then(b.digest.cmp(&a.digest)))
            .expect("genesis is always present")
    }

    /// Genesis first.
    pub fn canonical_chain(&self) -> Vec<&Block> {
        let mut chain: Vec<&Block> = self.branch(self.canonical_tip().digest).collect();
        chain.reverse();
        chain
    }

    /// Line-delimited export of the canonical chain, genesis omitted.
    pub fn export_canonical(&self) -> String {
        let mut out = String::new();
        for block in self.canonical_chain().into_iter().skip(1) {
            let _ = writeln!(out, "{}", block.to_record());
        }
        out
    }
}

/// Parses an exported chain; blank lines and `#` comments are skipped.
pub fn parse_chain(text: &str) -> Result<Vec<Block>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
        .map(|(i, l)| Block::from_record(l).map_err(|reason| Error::ChainFormat { line: i + 1, reason }))
        .collect()
}

/// Replays `blocks` onto a fresh ledger in order. On failure returns the index
/// and height of the first rejected block.
pub fn replay(params: &SystemParams, blocks: Vec<Block>) -> std::result::Result<Ledger, (usize, u64, RejectReason)> {
    let mut ledger = Ledger::new(params.clone());
    for (i, block) in blocks.into_iter().enumerate() {
        let height = block.height;
        ledger.append_block(block).map_err(|r| (i, height, r))?;
    }
    Ok(ledger)
}


#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::fixtures::*;
    use super::*;

    #[test]
    fn valid_child_of_genesis() {
        let p = params();
        let t = table(&p);
        let mut ledger = Ledger::new(p.clone());
        let g = ledger.genesis().clone();
        assert_eq!(g.prev_digest, 0);
        let b = mine(&p, &t, &g, 1, &[10, 11]);
        ledger.append_block(b.clone()).unwrap();
        assert_eq!(ledger.canonical_tip().height, 1);
        assert_eq!(ledger.canonical_chain().len(), 2);

        // same block again, and a re-mined child carrying the same transactions
        assert_eq!(ledger.append_block(b.clone()), Err(RejectReason::DuplicateTransaction));
        let again = mine(&p, &t, &b, 2, &[11]);
        assert_eq!(ledger.append_block(again), Err(RejectReason::DuplicateTransaction));
    }

    #[test]
    fn corrupted_key_is_bad_solution() {
        let p = params();
        let t = table(&p);
        let mut ledger = Ledger::new(p.clone());
        let b = mine(&p, &t, ledger.genesis(), 1, &[1]);
        let sol = b.solution(&p).unwrap();
        let flipped = PuzzleSolution {
            key: b.solution_key ^ 1,
            ..sol
        };
        assert!(!verify_solution(&flipped, &b.puzzle_bytes(), &p));
        let bad = Block::sealed(
            b.height,
            b.prev_digest,
            b.tx_ids.clone(),
            b.miner,
            1,
            b.nonce,
            b.solution_key ^ 1,
        );
        assert_eq!(ledger.append_block(bad), Err(RejectReason::BadSolution));
    }

    #[test]
    fn unknown_parent_and_bad_height() {
        let p = params();
        let t = table(&p);
        let mut ledger = Ledger::new(p.clone());
        let g = ledger.genesis().clone();
        let orphan_parent = Block::sealed(1, 0xDEAD, vec![], 0, 1, 0, 0);
        let orphan = mine(&p, &t, &orphan_parent, 1, &[5]);
        assert_eq!(ledger.append_block(orphan), Err(RejectReason::UnknownParent));

        let mut skip = g.clone();
        skip.height = 1; // child claims height 2
        let tall = mine(&p, &t, &skip, 1, &[6]);
        let tall = Block::sealed(2, g.digest, tall.tx_ids, tall.miner, 1, tall.nonce, tall.solution_key);
        let res = ledger.append_block(tall);
        // the solution was mined for other bytes, so either check may fire first
        assert!(matches!(res, Err(RejectReason::BadHeight | RejectReason::BadSolution)));
    }

    #[test]
    fn height_checked_on_valid_solution() {
        let p = params();
        let t = table(&p);
        let mut ledger = Ledger::new(p.clone());
        let g = ledger.genesis().clone();
        // mine at height 2 directly on genesis' digest
        let fake_parent = Block { height: 1, ..g.clone() };
        let b = mine(&p, &t, &fake_parent, 1, &[1]);
        assert_eq!(b.prev_digest, g.digest);
        assert_eq!(ledger.append_block(b), Err(RejectReason::BadHeight));
    }

    #[test]
    fn tampered_digest() {
        let p = params();
        let t = table(&p);
        let mut ledger = Ledger::new(p.clone());
        let mut b = mine(&p, &t, ledger.genesis(), 1, &[1]);
        b.digest ^= 1;
        assert_eq!(ledger.append_block(b), Err(RejectReason::DigestMismatch));
    }

    #[test]
    fn duplicate_tx_is_branch_local() {
        let p = params();
        let t = table(&p);
        let mut ledger = Ledger::new(p.clone());
        let g = ledger.genesis().clone();
        let a1 = mine(&p, &t, &g, 1, &[100]);
        let b1 = mine(&p, &t, &g, 2, &[200]);
        ledger.append_block(a1.clone()).unwrap();
        ledger.append_block(b1.clone()).unwrap();
        // tx 100 already on branch a, but not on branch b
        assert_eq!(
            ledger.append_block(mine(&p, &t, &a1, 1, &[100])),
            Err(RejectReason::DuplicateTransaction)
        );
        ledger.append_block(mine(&p, &t, &b1, 2, &[100])).unwrap();
        // repeated id inside one block
        assert_eq!(
            ledger.append_block(mine(&p, &t, &a1, 1, &[7, 7])),
            Err(RejectReason::DuplicateTransaction)
        );
    }

    #[test]
    fn fork_choice_longest_then_smallest_digest() {
        let p = params();
        let t = table(&p);
        let mut ledger = Ledger::new(p.clone());
        assert_eq!(ledger.canonical_chain().len(), 1);

        let g = ledger.genesis().clone();
        let mut tx = 0u64;
        let mut grow = |ledger: &mut Ledger, from: &Block, miner: NodeId, n: usize| -> Block {
            let mut tip = from.clone();
            for _ in 0..n {
                tx += 1;
                tip = mine(&p, &t, &tip, miner, &[tx]);
                ledger.append_block(tip.clone()).unwrap();
            }
            tip
        };
        let short = grow(&mut ledger, &g, 1, 3);
        let long = grow(&mut ledger, &g, 2, 5);
        assert_eq!(ledger.canonical_tip(), &long);
        assert_ne!(ledger.canonical_tip(), &short);

        let rival = grow(&mut ledger, &g, 3, 5);
        let expected = if rival.digest < long.digest { &rival } else { &long };
        assert_eq!(ledger.canonical_tip(), expected);
        let chain = ledger.canonical_chain();
        assert_eq!(chain.len(), 6);
        assert!(chain[0].is_genesis());
        assert!(chain.windows(2).all(|w| w[1].prev_digest == w[0].digest));
    }

    #[test]
    fn export_parse_replay() {
        let p = params();
        let t = table(&p);
        let mut ledger = Ledger::new(p.clone());
        let mut tip = ledger.genesis().clone();
        for i in 0..4 {
            tip = mine(&p, &t, &tip, 1, &[i, i + 100]);
            ledger.append_block(tip.clone()).unwrap();
        }
        let text = ledger.export_canonical();
        assert_eq!(text.lines().count(), 4);
        let blocks = parse_chain(&text).unwrap();
        let replayed = replay(&p, blocks).unwrap();
        assert_eq!(replayed.export_canonical(), text);

        assert_eq!(parse_chain("").unwrap(), vec![]);
        assert!(matches!(
            parse_chain("# header\n1 2 3\n"),
            Err(Error::ChainFormat { line: 2, .. })
        ));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn record_roundtrip(height in any::<u64>(), prev in any::<u64>(), txs in proptest::collection::vec(any::<u64>(), 0..5),
                            miner in any::<u64>(), j in any::<u32>(), nonce in any::<u64>(), key in any::<u64>()) {
            let b = Block::sealed(height, prev, txs, miner, j, nonce, key);
            prop_assert_eq!(Block::from_record(&b.to_record()).unwrap(), b);
        }

        #[test]
        fn canonical_length_never_shrinks(order in proptest::collection::vec(0usize..3, 1..12)) {
            let p = params();
            let t = table(&p);
            let mut ledger = Ledger::new(p.clone());
            let g = ledger.genesis().clone();
            let mut tips = [g.clone(), g.clone(), g];
            let mut best = 1;
            for (i, branch) in order.into_iter().enumerate() {
                let b = mine(&p, &t, &tips[branch], branch as u64, &[i as u64]);
                ledger.append_block(b.clone()).unwrap();
                tips[branch] = b;
                let len = ledger.canonical_chain().len();
                prop_assert!(len >= best);
                best = len;
                for block in ledger.canonical_chain().into_iter().skip(1) {
                    prop_assert!(block.check(&p).is_ok());
                }
            }
        }
    }
}
