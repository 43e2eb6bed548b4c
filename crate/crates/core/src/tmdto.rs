//! Two-column trade-off tables and the inversion search over them.
//!
//! A table stores `M` chains of length `t` under the global one-way step. Only
//! the first and last column are kept; interior states are recovered by
//! rewalking from the start. In constrained mode every state is forced into the
//! subspace whose top `n - ell` bits are ones before it is used as a key.

use std::collections::HashSet;
use std::io::{Read, Write};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corefn::{check_suffix_len, encrypt_ones, low_mask, preset_prefix, StateWidth};
use crate::error::{Error, Result};
use crate::params::Mode;

pub const TABLE_MAGIC: [u8; 4] = *b"TMDT";
pub const TABLE_VERSION: u32 = 1;
const HEADER_LEN: usize = 48;
const RECORD_LEN: usize = 16;

/// Upper bound on `M * t` for exact enumeration of the covered set.
pub const COVERED_SET_CAP: u128 = 1 << 24;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableSpec {
    pub difficulty: u32,
    /// Challenge length `ell^j`.
    pub ell: u32,
    /// Row count `M`. Zero yields an empty table that never inverts anything.
    pub rows: u64,
    /// Chain length `t`.
    pub chain_len: u64,
    pub mode: Mode,
    pub seed: u64,
}

impl TableSpec {
    /// Bits of freedom in a start point: `n` unconstrained, `ell` constrained.
    pub fn sample_bits(&self, width: StateWidth) -> u32 {
        match self.mode {
            Mode::Unconstrained => width.bits(),
            Mode::Constrained => self.ell,
        }
    }

    /// True when `M * t^2` exceeds the space the chains live in, past which
    /// merges start eating into coverage.
    pub fn exceeds_matrix_rule(&self, width: StateWidth) -> bool {
        let mt2 = (self.rows as u128)
            .saturating_mul(self.chain_len as u128)
            .saturating_mul(self.chain_len as u128);
        mt2 > 1u128 << self.sample_bits(width)
    }

    fn validate(&self, width: StateWidth) -> Result<()> {
        check_suffix_len(self.ell, width)?;
        if self.chain_len == 0 {
            return Err(Error::ZeroChainLength);
        }
        Ok(())
    }
}

/// The iterated function a table is built from.
#[derive(Clone, Copy, Debug)]
struct ChainFn {
    width: StateWidth,
    ell: u32,
    constrained: bool,
}

impl ChainFn {
    fn new(spec: &TableSpec, width: StateWidth) -> Self {
        ChainFn {
            width,
            ell: spec.ell,
            constrained: spec.mode == Mode::Constrained,
        }
    }

    #[inline]
    fn key_of(&self, x: u64) -> u64 {
        if self.constrained {
            preset_prefix(x, self.width, self.ell)
        } else {
            x
        }
    }

    #[inline]
    fn step(&self, x: u64) -> u64 {
        encrypt_ones(self.key_of(x), self.width)
    }

    fn walk(&self, start: u64, steps: u64) -> u64 {
        (0..steps).fold(start, |x, _| self.step(x))
    }
}

/// One chain step: `E_x(1^n)` unconstrained, `E_{constrain(x)}(1^n)` constrained.
pub fn chain_step(x: u64, spec: &TableSpec, width: StateWidth) -> Result<u64> {
    check_suffix_len(spec.ell, width)?;
    width.check(x)?;
    Ok(ChainFn::new(spec, width).step(x))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Row {
    pub start: u64,
    pub end: u64,
}

/// Outcome of one inversion search.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SearchOutcome {
    /// A key whose one-way image ends in the challenge, if one was found.
    pub key: Option<u64>,
    /// One-way evaluations spent, outer walk and rewalks together.
    pub evaluations: u64,
    /// Endpoint matches whose rewalk produced no pre-image.
    pub false_alarms: u32,
}

impl SearchOutcome {
    pub fn found(&self) -> bool {
        self.key.is_some()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TradeoffTable {
    spec: TableSpec,
    width: StateWidth,
    /// Sorted by `(end, start)`.
    rows: Vec<Row>,
    /// Row indices sorted by `(end mod 2^ell, end, start)`.
    suffix_index: Vec<usize>,
}

impl TradeoffTable {
    /// Builds the table: `M` distinct seeded starts, each walked `t` steps.
    pub fn build(spec: TableSpec, width: StateWidth) -> Result<Self> {
        spec.validate(width)?;
        let bits = spec.sample_bits(width);
        if spec.rows as u128 > 1u128 << bits {
            return Err(Error::InsufficientStarts {
                wanted: spec.rows,
                bits,
            });
        }
        if spec.exceeds_matrix_rule(width) {
            log::warn!(
                "M*t^2 = {}*{}^2 exceeds 2^{}; chain merges will reduce coverage",
                spec.rows,
                spec.chain_len,
                bits
            );
        }

        let f = ChainFn::new(&spec, width);
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let mut seen = HashSet::with_capacity(spec.rows as usize);
        let mut starts = Vec::with_capacity(spec.rows as usize);
        while (starts.len() as u64) < spec.rows {
            let raw = rng.next_u64() & low_mask(bits);
            let start = f.key_of(raw);
            if seen.insert(start) {
                starts.push(start);
            }
        }

        let rows: Vec<Row> = starts
            .into_par_iter()
            .map(|start| Row {
                start,
                end: f.walk(start, spec.chain_len),
            })
            .collect();
        Ok(Self::from_rows(spec, width, rows))
    }

    fn from_rows(spec: TableSpec, width: StateWidth, mut rows: Vec<Row>) -> Self {
        rows.sort_unstable_by_key(|r| (r.end, r.start));
        let suffix = low_mask(spec.ell);
        let mut suffix_index: Vec<usize> = (0..rows.len()).collect();
        // stable: ties keep the (end, start) order
        suffix_index.sort_by_key(|&i| rows[i].end & suffix);
        TradeoffTable {
            spec,
            width,
            rows,
            suffix_index,
        }
    }

    pub fn spec(&self) -> &TableSpec {
        &self.spec
    }

    pub fn width(&self) -> StateWidth {
        self.width
    }

    pub fn rows(&self) -> &[Row] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Rows in suffix-index order.
    pub fn rows_by_suffix(&self) -> impl Iterator<Item = &Row> {
        self.suffix_index.iter().map(move |&i| &self.rows[i])
    }

    /// Recomputes every end from its start.
    pub fn verify_chains(&self) -> bool {
        let f = ChainFn::new(&self.spec, self.width);
        self.rows
            .par_iter()
            .all(|r| f.walk(r.start, self.spec.chain_len) == r.end)
    }

    fn rows_with_end(&self, end: u64) -> std::ops::Range<usize> {
        let lo = self.rows.partition_point(|r| r.end < end);
        let hi = self.rows.partition_point(|r| r.end <= end);
        lo..hi
    }

    fn suffix_positions(&self, suffix: u64) -> std::ops::Range<usize> {
        let mask = low_mask(self.spec.ell);
        let lo = self.suffix_index.partition_point(|&i| self.rows[i].end & mask < suffix);
        let hi = self
            .suffix_index
            .partition_point(|&i| self.rows[i].end & mask <= suffix);
        lo..hi
    }

    /// Searches for a key whose one-way image has `challenge` as its low
    /// `ell` bits.
    ///
    /// Rows whose end already carries the challenge suffix are rewalked first.
    /// Then the ones-padded challenge is walked forward up to `t` steps, and
    /// every row whose end equals the current state is rewalked. A rewalk is
    /// capped at `t` steps; running out is a false alarm and the walk resumes.
    pub fn invert(&self, challenge: u64) -> Result<SearchOutcome> {
        let suffix_mask = low_mask(self.spec.ell);
        if challenge & !suffix_mask != 0 {
            return Err(Error::OutOfRange {
                value: challenge,
                bits: self.spec.ell,
            });
        }
        let f = ChainFn::new(&self.spec, self.width);
        let t = self.spec.chain_len;
        let mut out = SearchOutcome {
            key: None,
            evaluations: 0,
            false_alarms: 0,
        };
        let mut tried: Vec<usize> = Vec::new();

        let mut rewalk = |row: usize, out: &mut SearchOutcome| -> Option<u64> {
            if tried.contains(&row) {
                return None;
            }
            tried.push(row);
            let mut x = self.rows[row].start;
            for _ in 0..t {
                let key = f.key_of(x);
                let image = encrypt_ones(key, self.width);
                out.evaluations += 1;
                if image & suffix_mask == challenge {
                    return Some(key);
                }
                x = image;
            }
            out.false_alarms += 1;
            None
        };

        for pos in self.suffix_positions(challenge) {
            if let Some(key) = rewalk(self.suffix_index[pos], &mut out) {
                out.key = Some(key);
                return Ok(out);
            }
        }

        let mut x = preset_prefix(challenge, self.width, self.spec.ell);
        for _ in 0..t {
            x = f.step(x);
            out.evaluations += 1;
            for row in self.rows_with_end(x) {
                if let Some(key) = rewalk(row, &mut out) {
                    out.key = Some(key);
                    return Ok(out);
                }
            }
        }
        Ok(out)
    }

    /// Every `ell`-bit suffix of every image on every chain.
    pub fn covered_set(&self) -> Result<CoveredSet> {
        let entries = self.rows.len() as u128 * self.spec.chain_len as u128;
        if entries > COVERED_SET_CAP {
            return Err(Error::EnumerationTooLarge {
                entries,
                cap: COVERED_SET_CAP,
            });
        }
        let f = ChainFn::new(&self.spec, self.width);
        let mask = low_mask(self.spec.ell);
        let t = self.spec.chain_len;
        let mut values: Vec<u64> = self
            .rows
            .par_iter()
            .flat_map_iter(|r| {
                let mut x = r.start;
                (0..t).map(move |_| {
                    x = f.step(x);
                    x & mask
                })
            })
            .collect();
        values.par_sort_unstable();
        values.dedup();
        Ok(CoveredSet {
            ell: self.spec.ell,
            values,
        })
    }

    /// Number of distinct `ell`-bit suffixes among the ends.
    pub fn distinct_end_suffixes(&self) -> usize {
        let mask = low_mask(self.spec.ell);
        let mut count = 0;
        let mut last = None;
        for row in self.rows_by_suffix() {
            let s = row.end & mask;
            if last != Some(s) {
                count += 1;
                last = Some(s);
            }
        }
        count
    }

    pub fn write_to<W: Write>(&self, mut out: W) -> Result<()> {
        out.write_all(&self.to_bytes())?;
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let s = &self.spec;
        let mut buf = Vec::with_capacity(HEADER_LEN + RECORD_LEN * self.rows.len());
        buf.extend_from_slice(&TABLE_MAGIC);
        buf.extend_from_slice(&TABLE_VERSION.to_le_bytes());
        buf.extend_from_slice(&self.width.bits().to_le_bytes());
        buf.extend_from_slice(&s.difficulty.to_le_bytes());
        buf.extend_from_slice(&s.ell.to_le_bytes());
        buf.extend_from_slice(&s.rows.to_le_bytes());
        buf.extend_from_slice(&s.chain_len.to_le_bytes());
        buf.extend_from_slice(&s.mode.code().to_le_bytes());
        buf.extend_from_slice(&s.seed.to_le_bytes());
        for r in &self.rows {
            buf.extend_from_slice(&r.start.to_le_bytes());
            buf.extend_from_slice(&r.end.to_le_bytes());
        }
        buf
    }

    pub fn read_from<R: Read>(mut input: R) -> Result<Self> {
        let mut bytes = Vec::new();
        input.read_to_end(&mut bytes)?;
        Self::from_bytes(&bytes)
    }

    /// Parses a `.tmt` image. Chains are not re-walked; see [`Self::verify_chains`].
    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |msg: &str| Error::TableFormat(msg.to_string());
        if bytes.len() < HEADER_LEN {
            return Err(bad("truncated header"));
        }
        if bytes[..4] != TABLE_MAGIC {
            return Err(bad("bad magic"));
        }
        let u32_at = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap());
        let u64_at = |at: usize| u64::from_le_bytes(bytes[at..at + 8].try_into().unwrap());
        let version = u32_at(4);
        if version != TABLE_VERSION {
            return Err(Error::TableFormat(format!("unsupported version {version}")));
        }
        let width = StateWidth::new(u32_at(8))?;
        let mode = Mode::from_code(u32_at(36)).ok_or_else(|| bad("unknown mode"))?;
        let spec = TableSpec {
            difficulty: u32_at(12),
            ell: u32_at(16),
            rows: u64_at(20),
            chain_len: u64_at(28),
            mode,
            seed: u64_at(40),
        };
        spec.validate(width)?;
        let body = &bytes[HEADER_LEN..];
        if body.len() as u128 != spec.rows as u128 * RECORD_LEN as u128 {
            return Err(bad("record count does not match header"));
        }
        let rows: Vec<Row> = body
            .chunks_exact(RECORD_LEN)
            .map(|rec| Row {
                start: u64::from_le_bytes(rec[..8].try_into().unwrap()),
                end: u64::from_le_bytes(rec[8..].try_into().unwrap()),
            })
            .collect();
        if rows.windows(2).any(|w| (w[0].end, w[0].start) > (w[1].end, w[1].start)) {
            return Err(bad("rows not sorted by end"));
        }
        let f = ChainFn::new(&spec, width);
        let mut starts = HashSet::with_capacity(rows.len());
        for r in &rows {
            width.check(r.start)?;
            width.check(r.end)?;
            if f.key_of(r.start) != r.start {
                return Err(bad("start outside the constrained subspace"));
            }
            if !starts.insert(r.start) {
                return Err(bad("duplicate start"));
            }
        }
        Ok(Self::from_rows(spec, width, rows))
    }
}

/// The exact set of challenges a constrained table can invert.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CoveredSet {
    ell: u32,
    values: Vec<u64>,
}

impl CoveredSet {
    pub fn contains(&self, challenge: u64) -> bool {
        self.values.binary_search(&challenge).is_ok()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Sorted ascending.
    pub fn values(&self) -> &[u64] {
        &self.values
    }

    /// `|covered| / 2^ell`.
    pub fn fraction(&self) -> f64 {
        self.values.len() as f64 / (1u128 << self.ell) as f64
    }
}
