//! Challenge construction by a small proof-of-work, and cheap solution checks.

use serde::{Deserialize, Serialize};

use crate::corefn::{block_digest, encrypt_ones, extract_challenge, has_zero_prefix, low_mask, preset_prefix};
use crate::error::{Error, Result};
use crate::params::{Mode, SystemParams};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Challenge {
    pub nonce: u64,
    pub digest: u64,
    /// The `ell^j`-bit inversion target.
    pub value: u64,
    pub difficulty: u32,
    pub zero_prefix: u32,
    /// Nonces hashed before one was accepted.
    pub trials: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PuzzleSolution {
    pub key: u64,
    pub challenge: Challenge,
}

/// Digest of `block_bytes ‖ nonce` (nonce as 8 little-endian bytes).
pub fn nonce_digest(block_bytes: &[u8], nonce: u64) -> u64 {
    let mut buf = Vec::with_capacity(block_bytes.len() + 8);
    buf.extend_from_slice(block_bytes);
    buf.extend_from_slice(&nonce.to_le_bytes());
    block_digest(&buf)
}

/// Tries `nonce_seed, nonce_seed + 1, ...` until the digest has a `d`-zero
/// prefix, then takes its low `ell^j` bits as the challenge.
pub fn make_challenge(
    block_bytes: &[u8],
    params: &SystemParams,
    difficulty: u32,
    nonce_seed: u64,
) -> Result<Challenge> {
    let ell = params.ell(difficulty)?;
    let d = params.zero_prefix;
    let cap = params.trial_cap();

    // reuse one buffer; only the trailing nonce changes
    let mut buf = Vec::with_capacity(block_bytes.len() + 8);
    buf.extend_from_slice(block_bytes);
    buf.extend_from_slice(&[0; 8]);
    let tail = block_bytes.len();

    for trial in 0..cap {
        let nonce = nonce_seed.wrapping_add(trial);
        buf[tail..].copy_from_slice(&nonce.to_le_bytes());
        let digest = block_digest(&buf);
        if has_zero_prefix(digest, d)? {
            return Ok(Challenge {
                nonce,
                digest,
                value: extract_challenge(digest, ell)?,
                difficulty,
                zero_prefix: d,
                trials: trial + 1,
            });
        }
    }
    Err(Error::TrialCapExhausted { d, cap })
}

/// One digest and one one-way evaluation, independent of table sizes.
pub fn verify_solution(sol: &PuzzleSolution, block_bytes: &[u8], params: &SystemParams) -> bool {
    let ch = &sol.challenge;
    let Ok(ell) = params.ell(ch.difficulty) else {
        return false;
    };
    let digest = nonce_digest(block_bytes, ch.nonce);
    if digest != ch.digest || !matches!(has_zero_prefix(digest, params.zero_prefix), Ok(true)) {
        return false;
    }
    if extract_challenge(digest, ell) != Ok(ch.value) {
        return false;
    }
    let width = params.width;
    if width.check(sol.key).is_err() {
        return false;
    }
    if encrypt_ones(sol.key, width) & low_mask(ell) != ch.value {
        return false;
    }
    match params.mode {
        Mode::Unconstrained => true,
        Mode::Constrained => preset_prefix(sol.key, width, ell) == sol.key,
    }
}
