//! Deterministic bit-level primitives shared by every other module.
//!
//! The one-way function is a keyed step `E_K(1^n)` realized with a 64-bit
//! avalanche finalizer. It is not meant to be cryptographically strong; it only
//! has to behave like a random function and be bit-exact across platforms.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Bit width of keys and chain states, in `[1, 64]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub struct StateWidth(u32);

impl StateWidth {
    pub fn new(bits: u32) -> Result<Self> {
        if (1..=64).contains(&bits) {
            Ok(StateWidth(bits))
        } else {
            Err(Error::InvalidWidth(bits))
        }
    }

    pub fn bits(self) -> u32 {
        self.0
    }

    /// `2^n - 1`, which doubles as the all-ones message `1^n`.
    pub fn mask(self) -> u64 {
        low_mask(self.0)
    }

    /// Number of distinct states, `2^n`.
    pub fn space(self) -> u128 {
        1u128 << self.0
    }

    pub fn check(self, value: u64) -> Result<u64> {
        if value & !self.mask() == 0 {
            Ok(value)
        } else {
            Err(Error::OutOfRange { value, bits: self.0 })
        }
    }
}

impl TryFrom<u32> for StateWidth {
    type Error = Error;

    fn try_from(bits: u32) -> Result<Self> {
        StateWidth::new(bits)
    }
}

impl From<StateWidth> for u32 {
    fn from(width: StateWidth) -> u32 {
        width.0
    }
}

/// Mask with the low `bits` bits set; `bits` may be 0 or 64.
pub(crate) fn low_mask(bits: u32) -> u64 {
    if bits >= 64 {
        u64::MAX
    } else {
        (1u64 << bits) - 1
    }
}

/// The splitmix64 finalizer. Bijective on `u64`.
#[inline]
pub fn mix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Unchecked `E_K(1^n)`; `key` must already fit in `width`.
#[inline]
pub(crate) fn encrypt_ones(key: u64, width: StateWidth) -> u64 {
    let ones = width.mask();
    mix64(mix64(key) ^ ones) & ones
}

/// `E_K(1^n)`: encrypts the all-ones message under the n-bit key `key`.
pub fn oneway_step(key: u64, width: StateWidth) -> Result<u64> {
    width.check(key)?;
    Ok(encrypt_ones(key, width))
}

pub(crate) fn check_suffix_len(ell: u32, width: StateWidth) -> Result<()> {
    if (1..=width.bits()).contains(&ell) {
        Ok(())
    } else {
        Err(Error::InvalidSuffixLength { ell, max: width.bits() })
    }
}

#[inline]
pub(crate) fn preset_prefix(x: u64, width: StateWidth, ell: u32) -> u64 {
    x | (width.mask() & !low_mask(ell))
}

/// Forces the top `n - ell` bits of `x` to one, keeping the low `ell` bits.
pub fn constrain(x: u64, width: StateWidth, ell: u32) -> Result<u64> {
    check_suffix_len(ell, width)?;
    width.check(x)?;
    Ok(preset_prefix(x, width, ell))
}

/// Folds `mix64(h ^ w)` over the little-endian 8-byte words of `bytes`
/// (zero-padded), followed by one word holding the byte length.
pub fn block_digest(bytes: &[u8]) -> u64 {
    let mut h = 0u64;
    for chunk in bytes.chunks(8) {
        let mut word = [0u8; 8];
        word[..chunk.len()].copy_from_slice(chunk);
        h = mix64(h ^ u64::from_le_bytes(word));
    }
    mix64(h ^ bytes.len() as u64)
}

/// True iff the `d` most significant bits of `h` are zero.
pub fn has_zero_prefix(h: u64, d: u32) -> Result<bool> {
    match d {
        0 => Ok(true),
        1..=63 => Ok(h >> (64 - d) == 0),
        64 => Ok(h == 0),
        _ => Err(Error::InvalidPrefixLength(d)),
    }
}

/// The low `ell` bits of `h`.
pub fn extract_challenge(h: u64, ell: u32) -> Result<u64> {
    if (1..=64).contains(&ell) {
        Ok(h & low_mask(ell))
    } else {
        Err(Error::InvalidSuffixLength { ell, max: 64 })
    }
}

#[cfg(test)]
mod tests {
    use std::collections::HashSet;

    use proptest::prelude::*;

    use super::*;

    fn w(bits: u32) -> StateWidth {
        StateWidth::new(bits).unwrap()
    }

    #[test]
    fn width_bounds() {
        assert!(StateWidth::new(0).is_err());
        assert!(StateWidth::new(65).is_err());
        assert_eq!(w(1).mask(), 1);
        assert_eq!(w(24).mask(), 0xFF_FFFF);
        assert_eq!(w(64).mask(), u64::MAX);
    }

    #[test]
    fn mix64_golden() {
        assert_eq!(mix64(0), 0xe220_a839_7b1d_cdaf);
        assert_eq!(mix64(1), 0x910a_2dec_8902_5cc1);
    }

    #[test]
    fn mix64_injective_on_seeded_inputs() {
        let mut seen = HashSet::new();
        let mut x = 0x1234_5678u64;
        for _ in 0..100_000 {
            x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            assert!(seen.insert(mix64(x)));
        }
    }

    #[test]
    fn mix64_injective_on_16_bit_subranges() {
        for base in [0u64, 0xFFFF_FFFF_FFFF_0000, 0x8000_0000_0000_0000] {
            let outputs: HashSet<u64> = (0..=0xFFFFu64).map(|i| mix64(base | i)).collect();
            assert_eq!(outputs.len(), 1 << 16);
        }
    }

    #[test]
    fn oneway_golden() {
        assert_eq!(oneway_step(0, w(16)).unwrap(), 0x6996);
        assert_eq!(oneway_step(0x2A, w(8)).unwrap(), 0x80);
        assert_eq!(oneway_step(0x2A, w(8)).unwrap(), oneway_step(0x2A, w(8)).unwrap());
    }

    #[test]
    fn oneway_rejects_wide_key() {
        assert_eq!(
            oneway_step(0x100, w(8)),
            Err(Error::OutOfRange { value: 0x100, bits: 8 })
        );
    }

    #[test]
    fn oneway_uniform_at_24_bits() {
        use statrs::distribution::{ChiSquared, ContinuousCDF};

        let width = w(24);
        let samples = 1u64 << 16;
        let mut buckets = [0u64; 256];
        for i in 0..samples {
            let key = mix64(i ^ 0xA5A5) & width.mask();
            buckets[(oneway_step(key, width).unwrap() >> 16) as usize] += 1;
        }
        let expected = samples as f64 / 256.0;
        let stat: f64 = buckets.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
        let p = 1.0 - ChiSquared::new(255.0).unwrap().cdf(stat);
        assert!(p > 0.001, "chi-squared p = {p}");
    }

    #[test]
    fn constrain_examples() {
        assert_eq!(constrain(0x00_0000, w(24), 16).unwrap(), 0xFF_0000);
        assert_eq!(constrain(0xAB_CDEF, w(24), 24).unwrap(), 0xAB_CDEF);
        assert_eq!(constrain(0x12, w(8), 4).unwrap(), 0xF2);
        assert!(constrain(0, w(8), 0).is_err());
        assert!(constrain(0, w(8), 9).is_err());
    }

    #[test]
    fn digest_examples() {
        assert_eq!(block_digest(&[]), mix64(0));
        assert_eq!(block_digest(&[1, 0, 0, 0, 0, 0, 0, 0]), 0x2c25_5cac_8788_03d9);
        assert_ne!(block_digest(&[0]), block_digest(&[0, 0]));
    }

    #[test]
    fn zero_prefix_examples() {
        assert!(has_zero_prefix(0x00FF_0000_0000_0000, 8).unwrap());
        assert!(has_zero_prefix(u64::MAX, 0).unwrap());
        assert!(!has_zero_prefix(0x8000_0000_0000_0000, 1).unwrap());
        assert!(has_zero_prefix(0, 64).unwrap());
        assert!(!has_zero_prefix(1, 64).unwrap());
        assert!(has_zero_prefix(0, 65).is_err());
    }

    #[test]
    fn challenge_examples() {
        assert_eq!(extract_challenge(0x1234_5678_9ABC_DEF0, 16).unwrap(), 0xDEF0);
        assert_eq!(extract_challenge(u64::MAX, 1).unwrap(), 1);
        assert_eq!(extract_challenge(0, 20).unwrap(), 0);
        assert!(extract_challenge(0, 0).is_err());
        assert_eq!(extract_challenge(u64::MAX, 64).unwrap(), u64::MAX);
    }

    proptest! {
        #[test]
        fn constrain_is_idempotent(x in any::<u64>(), bits in 1u32..=64, ell_seed in any::<u32>()) {
            let width = w(bits);
            let ell = ell_seed % bits + 1;
            let x = x & width.mask();
            let once = constrain(x, width, ell).unwrap();
            prop_assert_eq!(constrain(once, width, ell).unwrap(), once);
            prop_assert_eq!(once & low_mask(ell), x & low_mask(ell));
        }

        #[test]
        fn oneway_fits_width(key in any::<u64>(), bits in 1u32..=64) {
            let width = w(bits);
            let out = oneway_step(key & width.mask(), width).unwrap();
            prop_assert!(out <= width.mask());
        }
    }
}
