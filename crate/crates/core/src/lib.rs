//! Consensus over a time-memory-data trade-off inversion puzzle.
//!
//! A block's puzzle is to find an `n`-bit key whose one-way image ends in an
//! `ell`-bit challenge derived from the block. Miners answer it with
//! precomputed two-column tables, trading table memory `M` against per-attempt
//! time `t`.

pub mod analysis;
pub mod corefn;
pub mod error;
pub mod ledger;
pub mod node;
pub mod params;
pub mod puzzle;
pub mod sim;
pub mod tmdto;

pub use crate::error::{Error, Result};
pub use crate::params::{Budget, Mode, SystemParams};
