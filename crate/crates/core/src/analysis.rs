//! Closed-form success and security predictors, and the estimators used to
//! hold them up against measured behaviour.
//!
//! Predictions follow the random-function heuristic: a table with `M` rows of
//! length `t` inverts a fraction `M t / N` of challenges, and `D` independent
//! challenges multiply that by `D`. `N` is `2^ell` for unconstrained tables
//! and `2^n` for constrained ones. Because constrained chains actually live in
//! a `2^ell` subspace, reports always carry both choices next to the exact
//! covered-set fraction and the measured rate.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corefn::{low_mask, StateWidth};
use crate::error::{Error, Result};
use crate::node::{NodeConfig, Role};
use crate::params::{Budget, Mode, SystemParams};
use crate::tmdto::{TradeoffTable, COVERED_SET_CAP};

/// Two-sided 95% normal quantile.
pub const Z_95: f64 = 1.959_963_984_540_054;

pub const DEFAULT_SAFETY_FACTOR: f64 = 2.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Lemma1Prediction {
    pub attempts: u64,
    pub rows: u64,
    pub chain_len: u64,
    /// `log2 N`.
    pub space_bits: u32,
    /// `D M t / N` before clamping.
    pub raw: f64,
    /// `min(raw, 1)`.
    pub probability: f64,
    pub clamped: bool,
}

/// `D M t / 2^space_bits`, clamped to 1.
pub fn lemma1(attempts: u64, rows: u64, chain_len: u64, space_bits: u32) -> Lemma1Prediction {
    let space = 1u128 << space_bits;
    let product = (attempts as u128)
        .checked_mul(rows as u128)
        .and_then(|x| x.checked_mul(chain_len as u128));
    let (raw, clamped) = match product {
        // power-of-two divisor: exact whenever the numerator fits in 53 bits
        Some(p) => (p as f64 / space as f64, p > space),
        None => (attempts as f64 * rows as f64 * chain_len as f64 / space as f64, true),
    };
    Lemma1Prediction {
        attempts,
        rows,
        chain_len,
        space_bits,
        raw,
        probability: raw.min(1.0),
        clamped,
    }
}

/// Success probability of `attempts` inversions against one table, with `N`
/// chosen by `mode`.
pub fn predict_success(
    attempts: u64,
    rows: u64,
    chain_len: u64,
    mode: Mode,
    width: StateWidth,
    ell: u32,
) -> Result<Lemma1Prediction> {
    if attempts == 0 || rows == 0 || chain_len == 0 {
        return Err(Error::InvalidArgument(
            "attempts, rows and chain length must be positive".into(),
        ));
    }
    if ell == 0 || ell > width.bits() {
        return Err(Error::InvalidSuffixLength { ell, max: width.bits() });
    }
    let bits = match mode {
        Mode::Unconstrained => ell,
        Mode::Constrained => width.bits(),
    };
    Ok(lemma1(attempts, rows, chain_len, bits))
}

/// Coverage with chain collisions accounted for, `1 - exp(-M t / N)`.
pub fn collision_reference(rows: u64, chain_len: u64, space_bits: u32) -> f64 {
    let x = rows as f64 * chain_len as f64 / (1u128 << space_bits) as f64;
    -(-x).exp_m1()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SecurityConditionReport {
    /// `floor(Δ / (δ + t_max,H)) Σ_H M_i t_i`.
    pub lhs: f64,
    /// `floor(Δ / (δ + t_min,M)) Σ_M M_i t_i`.
    pub rhs: f64,
    pub margin: f64,
    pub factor: f64,
    pub holds: bool,
    pub honest_attempts: u64,
    pub malicious_attempts: u64,
}

fn pool_mass(pool: &[Budget]) -> u128 {
    pool.iter().map(|b| b.rows as u128 * b.chain_len as u128).sum()
}

fn check_pool(pool: &[Budget]) -> Result<()> {
    if pool.is_empty() {
        return Err(Error::EmptyPool);
    }
    if pool.iter().any(|b| b.chain_len == 0) {
        return Err(Error::InvalidArgument("chain lengths must be positive".into()));
    }
    Ok(())
}

/// Compares the honest pool's guaranteed work against the adversary's best
/// case; holds when the ratio exceeds `factor`.
pub fn security_condition(
    honest: &[Budget],
    malicious: &[Budget],
    params: &SystemParams,
    factor: f64,
) -> Result<SecurityConditionReport> {
    check_pool(honest)?;
    check_pool(malicious)?;
    let t_max = honest.iter().map(|b| b.chain_len).max().unwrap();
    let t_min = malicious.iter().map(|b| b.chain_len).min().unwrap();
    let honest_attempts = params.attempts_for(t_max);
    let malicious_attempts = params.attempts_for(t_min);
    let lhs = honest_attempts as f64 * pool_mass(honest) as f64;
    let rhs = malicious_attempts as f64 * pool_mass(malicious) as f64;
    let margin = if rhs == 0.0 {
        if lhs > 0.0 {
            f64::INFINITY
        } else {
            f64::NAN
        }
    } else {
        lhs / rhs
    };
    Ok(SecurityConditionReport {
        lhs,
        rhs,
        margin,
        factor,
        holds: margin > factor,
        honest_attempts,
        malicious_attempts,
    })
}

/// Wilson score interval for `hits` successes in `trials`.
pub fn wilson_interval(hits: u64, trials: u64, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = hits as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub trial: u64,
    pub challenge: u64,
    pub key: Option<u64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalEstimate {
    pub trials: u64,
    pub hits: u64,
    pub probability: f64,
    pub interval_low: f64,
    pub interval_high: f64,
}

impl EmpiricalEstimate {
    pub fn from_counts(hits: u64, trials: u64) -> Self {
        let (lo, hi) = wilson_interval(hits, trials, Z_95);
        EmpiricalEstimate {
            trials,
            hits,
            probability: if trials == 0 { 0.0 } else { hits as f64 / trials as f64 },
            interval_low: lo,
            interval_high: hi,
        }
    }

    pub fn contains(&self, p: f64) -> bool {
        (self.interval_low..=self.interval_high).contains(&p)
    }
}

/// Runs `trials` inversions on uniform challenges. Trial `i` draws its
/// challenge from word `i` of a ChaCha stream keyed by `seed`, so the result
/// does not depend on scheduling.
pub fn sample_trials(table: &TradeoffTable, trials: u64, seed: u64) -> Result<Vec<TrialOutcome>> {
    let base = ChaCha8Rng::seed_from_u64(seed);
    let mask = low_mask(table.spec().ell);
    (0..trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = base.clone();
            rng.set_word_pos(2 * trial as u128);
            let challenge = rng.next_u64() & mask;
            Ok(TrialOutcome {
                trial,
                challenge,
                key: table.invert(challenge)?.key,
            })
        })
        .collect()
}

pub fn empirical_success(table: &TradeoffTable, trials: u64, seed: u64) -> Result<EmpiricalEstimate> {
    let outcomes = sample_trials(table, trials, seed)?;
    let hits = outcomes.iter().filter(|o| o.key.is_some()).count() as u64;
    Ok(EmpiricalEstimate::from_counts(hits, trials))
}

/// Sweeps every `ell`-bit challenge.
pub fn exhaustive_success(table: &TradeoffTable) -> Result<EmpiricalEstimate> {
    let ell = table.spec().ell;
    if 1u128 << ell > COVERED_SET_CAP {
        return Err(Error::EnumerationTooLarge {
            entries: 1u128 << ell,
            cap: COVERED_SET_CAP,
        });
    }
    let hits = (0..1u64 << ell)
        .into_par_iter()
        .map(|c| table.invert(c).map(|o| o.found() as u64))
        .sum::<Result<u64>>()?;
    Ok(EmpiricalEstimate::from_counts(hits, 1 << ell))
}

/// Which choice of `N` lands nearer the measured value.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CloserSpace {
    Ell,
    N,
}

/// Per-table juxtaposition of predicted, exact and measured success.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Lemma1Section {
    pub node: u64,
    pub difficulty: u32,
    pub mode: Mode,
    pub rows: u64,
    pub chain_len: u64,
    /// Single-challenge prediction under the mode's own `N`.
    pub predicted: f64,
    /// `M t / 2^ell`.
    pub predicted_ell: f64,
    /// `M t / 2^n`.
    pub predicted_n: f64,
    pub per_round_attempts: u64,
    pub per_round: Lemma1Prediction,
    pub collision_reference: f64,
    /// Exact invertible fraction; constrained tables only.
    pub oracle: Option<f64>,
    pub covered: Option<usize>,
    /// Distinct end suffixes over `2^ell`: the rate the suffix lookup alone guarantees.
    pub suffix_floor: f64,
    pub empirical: EmpiricalEstimate,
    pub closer: CloserSpace,
}

pub fn lemma1_section(
    node: u64,
    table: &TradeoffTable,
    params: &SystemParams,
    trials: u64,
    seed: u64,
) -> Result<(Lemma1Section, Vec<TrialOutcome>)> {
    let spec = *table.spec();
    let width = table.width();
    let outcomes = sample_trials(table, trials, seed)?;
    let hits = outcomes.iter().filter(|o| o.key.is_some()).count() as u64;
    let empirical = EmpiricalEstimate::from_counts(hits, trials);

    let oracle_set = match spec.mode {
        Mode::Constrained if (table.len() as u128) * (spec.chain_len as u128) <= COVERED_SET_CAP => {
            Some(table.covered_set()?)
        }
        _ => None,
    };
    let oracle = oracle_set.as_ref().map(|s| s.fraction());
    let predicted_ell = lemma1(1, spec.rows, spec.chain_len, spec.ell).raw;
    let predicted_n = lemma1(1, spec.rows, spec.chain_len, width.bits()).raw;
    let reference = oracle.unwrap_or(empirical.probability);
    let closer = if (predicted_ell - reference).abs() <= (predicted_n - reference).abs() {
        CloserSpace::Ell
    } else {
        CloserSpace::N
    };
    let space_bits = match spec.mode {
        Mode::Unconstrained => spec.ell,
        Mode::Constrained => width.bits(),
    };
    let attempts = params.attempts_for(spec.chain_len);
    let section = Lemma1Section {
        node,
        difficulty: spec.difficulty,
        mode: spec.mode,
        rows: spec.rows,
        chain_len: spec.chain_len,
        predicted: lemma1(1, spec.rows, spec.chain_len, space_bits).probability,
        predicted_ell,
        predicted_n,
        per_round_attempts: attempts,
        per_round: lemma1(attempts, spec.rows, spec.chain_len, space_bits),
        collision_reference: collision_reference(spec.rows, spec.chain_len, spec.ell),
        oracle,
        covered: oracle_set.map(|s| s.len()),
        suffix_floor: table.distinct_end_suffixes() as f64 / (1u128 << spec.ell) as f64,
        empirical,
        closer,
    };
    Ok((section, outcomes))
}

/// Per-node costs in chain steps and table rows.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeComplexity {
    pub node: u64,
    pub difficulty: u32,
    pub preprocessing_time: f64,
    pub space: f64,
    /// `floor(Δ / (δ + t)) t` per slot.
    pub processing_time: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Pow,
    Pos,
    Tmdto,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub scheme: Scheme,
    pub time: f64,
    pub space: f64,
}

/// Time and space to reach success probability `P` on an `N`-point problem.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub space_size: f64,
    pub probability: f64,
    pub memory: f64,
    pub rows: Vec<ComparisonRow>,
    /// PoW time over the trade-off's time; equals `M`.
    pub time_reduction_vs_pow: f64,
    /// PoS space over the trade-off's space; equals `N P / M`.
    pub space_reduction_vs_pos: f64,
    /// Trade-off time over PoS time; the price paid for the space saving.
    pub time_increase_vs_pos: f64,
}

pub fn comparison_table(space_size: f64, probability: f64, memory: f64) -> Result<ComparisonTable> {
    if memory < 1.0 {
        return Err(Error::InvalidArgument("memory must be at least 1".into()));
    }
    let work = space_size * probability;
    let rows = vec![
        ComparisonRow {
            scheme: Scheme::Pow,
            time: work,
            space: 1.0,
        },
        ComparisonRow {
            scheme: Scheme::Pos,
            time: 1.0,
            space: work,
        },
        ComparisonRow {
            scheme: Scheme::Tmdto,
            time: work / memory,
            space: memory,
        },
    ];
    Ok(ComparisonTable {
        space_size,
        probability,
        memory,
        time_reduction_vs_pow: rows[0].time / rows[2].time,
        space_reduction_vs_pos: rows[1].space / rows[2].space,
        time_increase_vs_pos: rows[2].time / rows[1].time,
        rows,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComplexityReport {
    pub nodes: Vec<NodeComplexity>,
    /// `Σ_i floor(Δ / (δ + t_i)) t_i` at the reported difficulty.
    pub cumulative_processing: f64,
    /// `Σ_j Σ_i M_i^j` over every difficulty.
    pub cumulative_space: f64,
    pub comparison: ComparisonTable,
}

/// Recomputes complexities from the configuration. The comparison uses the
/// largest per-node memory at `difficulty` and the given success target.
pub fn complexity_report(
    params: &SystemParams,
    nodes: &[NodeConfig],
    difficulty: u32,
    probability: f64,
) -> Result<ComplexityReport> {
    let mut rows = Vec::new();
    for node in nodes {
        if let Some(b) = node.budget(difficulty) {
            rows.push(NodeComplexity {
                node: node.id,
                difficulty,
                preprocessing_time: b.rows as f64 * b.chain_len as f64,
                space: b.rows as f64,
                processing_time: (params.attempts_for(b.chain_len) * b.chain_len) as f64,
            });
        }
    }
    let cumulative_space = nodes
        .iter()
        .flat_map(|n| n.budgets.values())
        .filter(|b| !b.is_zero())
        .map(|b| b.rows as f64)
        .sum();
    let memory = rows.iter().map(|r| r.space).fold(1.0, f64::max);
    let space_size = (1u128 << params.solution_space_bits(difficulty)?) as f64;
    Ok(ComplexityReport {
        cumulative_processing: rows.iter().map(|r| r.processing_time).sum(),
        cumulative_space,
        nodes: rows,
        comparison: comparison_table(space_size, probability, memory)?,
    })
}

/// Budgets at `difficulty` for every participating node of `role`.
pub fn pool_budgets(nodes: &[NodeConfig], role: Role, difficulty: u32) -> Vec<Budget> {
    nodes
        .iter()
        .filter(|n| n.role == role)
        .filter_map(|n| n.budget(difficulty))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub lemma1: Vec<Lemma1Section>,
    /// Absent unless both pools have participants.
    pub theorem1: Option<SecurityConditionReport>,
    pub complexity: ComplexityReport,
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use proptest::prelude::*;
    use rand::RngCore;

    use super::*;
    use crate::params::test_params;
    use crate::tmdto::TableSpec;

    fn w(bits: u32) -> StateWidth {
        StateWidth::new(bits).unwrap()
    }

    #[test]
    fn predict_examples() {
        let p = predict_success(1, 1 << 10, 1 << 6, Mode::Unconstrained, w(32), 20).unwrap();
        assert_eq!(p.probability, 0.0625);
        assert!(!p.clamped);

        let p = predict_success(1, 1 << 10, 1 << 6, Mode::Constrained, w(32), 20).unwrap();
        assert_eq!(p.probability, 2f64.powi(-16));
        assert!((p.probability - 1.526e-5).abs() < 1e-8);

        let p = predict_success(32, 1 << 10, 1 << 6, Mode::Unconstrained, w(32), 20).unwrap();
        assert_eq!(p.raw, 2.0);
        assert_eq!(p.probability, 1.0);
        assert!(p.clamped);

        assert!(predict_success(0, 1, 1, Mode::Constrained, w(32), 20).is_err());
        assert!(predict_success(1, 1, 1, Mode::Constrained, w(16), 20).is_err());
    }

    #[test]
    fn lemma1_exact_at_boundary() {
        let p = lemma1(1, 1 << 10, 1 << 10, 20);
        assert_eq!(p.probability, 1.0);
        assert!(!p.clamped);
        assert!(lemma1(u64::MAX, u64::MAX, 2, 64).clamped);
    }

    fn params() -> SystemParams {
        let mut p = test_params(32, 20, Mode::Constrained);
        p.slot_ticks = 400;
        p.challenge_ticks = 10;
        p
    }

    #[test]
    fn security_examples() {
        let p = params();
        let pool = vec![Budget::new(1 << 10, 16); 2];
        let sym = security_condition(&pool, &pool, &p, 2.0).unwrap();
        assert_eq!(sym.margin, 1.0);
        assert!(!sym.holds);

        let big = vec![Budget::new(1 << 12, 16); 2];
        let scaled = security_condition(&big, &pool, &p, 2.0).unwrap();
        assert_eq!(scaled.margin, 4.0);
        assert!(scaled.holds);

        assert_eq!(security_condition(&[], &pool, &p, 2.0), Err(Error::EmptyPool));
        assert_eq!(security_condition(&pool, &[], &p, 2.0), Err(Error::EmptyPool));
    }

    #[test]
    fn halving_malicious_chain_with_zero_challenge_cost() {
        // same M*t mass, half the chain length: twice the attempts
        let mut p = params();
        p.challenge_ticks = 0;
        p.slot_ticks = 320;
        let honest = vec![Budget::new(1 << 10, 16)];
        let before = security_condition(&honest, &[Budget::new(1 << 10, 16)], &p, 2.0).unwrap();
        let after = security_condition(&honest, &[Budget::new(1 << 11, 8)], &p, 2.0).unwrap();
        assert_eq!(after.rhs, 2.0 * before.rhs);
        assert_eq!(after.margin, before.margin / 2.0);
    }

    #[test]
    fn wilson_known_values() {
        let (lo, hi) = wilson_interval(0, 10, Z_95);
        assert_eq!(lo, 0.0);
        assert!((hi - 0.277_53).abs() < 1e-4);
        let (lo, hi) = wilson_interval(50, 100, Z_95);
        assert!((lo - 0.403_83).abs() < 1e-4);
        assert!((hi - 0.596_17).abs() < 1e-4);
    }

    fn table(rows: u64, mode: Mode, n: u32, ell: u32) -> TradeoffTable {
        TradeoffTable::build(
            TableSpec {
                difficulty: 1,
                ell,
                rows,
                chain_len: 16,
                mode,
                seed: 77,
            },
            w(n),
        )
        .unwrap()
    }

    #[test]
    fn empty_table_never_succeeds() {
        let t = table(0, Mode::Constrained, 20, 12);
        let est = empirical_success(&t, 500, 1).unwrap();
        assert_eq!(est.hits, 0);
        assert_eq!(est.probability, 0.0);
    }

    #[test]
    fn exhaustive_sweep_equals_covered_fraction() {
        let t = table(128, Mode::Constrained, 20, 12);
        let est = exhaustive_success(&t).unwrap();
        let covered = t.covered_set().unwrap();
        assert_eq!(est.hits, covered.len() as u64);
        assert_eq!(est.probability, covered.fraction());
    }

    #[test]
    fn sampled_rate_brackets_covered_fraction() {
        let t = table(1 << 10, Mode::Constrained, 32, 20);
        let est = empirical_success(&t, 20_000, 5).unwrap();
        assert!(est.contains(t.covered_set().unwrap().fraction()));
    }

    #[test]
    fn trials_are_schedule_independent() {
        let t = table(64, Mode::Unconstrained, 20, 12);
        let a = sample_trials(&t, 300, 9).unwrap();
        let b = sample_trials(&t, 300, 9).unwrap();
        assert_eq!(a, b);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for o in &a[..5] {
            assert_eq!(o.challenge, rng.next_u64() & 0xFFF);
        }
    }

    #[test]
    fn comparison_examples() {
        let n = 2f64.powi(60);
        let c = comparison_table(n, 1.0, 2f64.powi(30)).unwrap();
        assert_eq!(c.time_reduction_vs_pow, 2f64.powi(30));
        assert_eq!(c.space_reduction_vs_pos, n / 2f64.powi(30));

        let one = comparison_table(n, 0.5, 1.0).unwrap();
        assert_eq!(one.rows[2].time, one.rows[0].time);

        let full = comparison_table(n, 0.25, n * 0.25).unwrap();
        assert_eq!(full.rows[2].time, 1.0);
        assert_eq!(full.rows[2].space, full.rows[1].space);
        assert!(comparison_table(n, 1.0, 0.0).is_err());
    }

    #[test]
    fn complexity_from_config() {
        let p = params();
        let nodes = vec![
            NodeConfig {
                id: 1,
                role: Role::Honest,
                budgets: BTreeMap::from([(1, Budget::new(1024, 16)), (2, Budget::new(10, 4))]),
                seed: 0,
            },
            NodeConfig {
                id: 2,
                role: Role::Malicious,
                budgets: BTreeMap::from([(1, Budget::new(0, 16))]),
                seed: 0,
            },
        ];
        let r = complexity_report(&p, &nodes, 1, 1.0).unwrap();
        assert_eq!(r.nodes.len(), 1);
        assert_eq!(r.nodes[0].preprocessing_time, 16384.0);
        assert_eq!(r.nodes[0].processing_time, 15.0 * 16.0);
        assert_eq!(r.cumulative_space, 1034.0);
        assert_eq!(r.comparison.memory, 1024.0);
        assert_eq!(r.comparison.space_size, 2f64.powi(32));
    }

    proptest! {
        #[test]
        fn prediction_linear(d in 1u64..64, m in 1u64..1 << 12, t in 1u64..1 << 8, k in 1u64..8) {
            let base = lemma1(d, m, t, 40).raw;
            prop_assert_eq!(lemma1(d * k, m, t, 40).raw, base * k as f64);
            prop_assert_eq!(lemma1(d, m * k, t, 40).raw, base * k as f64);
            prop_assert_eq!(lemma1(d, m, t * k, 40).raw, base * k as f64);
        }

        #[test]
        fn margin_scale_invariant(mh in 1u64..1 << 12, mm in 1u64..1 << 12, th in 1u64..64, tm in 1u64..64, k in 1u64..16) {
            let p = params();
            let h = [Budget::new(mh, th), Budget::new(mh + 1, th)];
            let m = [Budget::new(mm, tm)];
            let base = security_condition(&h, &m, &p, 2.0).unwrap();
            let hs = h.map(|b| Budget::new(b.rows * k, b.chain_len));
            let ms = m.map(|b| Budget::new(b.rows * k, b.chain_len));
            let scaled = security_condition(&hs, &ms, &p, 2.0).unwrap();
            if base.margin.is_finite() {
                prop_assert!((scaled.margin - base.margin).abs() <= 1e-12 * base.margin.abs());
            }
            // scaling one pool scales the margin
            let only = security_condition(&hs, &m, &p, 2.0).unwrap();
            if base.margin.is_finite() {
                prop_assert!((only.margin - base.margin * k as f64).abs() <= 1e-9 * only.margin);
            }
        }
    }
}
