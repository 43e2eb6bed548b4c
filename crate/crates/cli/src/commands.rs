use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde_json::Value;
use tmdt_core::analysis::{complexity_report, lemma1_section, pool_budgets, security_condition, EstimateReport};
use tmdt_core::corefn::mix64;
use tmdt_core::ledger::{parse_chain, replay, Block};
use tmdt_core::node::{mine_round, MiningResult, Role};
use tmdt_core::sim::{build_tables, run_simulation, summarize, Schedule};

use crate::config::{Experiment, ExperimentConfig};
use crate::CliError;

pub const OUT_DIR_ENV: &str = "TMDTO_OUT_DIR";

#[derive(Clone, Debug, Default)]
pub struct Options {
    pub config: PathBuf,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub trials: Option<u64>,
}

impl Options {
    pub fn new(config: impl Into<PathBuf>) -> Self {
        Options {
            config: config.into(),
            ..Default::default()
        }
    }

    pub fn load(&self) -> Result<Experiment, CliError> {
        let mut cfg = ExperimentConfig::load(&self.config)?;
        if let Some(seed) = self.seed {
            cfg.override_seed(seed);
        }
        if let Some(trials) = self.trials {
            cfg.run.trials = trials;
        }
        cfg.resolve()
    }

    /// `--out`, then `$TMDTO_OUT_DIR`, then the config's `out_dir`, then `./out`.
    pub fn out_dir(&self, exp: &Experiment) -> PathBuf {
        self.out
            .clone()
            .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
            .or_else(|| exp.raw.run.out_dir.clone())
            .unwrap_or_else(|| PathBuf::from("out"))
    }
}

/// Writes through a temporary file in the same directory and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| CliError::from(e.error))?;
    Ok(())
}

fn to_json<T: serde::Serialize>(value: &T) -> Result<Vec<u8>, CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Failed(e.to_string()))?;
    text.push('\n');
    Ok(text.into_bytes())
}

pub fn table_file_name(node: u64, difficulty: u32) -> String {
    format!("node{node}-j{difficulty}.tmt")
}

/// One `.tmt` per (node, difficulty) with a nonzero budget.
pub fn tables_build(opts: &Options) -> Result<Vec<PathBuf>, CliError> {
    let exp = opts.load()?;
    let dir = opts.out_dir(&exp);
    let tables = build_tables(&exp.params, &exp.nodes)?;
    let mut keys: Vec<_> = tables.keys().copied().collect();
    keys.sort_unstable();
    let mut written = Vec::with_capacity(keys.len());
    for key in keys {
        let path = dir.join(table_file_name(key.0, key.1));
        write_atomic(&path, &tables[&key].to_bytes())?;
        written.push(path);
    }
    Ok(written)
}

pub struct SimulateOutput {
    pub rounds_csv: PathBuf,
    pub blocks_csv: PathBuf,
    pub summary_json: PathBuf,
    pub chain: PathBuf,
    pub tip_pool: Option<Role>,
}

/// Runs the simulation and writes `rounds.csv` (per node), `blocks.csv` (per
/// round), `summary.json` and `chain.txt`.
pub fn simulate(opts: &Options) -> Result<SimulateOutput, CliError> {
    let exp = opts.load()?;
    let dir = opts.out_dir(&exp);
    let cfg = exp.sim_config();
    let tables = build_tables(&exp.params, &exp.nodes)?;
    let outcome = run_simulation(&cfg, &tables, Schedule::Parallel)?;
    let summary = summarize(&cfg, &outcome)?;

    let out = SimulateOutput {
        rounds_csv: dir.join("rounds.csv"),
        blocks_csv: dir.join("blocks.csv"),
        summary_json: dir.join("summary.json"),
        chain: dir.join("chain.txt"),
        tip_pool: summary.canonical_tip_pool,
    };
    write_atomic(&out.rounds_csv, outcome.rounds_csv().as_bytes())?;
    write_atomic(&out.blocks_csv, outcome.blocks_csv().as_bytes())?;
    write_atomic(&out.summary_json, &to_json(&summary)?)?;
    write_atomic(&out.chain, outcome.ledger.export_canonical().as_bytes())?;
    Ok(out)
}

pub struct EstimateOutput {
    pub report_json: PathBuf,
    pub trials_csv: PathBuf,
    pub report: EstimateReport,
}

/// Predicted, exact and measured success per table, the security condition
/// and the complexity rows; writes `estimate.json` and `trials.csv`.
pub fn estimate(opts: &Options) -> Result<EstimateOutput, CliError> {
    let exp = opts.load()?;
    let dir = opts.out_dir(&exp);
    let j = exp.difficulty;
    let run = &exp.raw.run;

    let mut sections = Vec::new();
    let mut csv = String::from("node,trial,challenge,found,key\n");
    for node in &exp.nodes {
        let Some(table) = node.build_table(&exp.params, j)? else {
            continue;
        };
        let (section, trials) = lemma1_section(
            node.id,
            &table,
            &exp.params,
            run.trials,
            mix64(run.trial_seed ^ node.id),
        )?;
        for t in trials {
            let _ = writeln!(
                csv,
                "{},{},{:x},{},{}",
                node.id,
                t.trial,
                t.challenge,
                t.key.is_some() as u8,
                t.key.map(|k| format!("{k:x}")).unwrap_or_default()
            );
        }
        sections.push(section);
    }

    let honest = pool_budgets(&exp.nodes, Role::Honest, j);
    let malicious = pool_budgets(&exp.nodes, Role::Malicious, j);
    let theorem1 = if honest.is_empty() || malicious.is_empty() {
        None
    } else {
        Some(security_condition(&honest, &malicious, &exp.params, run.safety_factor)?)
    };
    let report = EstimateReport {
        lemma1: sections,
        theorem1,
        complexity: complexity_report(&exp.params, &exp.nodes, j, run.target_probability)?,
    };

    let out = EstimateOutput {
        report_json: dir.join("estimate.json"),
        trials_csv: dir.join("trials.csv"),
        report,
    };
    write_atomic(&out.report_json, &to_json(&out.report)?)?;
    write_atomic(&out.trials_csv, csv.as_bytes())?;
    Ok(out)
}

/// One node, one round, on genesis. Returns the solved block, if any.
pub fn mine(opts: &Options, node_id: u64) -> Result<(Option<Block>, u64), CliError> {
    let exp = opts.load()?;
    let node = exp
        .node(node_id)
        .ok_or_else(|| CliError::Config(format!("no node with id {node_id}")))?;
    let j = exp.difficulty;
    let table = node.build_table(&exp.params, j)?;
    let genesis = Block::genesis();
    let base = mix64(exp.raw.run.tx_stream_seed ^ node.id);
    let txs: Vec<u64> = (0..exp.raw.run.txs_per_block as u64)
        .map(|i| mix64(base ^ mix64(i)))
        .collect();
    let outcome = mine_round(node, table.as_ref(), &genesis, &txs, &exp.params, j)?;
    Ok(match outcome.result {
        MiningResult::Solved(block) => (Some(block), outcome.attempts_used),
        MiningResult::Exhausted => (None, outcome.attempts_used),
    })
}

/// Replays an exported chain from genesis. Returns the number of blocks
/// checked; the first rejected block fails with its height.
pub fn verify(chain: &Path, opts: &Options) -> Result<usize, CliError> {
    let exp = opts.load()?;
    let text = std::fs::read_to_string(chain)?;
    let blocks = parse_chain(&text).map_err(|e| CliError::Failed(e.to_string()))?;
    let count = blocks.len();
    replay(&exp.params, blocks).map_err(|(index, height, reason)| {
        CliError::Failed(format!("block {index} at height {height} rejected: {reason}"))
    })?;
    Ok(count)
}

/// Flattens a JSON report into `path,value` rows.
pub fn flatten_json(value: &Value) -> String {
    fn walk(prefix: &str, v: &Value, out: &mut String) {
        match v {
            Value::Object(map) => {
                for (k, child) in map {
                    let p = if prefix.is_empty() {
                        k.clone()
                    } else {
                        format!("{prefix}.{k}")
                    };
                    walk(&p, child, out);
                }
            }
            Value::Array(items) => {
                for (i, child) in items.iter().enumerate() {
                    walk(&format!("{prefix}[{i}]"), child, out);
                }
            }
            Value::String(s) => {
                let _ = writeln!(out, "{prefix},{s}");
            }
            other => {
                let _ = writeln!(out, "{prefix},{other}");
            }
        }
    }
    let mut out = String::from("path,value\n");
    walk("", value, &mut out);
    out
}

/// Re-renders a JSON report as CSV next to it, or into `out` when given.
pub fn report(input: &Path, out: Option<&Path>) -> Result<PathBuf, CliError> {
    let text = std::fs::read_to_string(input)?;
    let value: Value = serde_json::from_str(&text)
        .map_err(|e| CliError::Failed(format!("{}: line {}: {e}", input.display(), e.line())))?;
    let stem = input.file_stem().and_then(|s| s.to_str()).unwrap_or("report");
    let dir = out
        .map(Path::to_path_buf)
        .or_else(|| input.parent().map(Path::to_path_buf))
        .unwrap_or_default();
    let path = dir.join(format!("{stem}.csv"));
    write_atomic(&path, flatten_json(&value).as_bytes())?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flatten_nested() {
        let v: Value = serde_json::json!({"a": {"b": 1, "c": [true, null]}, "d": "x"});
        assert_eq!(flatten_json(&v), "path,value\na.b,1\na.c[0],true\na.c[1],null\nd,x\n");
    }

    #[test]
    fn atomic_write_replaces() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sub/file.txt");
        write_atomic(&path, b"one").unwrap();
        write_atomic(&path, b"two").unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), b"two");
        assert_eq!(std::fs::read_dir(dir.path().join("sub")).unwrap().count(), 1);
    }
}
