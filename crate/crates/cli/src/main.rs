use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use tmdt_cli::commands::{self, Options};
use tmdt_cli::CliError;

#[derive(Parser)]
#[command(name = "tmdt", version, about = "Trade-off table consensus experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Experiment configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; falls back to $TMDTO_OUT_DIR, then the config, then ./out.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Replaces every seed in the configuration with ones derived from this value.
    #[arg(long)]
    seed: Option<u64>,
}

impl Common {
    fn options(&self, trials: Option<u64>) -> Options {
        Options {
            config: self.config.clone(),
            out: self.out.clone(),
            seed: self.seed,
            trials,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Precomputed table files.
    Tables {
        #[command(subcommand)]
        action: TablesAction,
    },
    /// Run the honest/malicious race and write round records and a summary.
    Simulate(Common),
    /// Compare predicted, exact and measured inversion success.
    Estimate {
        #[command(flatten)]
        common: Common,
        /// Random challenges per table.
        #[arg(long)]
        trials: Option<u64>,
    },
    /// Mine one block on genesis with a single node and print it.
    Mine {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        node: u64,
    },
    /// Re-validate every block of an exported chain.
    Verify {
        #[arg(long)]
        chain: PathBuf,
        #[arg(long)]
        config: PathBuf,
    },
    /// Re-render a JSON report as CSV.
    Report {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum TablesAction {
    /// Build one table file per node and difficulty.
    Build(Common),
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Tables {
            action: TablesAction::Build(common),
        } => {
            for path in commands::tables_build(&common.options(None))? {
                println!("{}", path.display());
            }
        }
        Command::Simulate(common) => {
            let out = commands::simulate(&common.options(None))?;
            let owner = out.tip_pool.map_or("genesis", |r| r.as_str());
            println!("canonical tip: {owner}");
            println!("{}", out.rounds_csv.display());
            println!("{}", out.blocks_csv.display());
            println!("{}", out.summary_json.display());
            println!("{}", out.chain.display());
        }
        Command::Estimate { common, trials } => {
            let out = commands::estimate(&common.options(trials))?;
            println!("{}", out.report_json.display());
            println!("{}", out.trials_csv.display());
        }
        Command::Mine { common, node } => match commands::mine(&common.options(None), node)? {
            (Some(block), attempts) => {
                println!("# solved after {attempts} attempts");
                println!("{}", block.to_record());
            }
            (None, attempts) => println!("# exhausted after {attempts} attempts"),
        },
        Command::Verify { chain, config } => {
            let n = commands::verify(&chain, &Options::new(config))?;
            println!("ok: {n} blocks");
        }
        Command::Report { input, out } => {
            println!("{}", commands::report(&input, out.as_deref())?.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
