//! Command-line front end for the Monte-Carlo harness.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use swan_core::experiments::{
    run_and_write,
    spec::{config_sets_key, parse_list},
    validate::run_validation,
    ExperimentSpec, Family,
};
use swan_core::{Result, SwanError};

#[derive(Parser, Debug)]
#[command(
    name = "swan",
    version,
    about = "Tagged-pilot failure detection experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the experiment described by a config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output CSV; rows are appended.
        #[arg(long, default_value = "results.csv")]
        out: PathBuf,
        /// Overrides the config seed and SWAN_SEED.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        trials: Option<usize>,
        /// Worker threads; 0 uses every core.
        #[arg(long, default_value_t = 0)]
        parallelism: usize,
        /// Comma-separated transmit powers in dB.
        #[arg(long = "P-dB", allow_hyphen_values = true)]
        p_db: Option<String>,
        /// Comma-separated pilot lengths.
        #[arg(long = "T")]
        t: Option<String>,
        /// Comma-separated segment counts.
        #[arg(long = "M")]
        m: Option<String>,
    },
    /// Run the canned experiment families.
    Figures {
        #[arg(long, value_enum, default_value_t = Which::All)]
        which: Which,
        #[arg(long, default_value_t = swan_core::experiments::DEFAULT_TRIALS)]
        trials: usize,
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory; one `figN.csv` per family.
        #[arg(long, default_value = ".")]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        parallelism: usize,
    },
    /// Run the invariant suite.
    Validate,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum Which {
    #[value(name = "2")]
    Two,
    #[value(name = "3")]
    Three,
    #[value(name = "4")]
    Four,
    All,
}

/// Seed precedence: flag, then `SWAN_SEED`, then the given fallback.
fn resolve_seed(flag: Option<u64>, fallback: u64) -> Result<u64> {
    if let Some(seed) = flag {
        return Ok(seed);
    }
    match std::env::var("SWAN_SEED") {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| SwanError::InvalidConfig(format!("SWAN_SEED is not an integer: `{v}`"))),
        Err(_) => Ok(fallback),
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run {
            config,
            out,
            seed,
            trials,
            parallelism,
            p_db,
            t,
            m,
        } => {
            let text = std::fs::read_to_string(&config).map_err(|source| SwanError::Io {
                path: config.clone(),
                source,
            })?;
            let has_seed = config_sets_key(&text, "seed");
            let mut spec = ExperimentSpec::from_config_str(&text)?;
            // A seed in the config file counts as explicit; SWAN_SEED only
            // fills in when neither the flag nor the file sets one.
            spec.seed = match seed {
                Some(s) => s,
                None if has_seed => spec.seed,
                None => resolve_seed(None, spec.seed)?,
            };
            if let Some(n) = trials {
                spec.trials = n;
            }
            if let Some(v) = p_db {
                spec.power_db = parse_list(&v)?;
            }
            if let Some(v) = t {
                spec.pilot_lengths = parse_list(&v)?;
            }
            if let Some(v) = m {
                spec.segment_counts = parse_list(&v)?;
            }
            spec.validate()?;
            let output = run_and_write(&spec, parallelism, &out)?;
            eprintln!(
                "wrote {} rows to {}",
                output.table.rows.len(),
                out.display()
            );
        }
        Command::Figures {
            which,
            trials,
            seed,
            out,
            parallelism,
        } => {
            let seed = resolve_seed(seed, 0)?;
            let families: Vec<Family> = match which {
                Which::Two => vec![Family::VsPilot],
                Which::Three => vec![Family::VsSegments],
                Which::Four => vec![Family::VsPower],
                Which::All => Family::ALL.to_vec(),
            };
            for family in families {
                let spec = family.spec(trials, seed);
                let path = out.join(format!("{}.csv", family.name()));
                let output = run_and_write(&spec, parallelism, &path)?;
                eprintln!(
                    "wrote {} rows to {}",
                    output.table.rows.len(),
                    path.display()
                );
            }
        }
        Command::Validate => {
            let outcomes = run_validation();
            let failed = outcomes.iter().filter(|c| !c.passed).count();
            for c in &outcomes {
                println!(
                    "{} {}: {}",
                    if c.passed { "PASS" } else { "FAIL" },
                    c.name,
                    c.detail
                );
            }
            if failed > 0 {
                return Err(SwanError::InvalidConfig(format!(
                    "{failed} invariant check(s) failed"
                )));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("swan: {e}");
            ExitCode::FAILURE
        }
    }
}
