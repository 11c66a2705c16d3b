use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use stylodrift_cli::config::RunConfig;
use stylodrift_cli::run::Run;
use stylodrift_cli::{stages, CliError};

#[derive(Debug, Parser)]
#[command(name = "stylodrift", version, about = "Stylistic drift pipeline")]
struct Args {
    /// JSON run configuration; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output root, overriding the configured one.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Overrides the main seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for parallel stages.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Run directory name under the output root; defaults to a UTC timestamp.
    #[arg(long, global = true)]
    run_id: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// Filter, sample and split the corpus by author
    Ingest,
    /// Stylometric features and AI-likeness per document
    Features,
    /// Per-author post minus pre vectors, winsorized and standardized
    Deltas,
    /// PELT breakpoints on corpus-wide feature series
    Changepoint,
    /// HDBSCAN archetypes with bootstrap and permutation checks
    Cluster,
    /// Fixed-effects regressions, partial correlation, effect size
    Stats,
    /// Archetype map, profiles and annotated time series
    Report,
    /// Synthetic corpus, scorer records and planted truth
    Synth,
    /// Every stage in order, generating synth data when no inputs are configured
    All,
}

fn execute(args: Args) -> Result<(), CliError> {
    let mut config = match &args.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(out) = args.out {
        config.out_dir = out;
    }
    if let Some(seed) = args.seed {
        config.seeds.main = seed;
    }
    if let Some(jobs) = args.jobs {
        if jobs == 0 {
            return Err(CliError::Config("--jobs must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| CliError::Config(e.to_string()))?;
    }
    let run_id = args
        .run_id
        .unwrap_or_else(|| chrono::Utc::now().format("%Y%m%dT%H%M%SZ").to_string());
    let run = Run::open(config, &run_id)?;
    log::info!("run directory {}", run.dir.display());
    match args.command {
        Command::Ingest => stages::ingest(&run),
        Command::Features => stages::features(&run),
        Command::Deltas => stages::deltas(&run),
        Command::Changepoint => stages::changepoint(&run),
        Command::Cluster => stages::cluster(&run),
        Command::Stats => stages::stats(&run),
        Command::Report => stages::report(&run),
        Command::Synth => stages::synth(&run),
        Command::All => stages::all(&run),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("STYLO_LOG", "warn")).init();
    match execute(Args::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
