//! Thin pipeline CLI over the library.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use metaexp::cli::{
    cmd_analyze, cmd_cluster, cmd_design, cmd_embed, cmd_metastudy, cmd_report, cmd_simulate,
    error_line, exit_code_for, CmdContext, PipelineConfig, EXIT_USAGE,
};

#[derive(Parser)]
#[command(
    name = "metaexp",
    about = "Demand-embedding clustering, cluster-randomized experiment design, \
             and interference-bias estimation, with a marketplace simulator",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Pipeline config file (key=value lines).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Master seed; overrides the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads for parallel stages.
    #[arg(long, global = true, default_value_t = 1)]
    workers: usize,

    /// Output directory for artifacts; overrides the config file.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Train listing demand embeddings from search sessions.
    Embed,
    /// Build the partition tree and cut clusters at the size threshold.
    Cluster,
    /// Stratify clusters and randomize meta-arms and treatments.
    Design,
    /// Generate a simulated marketplace and produce outcomes.
    Simulate,
    /// Estimate arm-level and joint models from outcomes and a design.
    Analyze,
    /// Run the full Monte-Carlo meta-study.
    Metastudy,
    /// Render a text report from analysis artifacts.
    Report {
        /// Directory holding the analysis artifacts (defaults to --out).
        #[arg(long)]
        artifacts: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> metaexp::Result<()> {
    let mut config = match &cli.config {
        Some(path) => PipelineConfig::from_file(path)?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
        config.sim.seed = seed;
    }
    let out_dir = cli
        .out
        .clone()
        .or_else(|| config.out.clone())
        .unwrap_or_else(|| PathBuf::from("."));
    let ctx = CmdContext { config, out_dir, workers: cli.workers.max(1) };

    match cli.command {
        Command::Embed => cmd_embed(&ctx),
        Command::Cluster => cmd_cluster(&ctx),
        Command::Design => cmd_design(&ctx),
        Command::Simulate => cmd_simulate(&ctx),
        Command::Analyze => cmd_analyze(&ctx),
        Command::Metastudy => cmd_metastudy(&ctx),
        Command::Report { artifacts } => {
            let dir = artifacts.unwrap_or_else(|| ctx.out_dir.clone());
            let body = cmd_report(&ctx, &dir)?;
            print!("{body}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap renders help/version through the same error path.
            if e.use_stderr() {
                eprint!("{e}");
                return ExitCode::from(EXIT_USAGE as u8);
            }
            print!("{e}");
            return ExitCode::SUCCESS;
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(error) => {
            eprintln!("{}", error_line(&error));
            ExitCode::from(exit_code_for(&error) as u8)
        }
    }
}
