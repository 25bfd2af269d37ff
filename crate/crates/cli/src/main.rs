use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use credfuse::eval::FeatureSubset;
use credfuse_cli::config::{parse_subset, ModelFamily};
use credfuse_cli::{stages, CliError, CliResult, RunConfig, RunContext};

#[derive(Parser)]
#[command(
    name = "credfuse",
    version,
    about = "Loan default models over structured features and assessment text",
    long_about = "Runs a reproducible modelling pipeline: synthetic data, feature \
                  preparation, three model families (elastic-net logistic regression, \
                  random forest, neural) on three feature subsets (text, structured, \
                  combined), evaluation and explanation. One TOML config and one \
                  global seed determine every artifact."
)]
struct Cli {
    /// TOML run configuration
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Override the config's global seed
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Override the config's artifact directory
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Worker threads; results do not depend on this
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the synthetic loan dataset
    Synth,
    /// Fit transforms on the training split and encode every split
    Prep,
    /// Train model families on feature subsets; defaults to all nine cells
    Train {
        /// Restrict to one family: lr, rf or dl
        #[arg(long, value_name = "FAMILY")]
        model: Option<String>,
        /// Restrict to one subset: text, structured or combined
        #[arg(long, value_name = "SUBSET")]
        subset: Option<String>,
    },
    /// Score every split; write predictions, the metric grid and curves
    Evaluate,
    /// Permutation importance, uncertain cases and word attributions
    Explain,
    /// Render the consolidated markdown report
    Report,
    /// Run every stage in order
    Run,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn execute(cli: Cli) -> CliResult<()> {
    if let Some(threads) = cli.threads {
        if threads == 0 {
            return Err(CliError::validation("--threads must be at least 1"));
        }
        let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    }
    let config_path = cli
        .config
        .ok_or_else(|| CliError::validation("--config <FILE> is required"))?;
    let mut config = RunConfig::load(&config_path)?;
    config.apply_overrides(cli.seed, cli.out);
    let ctx = RunContext::new(config)?;

    match cli.command {
        Command::Synth => stages::synth::run(&ctx),
        Command::Prep => stages::prep::run(&ctx),
        Command::Train { model, subset } => {
            let families = match model {
                Some(name) => vec![ModelFamily::parse(&name).map_err(CliError::validation)?],
                None => ModelFamily::ALL.to_vec(),
            };
            let subsets = match subset {
                Some(name) => vec![parse_subset(&name).map_err(CliError::validation)?],
                None => FeatureSubset::ALL.to_vec(),
            };
            stages::train::run(&ctx, &families, &subsets)
        }
        Command::Evaluate => stages::evaluate::run(&ctx),
        Command::Explain => stages::explain::run(&ctx),
        Command::Report => stages::report::run(&ctx),
        Command::Run => {
            stages::synth::run(&ctx)?;
            stages::prep::run(&ctx)?;
            stages::train::run(&ctx, &ModelFamily::ALL, &FeatureSubset::ALL)?;
            stages::evaluate::run(&ctx)?;
            stages::explain::run(&ctx)?;
            stages::report::run(&ctx)
        }
    }
}
