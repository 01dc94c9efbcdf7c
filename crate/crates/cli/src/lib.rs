//! Batch driver for the spectral shape pipeline: clustering, encoding,
//! training, generation, evaluation and round-trip diagnostics over a shared
//! on-disk workspace.

use std::fmt;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub mod commands;
pub mod config;
pub mod container;
pub mod store;
pub mod workspace;

pub use config::{PipelineConfig, Profile};
pub use workspace::Workspace;

pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_DIVERGED: i32 = 3;

/// Bad invocation or configuration; maps to exit code 1.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

#[derive(Debug, Parser)]
#[command(name = "forge", version, about = "Spectral-domain 3D shape generation pipeline")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub global: GlobalArgs,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Pipeline configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Default values the configuration file is layered over.
    #[arg(long, global = true, value_enum, default_value_t = Profile::Desk)]
    pub profile: Profile,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Picks one representative mesh per cluster of the corpus.
    Cluster,
    /// Fits the spectral basis and writes normalized features.
    Encode(commands::encode::EncodeArgs),
    /// Trains the denoiser on the encoded features.
    Train,
    /// Samples features and extracts meshes.
    Generate(commands::generate::GenerateArgs),
    /// Compares generated meshes against a reference set.
    Evaluate(commands::evaluate::EvaluateArgs),
    /// Reconstructs one mesh with and without wavelet detail bands.
    Roundtrip(commands::roundtrip::RoundtripArgs),
}

pub fn run(cli: Cli) -> anyhow::Result<()> {
    let path = cli
        .global
        .config
        .ok_or_else(|| UsageError("--config <path> is required".into()))?;
    let mut cfg = PipelineConfig::load(&path, cli.global.profile)?;
    if let Some(seed) = cli.global.seed {
        cfg.seed = seed;
    }
    let ws = Workspace::new(&cfg.paths.workspace);
    match cli.command {
        Command::Cluster => commands::cluster::run(&cfg, &ws),
        Command::Encode(args) => commands::encode::run(&cfg, &ws, &args),
        Command::Train => commands::train::run(&cfg, &ws),
        Command::Generate(args) => commands::generate::run(&cfg, &ws, &args),
        Command::Evaluate(args) => commands::evaluate::run(&cfg, &ws, &args),
        Command::Roundtrip(args) => commands::roundtrip::run(&cfg, &ws, &args),
    }
}

/// Exit code for a failed command.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    for cause in err.chain() {
        if cause.is::<UsageError>() {
            return EXIT_USAGE;
        }
        if let Some(forge_core::Error::Diverged { .. }) = cause.downcast_ref::<forge_core::Error>() {
            return EXIT_DIVERGED;
        }
    }
    EXIT_DATA
}
