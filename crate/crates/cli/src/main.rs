mod commands;
mod config;
mod serve;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use levelforge_core::render::RenderMode;
use levelforge_core::Error;

use crate::config::RunConfig;

#[derive(Debug, Parser)]
#[command(
    name = "levelforge",
    version,
    about = "Blend tile-based game levels through a VAE latent space"
)]
pub struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write the deterministic stand-in reference corpus.
    MakeCorpus,
    /// Build an embedding table over the tile alphabet.
    Table(TableArgs),
    /// Segment and split a level corpus into an archive.
    Prepare(PrepareArgs),
    /// Train a model on an archive's training split.
    Train(TrainArgs),
    /// Decode random samples from the latent prior.
    Generate(GenerateArgs),
    /// Interpolate between two archived segments.
    Blend(BlendArgs),
    /// Compute metric and playability reports for a manifest.
    Eval(EvalArgs),
    /// Render manifest or archive segments.
    Render(RenderArgs),
    /// Serve the explorer API.
    Serve(ServeArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum TableKind {
    OneHot,
    Synth,
}

#[derive(Debug, Args)]
pub struct TableArgs {
    #[arg(long, value_enum, default_value = "one-hot")]
    pub kind: TableKind,
    /// Vector length of a synthetic table.
    #[arg(long, default_value_t = 32)]
    pub dim: usize,
    /// Tile mapping file (defaults to the built-in catalog).
    #[arg(long)]
    pub mapping: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PrepareArgs {
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    #[arg(long)]
    pub mapping: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum VariantArg {
    Fc,
    Cnn,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub archive: Option<PathBuf>,
    #[arg(long)]
    pub table: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "fc")]
    pub variant: VariantArg,
    /// Dense hidden widths, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub widths: Option<Vec<usize>>,
    #[arg(long)]
    pub latent: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Write an intermediate checkpoint every N epochs.
    #[arg(long)]
    pub checkpoint_every: Option<usize>,
}

#[derive(Debug, Args)]
pub struct RenderOpts {
    #[arg(long, value_enum)]
    pub render: Option<RenderArg>,
    /// Pixels per tile for image renders.
    #[arg(long)]
    pub scale: Option<u32>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum RenderArg {
    Text,
    Image,
    None,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long)]
    pub table: Option<PathBuf>,
    #[arg(short, long, default_value_t = 1000)]
    pub n: usize,
    #[command(flatten)]
    pub render: RenderOpts,
}

#[derive(Debug, Args)]
pub struct BlendArgs {
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long)]
    pub table: Option<PathBuf>,
    #[arg(long)]
    pub archive: Option<PathBuf>,
    #[arg(long)]
    pub a: String,
    #[arg(long)]
    pub b: String,
    #[arg(long, default_value_t = 11)]
    pub steps: usize,
    /// Spherical instead of linear interpolation.
    #[arg(long)]
    pub slerp: bool,
    #[command(flatten)]
    pub render: RenderOpts,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub archive: Option<PathBuf>,
    #[arg(long)]
    pub metric_sets: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    #[arg(long, conflicts_with = "archive")]
    pub manifest: Option<PathBuf>,
    #[arg(long)]
    pub archive: Option<PathBuf>,
    /// Restrict to these segment ids.
    #[arg(long)]
    pub id: Vec<String>,
    #[arg(long)]
    pub table: Option<PathBuf>,
    #[command(flatten)]
    pub render: RenderOpts,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long)]
    pub table: Option<PathBuf>,
    #[arg(long)]
    pub archive: Option<PathBuf>,
    #[arg(long, default_value = "127.0.0.1:7878")]
    pub addr: String,
}

impl From<RenderArg> for Option<RenderMode> {
    fn from(r: RenderArg) -> Self {
        match r {
            RenderArg::Text => Some(RenderMode::Text),
            RenderArg::Image => Some(RenderMode::Image),
            RenderArg::None => None,
        }
    }
}

/// Failure reported on stderr as one JSON line.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub kind: String,
    pub message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e.root() {
            Error::NonFiniteLoss { .. } | Error::NonFinite(_) => 3,
            _ => 2,
        };
        Failure {
            code,
            kind: e.kind().to_string(),
            message: e.to_string(),
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("LEVELFORGE_LOG", "warn")).init();
    let cli = Cli::parse();
    let result = RunConfig::load_opt(cli.config.as_deref())
        .map_err(Failure::from)
        .and_then(|cfg| commands::run(&cli, &cfg));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let line = serde_json::json!({"level": "error", "kind": f.kind, "message": f.message});
            eprintln!("{line}");
            ExitCode::from(f.code)
        }
    }
}

impl RunConfig {
    fn load_opt(path: Option<&std::path::Path>) -> levelforge_core::Result<Self> {
        path.map_or_else(|| Ok(Self::default()), Self::load)
    }
}
