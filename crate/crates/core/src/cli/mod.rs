//! Command-line surface: `editioner <command> [--long-flags]`.
//!
//! Every value may also come from a JSON file passed with `--config`; flags
//! take precedence over the file. Exit codes: 0 success, 2 configuration
//! error, 3 data error, 4 I/O error.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use editioner::{Error, Result};

mod commands;

#[derive(Debug, Parser)]
#[command(name = "editioner", version, about = "Build and apply concept-subspace editions of prompt embeddings")]
pub struct Cli {
    /// JSON file supplying defaults for any flag.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a template prompt corpus (optionally a concept or evaluation subset).
    GenPrompts(GenPromptsArgs),
    /// Fit the global dimensionality reducer.
    BuildReducer(BuildReducerArgs),
    /// Fit a concept subspace.
    BuildSubspace(BuildSubspaceArgs),
    /// Project embeddings into a concept subspace.
    Project(ProjectArgs),
    /// Embedding-level diagnostics.
    Diagnose(DiagnoseArgs),
    /// Linear path between two projected embeddings.
    Interpolate(InterpolateArgs),
    /// Move a projected embedding along one principal axis.
    Traverse(TraverseArgs),
}

#[derive(Debug, Args)]
pub struct GenPromptsArgs {
    /// Word-list JSON; defaults to the bundled table.
    #[arg(long)]
    pub wordlist: Option<PathBuf>,
    /// Keep prompts containing this concept, as slot=word.
    #[arg(long)]
    pub concept: Option<String>,
    /// Sample the evaluation set for --concept instead.
    #[arg(long)]
    pub eval: bool,
    #[arg(long)]
    pub per_category: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Also write the prompts with the concept slot replaced by the concept word.
    #[arg(long)]
    pub replaced_out: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ChunkArgs {
    /// Rows per streaming read.
    #[arg(long, env = "EDITIONER_CHUNK_ROWS")]
    pub chunk_rows: Option<usize>,
}

#[derive(Debug, Args)]
pub struct BuildReducerArgs {
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    #[arg(long)]
    pub target_dim: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub chunk: ChunkArgs,
}

#[derive(Debug, Args)]
pub struct BuildSubspaceArgs {
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    /// Reduce the embeddings with this reducer first.
    #[arg(long)]
    pub reducer: Option<PathBuf>,
    #[arg(long)]
    pub concept: Option<String>,
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub chunk: ChunkArgs,
}

#[derive(Debug, Args)]
pub struct ProjectArgs {
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    #[arg(long)]
    pub subspace: Option<PathBuf>,
    /// Reduce inputs first and lift outputs back to the ambient space.
    #[arg(long)]
    pub reducer: Option<PathBuf>,
    /// compensated | naive
    #[arg(long)]
    pub mode: Option<String>,
    /// Fail when any row is orthogonal to the subspace.
    #[arg(long)]
    pub strict: bool,
    /// Drop orthogonal rows instead of writing zeros.
    #[arg(long)]
    pub exclude_orthogonal: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub chunk: ChunkArgs,
}

#[derive(Debug, Args)]
pub struct DiagnoseArgs {
    #[command(subcommand)]
    pub which: Diagnose,
}

#[derive(Debug, Subcommand)]
pub enum Diagnose {
    /// Distance-to-origin statistics.
    Shell {
        #[arg(long)]
        embeddings: Option<PathBuf>,
        /// Also write a CSV histogram of the norms.
        #[arg(long)]
        histogram: Option<PathBuf>,
        #[arg(long, default_value_t = 50)]
        bins: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Cosine distances of inputs and projections to replaced prompts.
    Similarity {
        #[arg(long)]
        inputs: Option<PathBuf>,
        #[arg(long)]
        projected: Option<PathBuf>,
        #[arg(long)]
        replaced: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Cumulative explained-variance curve of a stored spectrum.
    Evr {
        #[arg(long)]
        spectrum: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct InterpolateArgs {
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    #[arg(long)]
    pub subspace: Option<PathBuf>,
    #[arg(long)]
    pub reducer: Option<PathBuf>,
    #[arg(long)]
    pub from_row: usize,
    #[arg(long)]
    pub to_row: usize,
    #[arg(long, default_value_t = 5)]
    pub steps: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TraverseArgs {
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    #[arg(long)]
    pub subspace: Option<PathBuf>,
    #[arg(long)]
    pub reducer: Option<PathBuf>,
    #[arg(long)]
    pub row: usize,
    #[arg(long)]
    pub component: usize,
    /// Comma-separated offsets, e.g. -2,-1,0,1,2
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
    pub offsets: Vec<f64>,
    /// Interpret offsets as multiples of the component's standard deviation.
    #[arg(long)]
    pub sigma_units: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Values that may be supplied through `--config`.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub corpus: Option<PathBuf>,
    pub wordlist: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    pub reducer: Option<PathBuf>,
    pub subspace: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub concept: Option<String>,
    pub threshold: Option<f64>,
    pub target_dim: Option<usize>,
    pub per_category: Option<usize>,
    pub seed: Option<u64>,
    pub mode: Option<String>,
    pub chunk_rows: Option<usize>,
}

impl PipelineConfig {
    fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }
}

/// Flag value, else config value, else an error naming the flag.
fn required<T>(flag: Option<T>, config: Option<T>, name: &str) -> Result<T> {
    flag.or(config).ok_or_else(|| Error::Config(format!("missing --{name}")))
}

fn existing(path: PathBuf) -> Result<PathBuf> {
    if path.exists() {
        Ok(path)
    } else {
        Err(Error::Config(format!("input {} does not exist", path.display())))
    }
}

pub fn run(cli: Cli) -> Result<()> {
    let config = match &cli.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    commands::dispatch(cli.command, config)
}
