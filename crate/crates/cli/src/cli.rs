use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "secbeam", version, about = "Secure beamforming experiments with diffusion actor-critic agents")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train one agent and write its metrics, parameters, manifest and figures.
    Train(TrainArgs),
    /// Score a saved actor on fresh evaluation episodes.
    Eval(EvalArgs),
    /// Train several actor variants on paired seeds and tabulate the outcome.
    Compare(CompareArgs),
    /// Render figures or tables from metrics CSV files.
    Plot(PlotArgs),
    /// Time full training iterations per actor variant.
    Latency(LatencyArgs),
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides `master_seed`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides `actor_variant`.
    #[arg(long)]
    pub variant: Option<String>,
    /// Overrides the optimization paradigm.
    #[arg(long)]
    pub paradigm: Option<String>,
    /// Output directory; defaults to `runs/<config stem>/seed-<seed>`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Suppress per-epoch progress on stderr.
    #[arg(long)]
    pub quiet: bool,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Actor parameter file written by `train`.
    #[arg(long, required_unless_present = "zero_beamformer")]
    pub actor: Option<PathBuf>,
    /// Score the all-zero beamformer instead of an actor.
    #[arg(long, conflicts_with = "actor")]
    pub zero_beamformer: bool,
    /// Defaults to `final_eval_episodes` from the config.
    #[arg(long)]
    pub episodes: Option<usize>,
    /// Evaluation seed; defaults to the final-evaluation seed of `master_seed`.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub paradigm: Option<String>,
    /// Per-episode CSV output.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Comma-separated actor variants; the first is the reference.
    #[arg(long, value_delimiter = ',', required = true)]
    pub variants: Vec<String>,
    /// Defaults to the paradigm in the config.
    #[arg(long)]
    pub paradigm: Option<String>,
    #[arg(long, value_delimiter = ',', required = true)]
    pub seeds: Vec<u64>,
    /// Defaults to `runs/compare-<config stem>`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Trailing moving-average window for the learning curves.
    #[arg(long, default_value_t = 1)]
    pub smooth: usize,
    #[arg(long)]
    pub quiet: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PlotKind {
    /// Training reward against epoch, mean over files with a min-max band.
    Curves,
    /// Quartile box plot of evaluation rewards.
    Box,
    /// Markdown table of per-iteration seconds.
    Latency,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    /// Metrics CSV files (or per-episode evaluation CSVs for `box`). Files
    /// sharing a label are aggregated.
    #[arg(long, num_args = 1.., required = true)]
    pub metrics: Vec<PathBuf>,
    #[arg(long, value_enum)]
    pub kind: PlotKind,
    /// One label per file. By default `metrics.csv`/`eval.csv` take the
    /// nearest ancestor directory not named `seed-N`; other files take
    /// their stem.
    #[arg(long, value_delimiter = ',')]
    pub labels: Vec<String>,
    /// Output file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    pub smooth: usize,
    /// Figure title; defaults to one naming the plotted quantity.
    #[arg(long)]
    pub title: Option<String>,
}

#[derive(Debug, Args)]
pub struct LatencyArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Defaults to all four variants.
    #[arg(long, value_delimiter = ',')]
    pub variants: Vec<String>,
    #[arg(long, default_value_t = 20)]
    pub iterations: usize,
    /// Overrides `batch_size`.
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Markdown output; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Raw timings as JSON.
    #[arg(long)]
    pub json: Option<PathBuf>,
}
