//! `imcprompt` command-line interface.

mod commands;
mod config;
mod manifest;

use std::fmt::Display;
use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use imcprompt::data::LabelKind;
use imcprompt::data::{SplitFractions, Stratify};
use imcprompt::evaluation::SweepAxis;
use imcprompt::prompting::{RankWindow, Task};
use imcprompt::ranking::{Backend, ExpressionMetric, NeighborScope, SpatialMetric};
use imcprompt::refclass::{Combine, Weighting};

use crate::config::RunConfig;

fn parse<T>(s: &str) -> Result<T, String>
where
    T: FromStr,
    T::Err: Display,
{
    s.parse().map_err(|e: T::Err| e.to_string())
}

#[derive(Debug, Parser)]
#[command(
    name = "imcprompt",
    version,
    about = "Spatial cell-sentence prompt corpora and reference classifiers for IMC data"
)]
pub struct Cli {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads (output does not depend on this).
    #[arg(long, global = true, env = "IMCPROMPT_THREADS")]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate a table + panel and write a canonical dataset directory.
    Ingest(IngestArgs),
    /// Assign cells to train/validation/test.
    Split(SplitCmd),
    /// Export neighbor rankings (and optionally a dense matrix).
    Rank(RankArgs),
    /// Encode every cell as a sentence.
    Sentences(SentencesArgs),
    /// Build the prompt corpus.
    Prompts(PromptsArgs),
    /// Run the reference classifier on held-out cells of one split.
    Classify(ClassifyArgs),
    /// Seed-averaged evaluation report.
    Eval(EvalArgs),
    /// Evaluate one report per value along an axis.
    Sweep(SweepArgs),
    /// Generate a synthetic dataset.
    Synth(SynthArgs),
    /// Summarize a corpus file.
    Stats(StatsArgs),
}

#[derive(Debug, Args)]
pub struct DatasetArg {
    /// Dataset directory (cells.csv, panel.txt, optional schema.toml).
    #[arg(long)]
    pub dataset: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct OutArg {
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Default, Args)]
pub struct MetricArgs {
    #[arg(long, value_parser = parse::<ExpressionMetric>)]
    pub expression_metric: Option<ExpressionMetric>,
    #[arg(long, value_parser = parse::<SpatialMetric>)]
    pub spatial_metric: Option<SpatialMetric>,
    #[arg(long, value_parser = parse::<NeighborScope>)]
    pub scope: Option<NeighborScope>,
    #[arg(long, value_parser = parse::<Backend>)]
    pub backend: Option<Backend>,
    #[arg(long)]
    pub arcsinh_cofactor: Option<f64>,
}

#[derive(Debug, Default, Args)]
pub struct SplitArgs {
    /// Existing split file; conflicts with the flags that would compute one.
    #[arg(long, conflicts_with_all = ["fractions", "stratify", "seed"])]
    pub split: Option<PathBuf>,
    /// train,validation,test
    #[arg(long, value_parser = parse::<SplitFractions>)]
    pub fractions: Option<SplitFractions>,
    #[arg(long, value_parser = parse::<Stratify>)]
    pub stratify: Option<Stratify>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Default, Args)]
pub struct ClassifierArgs {
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long, value_parser = parse::<Weighting>)]
    pub weighting: Option<Weighting>,
    #[arg(long, value_parser = parse::<Combine>)]
    pub combine: Option<Combine>,
    #[arg(long, value_parser = parse::<LabelKind>)]
    pub target: Option<LabelKind>,
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[arg(long)]
    pub table: PathBuf,
    #[arg(long)]
    pub panel: PathBuf,
    #[arg(long)]
    pub schema: Option<PathBuf>,
    #[command(flatten)]
    pub out: OutArg,
}

#[derive(Debug, Args)]
pub struct SplitCmd {
    #[command(flatten)]
    pub dataset: DatasetArg,
    #[arg(long, value_parser = parse::<SplitFractions>)]
    pub fractions: Option<SplitFractions>,
    #[arg(long, value_parser = parse::<Stratify>)]
    pub stratify: Option<Stratify>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub out: OutArg,
}

#[derive(Debug, Args)]
pub struct RankArgs {
    #[command(flatten)]
    pub dataset: DatasetArg,
    #[command(flatten)]
    pub metric: MetricArgs,
    /// Neighbors per relation in the export.
    #[arg(long, default_value_t = 10)]
    pub top: usize,
    #[command(flatten)]
    pub out: OutArg,
    /// Also write a dense matrix: expression or spatial.
    #[arg(long, requires = "matrix_out")]
    pub matrix: Option<String>,
    #[arg(long, requires = "matrix")]
    pub matrix_out: Option<PathBuf>,
    #[arg(long, default_value_t = imcprompt::ranking::DEFAULT_MATRIX_CAP)]
    pub matrix_cap: usize,
}

#[derive(Debug, Args)]
pub struct SentencesArgs {
    #[command(flatten)]
    pub dataset: DatasetArg,
    #[arg(long)]
    pub max_tokens: Option<usize>,
    #[command(flatten)]
    pub out: OutArg,
}

#[derive(Debug, Args)]
pub struct PromptsArgs {
    #[command(flatten)]
    pub dataset: DatasetArg,
    #[command(flatten)]
    pub metric: MetricArgs,
    #[command(flatten)]
    pub split: SplitArgs,
    #[arg(long)]
    pub k: Option<usize>,
    /// Rank window for negative prompts, e.g. 1-3.
    #[arg(long, value_parser = parse::<RankWindow>)]
    pub negative_window: Option<RankWindow>,
    #[arg(long, value_parser = parse::<Task>)]
    pub task: Option<Task>,
    #[arg(long)]
    pub no_negative: bool,
    #[arg(long)]
    pub max_tokens: Option<usize>,
    #[arg(long)]
    pub template_version: Option<String>,
    #[command(flatten)]
    pub out: OutArg,
}

#[derive(Debug, Args)]
pub struct ClassifyArgs {
    #[command(flatten)]
    pub dataset: DatasetArg,
    #[command(flatten)]
    pub metric: MetricArgs,
    #[command(flatten)]
    pub split: SplitArgs,
    #[command(flatten)]
    pub classifier: ClassifierArgs,
    #[command(flatten)]
    pub out: OutArg,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub dataset: DatasetArg,
    #[command(flatten)]
    pub metric: MetricArgs,
    #[arg(long, value_parser = parse::<SplitFractions>)]
    pub fractions: Option<SplitFractions>,
    #[arg(long, value_parser = parse::<Stratify>)]
    pub stratify: Option<Stratify>,
    /// Comma-separated split seeds.
    #[arg(long, value_delimiter = ',')]
    pub seeds: Option<Vec<u64>>,
    #[command(flatten)]
    pub classifier: ClassifierArgs,
    #[arg(long, value_parser = parse::<RankWindow>)]
    pub negative_window: Option<RankWindow>,
    /// Also write plot-ready predicted-vs-truth cell-type shares (TSV).
    #[arg(long)]
    pub frequencies: Option<PathBuf>,
    #[command(flatten)]
    pub out: OutArg,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub eval: EvalArgs,
    #[arg(long, value_parser = parse::<SweepAxis>)]
    pub axis: SweepAxis,
    /// Comma-separated axis values; defaults depend on the axis.
    #[arg(long, value_delimiter = ',')]
    pub values: Vec<String>,
    /// Also write the flat summary table here.
    #[arg(long)]
    pub tsv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// default, diabetes_like or brain_tumor_like
    #[arg(long)]
    pub preset: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub n_samples: Option<usize>,
    #[arg(long)]
    pub cells_per_sample: Option<usize>,
    #[arg(long)]
    pub n_types: Option<usize>,
    #[arg(long)]
    pub n_proteins: Option<usize>,
    #[arg(long)]
    pub n_statuses: Option<usize>,
    #[arg(long)]
    pub separation: Option<f64>,
    #[arg(long)]
    pub spatial_clustering: Option<f64>,
    #[arg(long)]
    pub status_effect: Option<f64>,
    #[command(flatten)]
    pub out: OutArg,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[command(flatten)]
    pub out: OutArg,
}

fn one_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// The error chain joined with `: `, skipping causes already quoted by
/// their parent.
fn message(e: &anyhow::Error) -> String {
    let mut out = String::new();
    for cause in e.chain() {
        let text = cause.to_string();
        if out.is_empty() {
            out = text;
        } else if !out.contains(&text) {
            out.push_str(": ");
            out.push_str(&text);
        }
    }
    one_line(&out)
}

fn error_kind(e: &anyhow::Error) -> &'static str {
    for cause in e.chain() {
        if let Some(err) = cause.downcast_ref::<imcprompt::Error>() {
            return err.code();
        }
        if cause.downcast_ref::<toml::de::Error>().is_some() {
            return "config";
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return "io";
        }
        if cause.downcast_ref::<commands::UsageError>().is_some() {
            return "usage";
        }
    }
    "other"
}

fn run(cli: Cli) -> anyhow::Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()?;
    }
    let config = RunConfig::load(cli.config.as_deref())?;
    commands::dispatch(cli.command, config)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.to_string();
            let first = msg
                .lines()
                .next()
                .unwrap_or("")
                .trim_start_matches("error: ");
            eprintln!("error: kind=usage message={}", one_line(first));
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: kind={} message={}", error_kind(&e), message(&e));
            ExitCode::FAILURE
        }
    }
}
