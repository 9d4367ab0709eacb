//! Command-line arguments.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};

use prooflens_core::encoder::EncoderKind;

use crate::commands;

#[derive(Debug, Parser)]
#[command(name = "prooflens", version, about = "Graph contrastive pre-training and grammar-constrained tactic decoding")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a seeded synthetic corpus directory.
    GenCorpus(GenCorpusArgs),
    /// Build premise-selection instances and proof steps from a corpus.
    BuildDataset(BuildDatasetArgs),
    /// Split a dataset directory into partitions by source file.
    Split(SplitArgs),
    /// Pre-train an encoder and projection head with InfoNCE.
    Pretrain(PretrainArgs),
    /// Fine-tune an encoder and tactic decoder with teacher forcing.
    Finetune(FinetuneArgs),
    /// Top-1 premise-selection accuracy of a pre-trained checkpoint.
    EvalPremise(EvalPremiseArgs),
    /// Exact-match greedy tactic accuracy per source file.
    EvalTactic(EvalTacticArgs),
    /// Compare analytic and finite-difference gradients of every model.
    Gradcheck(GradcheckArgs),
    /// Render tactic evaluations as a per-group table with a Total row.
    Report(ReportArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EncoderArg {
    Gin,
    Treelstm,
}

impl From<EncoderArg> for EncoderKind {
    fn from(e: EncoderArg) -> Self {
        match e {
            EncoderArg::Gin => EncoderKind::Gin,
            EncoderArg::Treelstm => EncoderKind::TreeLstm,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct SeedArg {
    /// Random seed; PROOFLENS_SEED is used when the flag is absent.
    #[arg(long, env = "PROOFLENS_SEED", default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args)]
pub struct EncoderArgs {
    #[arg(long, value_enum, default_value_t = EncoderArg::Gin)]
    pub encoder: EncoderArg,
    /// Message-passing layers of the GIN encoder.
    #[arg(long, default_value_t = 5)]
    pub layers: usize,
    /// Encoder hidden size.
    #[arg(long, default_value_t = 256)]
    pub hidden: usize,
}

#[derive(Debug, Clone, Args)]
pub struct GenCorpusArgs {
    /// Output corpus directory.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 10)]
    pub files: usize,
    #[arg(long, default_value_t = 20)]
    pub statements: usize,
    /// Height of the subtree a theorem shares with its positive premise.
    #[arg(long, default_value_t = 3)]
    pub motif_depth: usize,
    /// Number of constructor labels used.
    #[arg(long, default_value_t = 10)]
    pub labels: usize,
    #[arg(long, default_value_t = 5)]
    pub max_depth: usize,
    #[command(flatten)]
    pub seed: SeedArg,
    /// Tactic grammar file; the built-in grammar when absent.
    #[arg(long)]
    pub grammar: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct BuildDatasetArgs {
    /// Corpus directory.
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Output dataset directory (premises.jsonl, steps.jsonl).
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub grammar: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SplitArgs {
    /// Dataset directory.
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Output directory, one subdirectory per partition.
    #[arg(long)]
    pub out: PathBuf,
    /// Partition ratios: train,valid,test (or train,test).
    #[arg(long, value_delimiter = ',', default_value = "0.6,0.2,0.2")]
    pub ratios: Vec<f64>,
    #[command(flatten)]
    pub seed: SeedArg,
    #[arg(long)]
    pub grammar: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct PretrainArgs {
    /// Premise dataset: a premises.jsonl file or a directory holding one.
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Checkpoint to write; the vocabulary goes to <out>.vocab.
    #[arg(long)]
    pub out: PathBuf,
    /// Metrics file; <out>.metrics.csv when absent.
    #[arg(long)]
    pub metrics: Option<PathBuf>,
    #[arg(long, default_value_t = 20)]
    pub epochs: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
    #[command(flatten)]
    pub seed: SeedArg,
    #[command(flatten)]
    pub encoder: EncoderArgs,
    /// Projection head output size.
    #[arg(long, default_value_t = 256)]
    pub proj_dim: usize,
}

#[derive(Debug, Clone, Args)]
pub struct FinetuneArgs {
    /// Proof steps: a steps.jsonl file or a directory holding one.
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Checkpoint to write; the vocabulary goes to <out>.vocab.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub metrics: Option<PathBuf>,
    /// Pre-trained checkpoint whose encoder initializes the model.
    #[arg(long)]
    pub init_checkpoint: Option<PathBuf>,
    #[arg(long)]
    pub grammar: Option<PathBuf>,
    #[arg(long, default_value_t = 5)]
    pub epochs: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
    #[command(flatten)]
    pub seed: SeedArg,
    #[command(flatten)]
    pub encoder: EncoderArgs,
    /// Production embedding size.
    #[arg(long, default_value_t = 64)]
    pub embed_dim: usize,
    /// Decoder state size.
    #[arg(long, default_value_t = 256)]
    pub state_dim: usize,
}

#[derive(Debug, Clone, Args)]
pub struct EvalPremiseArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Result file (`accuracy,instances`).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct EvalTacticArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub grammar: Option<PathBuf>,
    /// Result file (`group,correct,total`).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct GradcheckArgs {
    /// First probe seed; PROOFLENS_SEED is used when the flag is absent.
    #[arg(long, env = "PROOFLENS_SEED", default_value_t = 1)]
    pub seed: u64,
    /// Probe seeds tried per model before giving up.
    #[arg(long, default_value_t = 50)]
    pub tries: usize,
    #[arg(long, default_value_t = 1e-4)]
    pub tolerance: f64,
}

#[derive(Debug, Clone, Args)]
pub struct ReportArgs {
    /// Evaluation files from eval-tactic; several give one column each.
    #[arg(long = "in", required = true)]
    pub inputs: Vec<PathBuf>,
    /// Column label per input; file stems when absent.
    #[arg(long)]
    pub label: Vec<String>,
    /// Writes <out>.txt and <out>.csv.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Parses `argv` (program name first), runs the command and returns the
/// process exit code.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return 0;
        }
        Err(e) => {
            let text = e.to_string();
            let first = text.lines().next().unwrap_or("usage error");
            eprintln!("{first}");
            return 1;
        }
    };
    let mut stdout = std::io::stdout().lock();
    match commands::execute(&cli.command, &mut stdout) {
        Ok(()) => 0,
        Err(e) => {
            let _ = stdout.flush();
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
