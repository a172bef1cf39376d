//! `tutor-align` command-line interface.

pub mod commands;
pub mod config;

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use tutor_align_core::corpus::Split;
use tutor_align_core::losses::Method;

#[derive(Debug, Parser)]
#[command(
    name = "tutor-align",
    version,
    about = "Evaluate tutor backends with a student judge, build preference datasets, and train a toy policy with SFT/DPO/ORPO/SimPO"
)]
pub struct Cli {
    /// Run configuration file (TOML). Required by eval and build-prefs.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Seed overriding the configured one.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Maximum concurrent completions per backend.
    #[arg(long, global = true)]
    pub parallelism: Option<usize>,

    /// Response cache directory (flag > TUTOR_ALIGN_CACHE_DIR > config).
    #[arg(long, global = true)]
    pub cache_dir: Option<PathBuf>,

    /// Output directory overriding the configured one.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate tutorials on the test split and collect judge ratings.
    Eval(EvalArgs),
    /// Turn a run record into breakdown/distribution/accuracy reports.
    Report(ReportArgs),
    /// Build the pairwise preference dataset from strong vs weak tutors.
    BuildPrefs(BuildPrefsArgs),
    /// Train the toy policy on a preference-pair file.
    Train(TrainArgs),
    /// Verify analytic loss gradients against finite differences.
    GradCheck(GradCheckArgs),
    /// Validate a corpus or pair file.
    Validate(ValidateArgs),
    /// Convert an upstream ScienceQA problems.json into corpus files.
    Convert(ConvertArgs),
}

#[derive(Debug, clap::Args)]
pub struct EvalArgs {
    /// Comma-separated tutor backend ids (default: all configured tutors).
    #[arg(long, value_delimiter = ',')]
    pub tutors: Option<Vec<String>>,
}

#[derive(Debug, clap::Args)]
pub struct ReportArgs {
    /// Directory holding feedback.jsonl and tutorials.jsonl (default: the
    /// output directory).
    #[arg(long)]
    pub run_dir: Option<PathBuf>,
    /// Corpus the run was evaluated on (default: the configured test corpus).
    #[arg(long)]
    pub corpus: Option<PathBuf>,
}

#[derive(Debug, clap::Args)]
pub struct BuildPrefsArgs {
    /// Subset the train corpus to half (seeded) before building pairs.
    #[arg(long)]
    pub half: bool,
    /// Abort when more than this fraction of samples fail.
    #[arg(long, default_value_t = tutor_align_core::prefdata::DEFAULT_FAILURE_THRESHOLD)]
    pub failure_threshold: f64,
}

/// Objective selector for `train`.
#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum MethodArg {
    Sft,
    Dpo,
    Orpo,
    Simpo,
}

impl From<MethodArg> for Method {
    fn from(value: MethodArg) -> Self {
        match value {
            MethodArg::Sft => Method::Sft,
            MethodArg::Dpo => Method::Dpo,
            MethodArg::Orpo => Method::Orpo,
            MethodArg::Simpo => Method::Simpo,
        }
    }
}

#[derive(Debug, clap::Args)]
pub struct TrainArgs {
    /// Preference-pair file produced by build-prefs.
    #[arg(long)]
    pub pairs: PathBuf,
    #[arg(long, value_enum)]
    pub method: MethodArg,
    /// Initial parameters file; without it, uniform logits over the pair
    /// vocabulary are used (and double as the DPO reference).
    #[arg(long)]
    pub params_in: Option<PathBuf>,
    #[arg(long, default_value_t = 0.05)]
    pub learning_rate: f64,
    #[arg(long, default_value_t = 200)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0.2)]
    pub holdout_fraction: f64,
    /// Context classes when initializing fresh parameters.
    #[arg(long, default_value_t = 1)]
    pub contexts: usize,
    /// Override the method's default beta (DPO/SimPO).
    #[arg(long)]
    pub beta: Option<f64>,
    /// Override the method's default lambda (ORPO).
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Override the method's default gamma (SimPO).
    #[arg(long)]
    pub gamma: Option<f64>,
}

#[derive(Debug, clap::Args)]
pub struct GradCheckArgs {
    /// Pair-level trials per method (chain trials are half of this).
    #[arg(long, default_value_t = 200)]
    pub trials: usize,
}

#[derive(Debug, clap::Args)]
pub struct ValidateArgs {
    /// Pair file to validate (requires --train-corpus).
    #[arg(long)]
    pub pairs: Option<PathBuf>,
    /// Train corpus the pairs must belong to.
    #[arg(long)]
    pub train_corpus: Option<PathBuf>,
    /// Corpus file to validate on its own (requires --split).
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Declared split of --corpus.
    #[arg(long, value_enum)]
    pub split: Option<SplitArg>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SplitArg {
    Train,
    Test,
}

impl From<SplitArg> for Split {
    fn from(value: SplitArg) -> Self {
        match value {
            SplitArg::Train => Split::Train,
            SplitArg::Test => Split::Test,
        }
    }
}

#[derive(Debug, clap::Args)]
pub struct ConvertArgs {
    /// Upstream problems.json (ScienceQA layout).
    #[arg(long)]
    pub input: PathBuf,
    /// Directory for corpus_train.jsonl and corpus_test.jsonl.
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Prefix for image references, joined as {root}/{id}/{image}.
    #[arg(long, default_value = "images")]
    pub image_root: String,
}

/// Dispatch a parsed invocation. Errors map to a nonzero exit in `main`.
pub fn run(cli: Cli) -> Result<()> {
    let globals = Globals {
        config: cli.config,
        seed: cli.seed,
        parallelism: cli.parallelism,
        cache_dir: cli.cache_dir,
        out: cli.out,
    };
    match cli.command {
        Command::Eval(args) => commands::eval::run(&globals, &args),
        Command::Report(args) => commands::report::run(&globals, &args),
        Command::BuildPrefs(args) => commands::build_prefs::run(&globals, &args),
        Command::Train(args) => commands::train::run(&globals, &args),
        Command::GradCheck(args) => commands::grad_check::run(&globals, &args),
        Command::Validate(args) => commands::validate::run(&globals, &args),
        Command::Convert(args) => commands::convert::run(&globals, &args),
    }
}

/// Flags shared by every subcommand.
#[derive(Debug, Clone)]
pub struct Globals {
    pub config: Option<PathBuf>,
    pub seed: Option<u64>,
    pub parallelism: Option<usize>,
    pub cache_dir: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

impl Globals {
    /// Load the config file named by --config, failing clearly without one.
    pub fn require_config(&self) -> Result<config::RunConfig> {
        let path = match &self.config {
            Some(path) => path,
            None => bail!("this command needs --config <file>"),
        };
        config::RunConfig::load(path)
            .with_context(|| format!("loading config {}", path.display()))
    }

    /// Config is optional for this command; load it when given.
    pub fn optional_config(&self) -> Result<Option<config::RunConfig>> {
        match &self.config {
            Some(path) => Ok(Some(config::RunConfig::load(path).with_context(|| {
                format!("loading config {}", path.display())
            })?)),
            None => Ok(None),
        }
    }
}
