//! The `lexsimp` command line: `simplify`, `evaluate`, `score` and `sweep`.
//!
//! Exit codes: 0 on success, 2 for bad input (arguments, spans, datasets,
//! resource files), 3 when the scoring backend fails.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

use crate::backend::BackendError;
use crate::eval::EvalError;
use crate::generator::GenerateError;
use crate::ranker::RankingWeights;

mod commands;
pub mod config;
pub mod pipeline;

pub use config::{BackendKind, OutputFormat, RunConfig};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("backend error: {0}")]
    Backend(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Input(_) => 2,
            Self::Backend(_) => 3,
        }
    }

    pub(crate) fn backend(e: BackendError) -> Self {
        Self::Backend(e.to_string())
    }
}

impl From<GenerateError> for CliError {
    fn from(e: GenerateError) -> Self {
        if e.is_input_error() {
            Self::Input(e.to_string())
        } else {
            Self::Backend(e.to_string())
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        Self::Input(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::Input(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(name = "lexsimp", version, about = "Lexical simplification with a paraphrase model")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

/// Options shared by every command. Flags override the `--config` file.
#[derive(Debug, Clone, Default, Args)]
pub struct GlobalArgs {
    /// JSON config file; flags take precedence over its values.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Scoring backend.
    #[arg(long, global = true, value_enum)]
    pub backend: Option<BackendKind>,
    /// Model server URL for the remote backend.
    #[arg(long, global = true, env = "LEXSIMP_URL")]
    pub url: Option<String>,
    /// Language code of the input (defaults to `toy` or `en` by backend).
    #[arg(long, global = true)]
    pub lang: Option<String>,
    /// Number of candidates to generate.
    #[arg(long, global = true)]
    pub k: Option<usize>,
    /// Suffix words scored by the lookahead term (0 disables it).
    #[arg(long, global = true)]
    pub lookahead: Option<usize>,
    /// First-token pool size; raised to at least `k`.
    #[arg(long, global = true)]
    pub pool: Option<usize>,
    /// Maximum tokens per generated word.
    #[arg(long, global = true)]
    pub max_subtokens: Option<usize>,
    /// Keep generator order instead of feature-based ranking.
    #[arg(long, global = true)]
    pub no_ranking: bool,
    /// Ranking weights as `prediction,frequency,similarity`.
    #[arg(long, global = true, value_name = "P,F,S")]
    pub weights: Option<RankingWeights>,
    /// Word embeddings in word2vec text format.
    #[arg(long, global = true, value_name = "PATH")]
    pub embeddings: Option<PathBuf>,
    /// Only read this many embedding rows.
    #[arg(long, global = true)]
    pub embedding_limit: Option<usize>,
    /// Word frequency table (`word<TAB>zipf`).
    #[arg(long, global = true, value_name = "PATH")]
    pub freq: Option<PathBuf>,
    /// Substitutes kept per instance.
    #[arg(long, global = true)]
    pub top_n: Option<usize>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<OutputFormat>,
    /// Parallel workers for dataset commands (default: all cores).
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Lexicon JSON for the toy backend (default: built-in fixture).
    #[arg(long, global = true, value_name = "PATH")]
    pub toy_lexicon: Option<PathBuf>,
    /// Split long toy words into two subword tokens.
    #[arg(long, global = true)]
    pub toy_subword: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Suggest simpler substitutes for one word in a sentence.
    Simplify {
        sentence: String,
        /// The complex word; its first whole-word occurrence is used.
        #[arg(required_unless_present = "span", conflicts_with = "span")]
        word: Option<String>,
        /// Char offsets of the complex word, `START:END`.
        #[arg(long, value_parser = parse_span)]
        span: Option<(usize, usize)>,
    },
    /// Generate, rank and score every instance of a dataset.
    Evaluate {
        dataset: PathBuf,
        /// Also write the predictions as TSV.
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
    },
    /// Score an existing predictions file against a dataset.
    Score {
        dataset: PathBuf,
        predictions: PathBuf,
    },
    /// Re-run evaluation along one axis and emit a tidy TSV.
    Sweep {
        dataset: PathBuf,
        #[arg(long, value_enum)]
        axis: SweepAxis,
        /// Axis values for `k-candidates` and `suffix-length`.
        #[arg(long, value_delimiter = ',')]
        values: Option<Vec<usize>>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SweepAxis {
    SuffixLength,
    RankingFeatures,
    KCandidates,
}

fn parse_span(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = s
        .split_once(':')
        .ok_or_else(|| format!("expected START:END, got `{s}`"))?;
    let parse = |x: &str| x.trim().parse::<usize>().map_err(|e| format!("`{x}`: {e}"));
    Ok((parse(a)?, parse(b)?))
}

/// Runs a parsed command, writing the report to `out`.
pub fn run(cli: Cli, out: &mut dyn Write) -> Result<(), CliError> {
    let cfg = RunConfig::resolve(&cli.global)?;
    match cli.command {
        Command::Simplify {
            sentence,
            word,
            span,
        } => commands::simplify(&cfg, &sentence, word.as_deref(), span, out),
        Command::Evaluate { dataset, out: pred_out } => {
            commands::evaluate(&cfg, &dataset, pred_out.as_deref(), out)
        }
        Command::Score {
            dataset,
            predictions,
        } => commands::score(&cfg, &dataset, &predictions, out),
        Command::Sweep {
            dataset,
            axis,
            values,
        } => commands::sweep(&cfg, &dataset, axis, values, out),
    }
}

/// Entry point for the binary.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let stdout = std::io::stdout();
    let mut lock = stdout.lock();
    match run(cli, &mut lock).and_then(|()| lock.flush().map_err(CliError::from)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
