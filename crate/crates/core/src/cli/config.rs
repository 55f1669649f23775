//! Run configuration: JSON config file merged with command-line flags.
//!
//! Precedence, lowest first: built-in defaults, config file, `LEXSIMP_URL`,
//! flags.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{CliError, GlobalArgs};
use crate::backend::toy::TOY_LANG;
use crate::generator::GeneratorConfig;
use crate::ranker::{RankingWeights, DEFAULT_TOP_N};

/// Keys accepted in the `--config` JSON file. Every key is optional.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub backend: Option<BackendKind>,
    pub url: Option<String>,
    pub lang: Option<String>,
    pub generator: Option<GeneratorConfig>,
    pub no_ranking: Option<bool>,
    pub weights: Option<[f64; 3]>,
    pub embeddings: Option<PathBuf>,
    pub freq: Option<PathBuf>,
    pub embedding_limit: Option<usize>,
    pub top_n: Option<usize>,
    pub format: Option<OutputFormat>,
    pub workers: Option<usize>,
    pub toy_lexicon: Option<PathBuf>,
    pub toy_subword: Option<bool>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let data = std::fs::read_to_string(path)
            .map_err(|e| CliError::Input(format!("config {}: {e}", path.display())))?;
        serde_json::from_str(&data)
            .map_err(|e| CliError::Input(format!("config {}: {e}", path.display())))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Toy,
    Remote,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Text,
    Json,
    Tsv,
}

#[derive(Debug, Clone, PartialEq)]
pub enum BackendChoice {
    Toy {
        lexicon: Option<PathBuf>,
        subword: bool,
    },
    Remote {
        url: String,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub enum RankingMode {
    Passthrough,
    Weighted(RankingWeights),
}

/// Fully resolved configuration for one command.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub backend: BackendChoice,
    pub lang: String,
    pub generator: GeneratorConfig,
    pub ranking: RankingMode,
    pub embeddings: Option<PathBuf>,
    pub freq: Option<PathBuf>,
    pub embedding_limit: Option<usize>,
    pub top_n: usize,
    pub format: OutputFormat,
    pub workers: usize,
    /// Set when ranking was requested but had to be dropped.
    pub ranking_note: Option<String>,
}

impl RunConfig {
    pub fn resolve(args: &GlobalArgs) -> Result<Self, CliError> {
        let file = match &args.config {
            Some(path) => FileConfig::load(path)?,
            None => FileConfig::default(),
        };

        let kind = args.backend.or(file.backend).unwrap_or(BackendKind::Toy);
        let backend = match kind {
            BackendKind::Toy => BackendChoice::Toy {
                lexicon: args.toy_lexicon.clone().or(file.toy_lexicon),
                subword: args.toy_subword || file.toy_subword.unwrap_or(false),
            },
            BackendKind::Remote => {
                let url = args.url.clone().or(file.url).ok_or_else(|| {
                    CliError::Input("remote backend requires --url or LEXSIMP_URL".into())
                })?;
                BackendChoice::Remote { url }
            }
        };
        let lang = args.lang.clone().or(file.lang).unwrap_or_else(|| match kind {
            BackendKind::Toy => TOY_LANG.to_string(),
            BackendKind::Remote => "en".to_string(),
        });

        let mut generator = file.generator.unwrap_or_default();
        if let Some(k) = args.k {
            generator.k = k;
        }
        if let Some(l) = args.lookahead {
            generator.lookahead_words = l;
        }
        if let Some(m) = args.pool {
            generator.first_token_pool = m;
        }
        if let Some(s) = args.max_subtokens {
            generator.max_word_subtokens = s;
        }
        generator.first_token_pool = generator.first_token_pool.max(generator.k);
        generator
            .validate()
            .map_err(|e| CliError::Input(e.to_string()))?;

        let embeddings = args.embeddings.clone().or(file.embeddings);
        let freq = args.freq.clone().or(file.freq);
        let weights = match (&args.weights, file.weights) {
            (Some(w), _) => Some(*w),
            (None, Some([p, f, s])) => {
                let w = RankingWeights::new(p, f, s);
                w.validate().map_err(CliError::Input)?;
                Some(w)
            }
            (None, None) => None,
        };
        let no_ranking = args.no_ranking || file.no_ranking.unwrap_or(false);
        let (ranking, ranking_note) = if no_ranking {
            (RankingMode::Passthrough, None)
        } else if embeddings.is_none() || freq.is_none() {
            (
                RankingMode::Passthrough,
                Some("ranking needs --embeddings and --freq; using generator order".to_string()),
            )
        } else {
            match weights.or_else(|| RankingWeights::preset(&lang)) {
                Some(w) => (RankingMode::Weighted(w), None),
                None => (
                    RankingMode::Weighted(RankingWeights::preset("en").expect("en preset")),
                    Some(format!("no weight preset for `{lang}`; using the `en` weights")),
                ),
            }
        };

        let top_n = args.top_n.or(file.top_n).unwrap_or(DEFAULT_TOP_N);
        if top_n == 0 {
            return Err(CliError::Input("--top-n must be at least 1".into()));
        }
        let workers = args
            .workers
            .or(file.workers)
            .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
            .max(1);

        Ok(Self {
            backend,
            lang,
            generator,
            ranking,
            embeddings,
            freq,
            embedding_limit: args.embedding_limit.or(file.embedding_limit),
            top_n,
            format: args.format.or(file.format).unwrap_or_default(),
            workers,
            ranking_note,
        })
    }

    /// The settings that determine results, for report headers. Worker
    /// count and output format are left out.
    pub fn echo(&self) -> Value {
        let backend = match &self.backend {
            BackendChoice::Toy { lexicon, subword } => json!({
                "kind": "toy",
                "lexicon": lexicon.as_ref().map(|p| p.display().to_string()),
                "subword": subword,
            }),
            BackendChoice::Remote { url } => json!({"kind": "remote", "url": url}),
        };
        let ranking = match &self.ranking {
            RankingMode::Passthrough => json!({"mode": "passthrough"}),
            RankingMode::Weighted(w) => json!({
                "mode": "weighted",
                "weights": [w.prediction, w.frequency, w.similarity],
                "embeddings": self.embeddings.as_ref().map(|p| p.display().to_string()),
                "freq": self.freq.as_ref().map(|p| p.display().to_string()),
                "embedding_limit": self.embedding_limit,
            }),
        };
        json!({
            "backend": backend,
            "lang": self.lang,
            "generator": self.generator,
            "ranking": ranking,
            "top_n": self.top_n,
        })
    }
}
