//! Shared plumbing for the commands: backend construction, ranking setup,
//! and the worker pool that runs generation over a dataset.

use std::sync::Arc;

use log::warn;
use rayon::prelude::*;

use super::config::{BackendChoice, RankingMode, RunConfig};
use super::CliError;
use crate::backend::remote::RemoteBackend;
use crate::backend::toy::{ToyBackend, ToyLexicon};
use crate::backend::ScoringBackend;
use crate::eval::{GoldInstance, Prediction};
use crate::generator::{
    generate_candidates, CandidateWord, GenerateError, GeneratorConfig, SimplificationTask,
};
use crate::ranker::{
    compute_features, rank, rank_passthrough, LanguageResources, RankingWeights, Ranked,
    ResourceCatalog, ResourcePaths,
};

pub fn build_backend(cfg: &RunConfig) -> Result<Box<dyn ScoringBackend>, CliError> {
    let backend: Box<dyn ScoringBackend> = match &cfg.backend {
        BackendChoice::Toy { lexicon, subword } => {
            let lexicon = match lexicon {
                Some(path) => ToyLexicon::from_json_file(path)
                    .map_err(|e| CliError::Input(format!("toy lexicon {}: {e}", path.display())))?,
                None => ToyLexicon::evade_fixture(),
            };
            let toy = ToyBackend::new(lexicon, *subword)
                .map_err(|e| CliError::Input(format!("toy lexicon: {e}")))?;
            Box::new(toy)
        }
        BackendChoice::Remote { url } => Box::new(RemoteBackend::new(url)),
    };
    let info = backend.model_info().map_err(CliError::backend)?;
    if !info.supports(&cfg.lang) {
        return Err(CliError::Input(format!(
            "backend does not support language `{}` (supported: {})",
            cfg.lang,
            info.supported_languages.join(", ")
        )));
    }
    Ok(backend)
}

/// How candidates are turned into a final ordering.
#[derive(Debug, Clone)]
pub enum Ranker {
    Passthrough,
    Weighted {
        weights: RankingWeights,
        resources: Arc<LanguageResources>,
    },
}

impl Ranker {
    /// Loads ranking resources if the config asks for them. Resource files
    /// that fail to load are an input error.
    pub fn from_config(cfg: &RunConfig) -> Result<Self, CliError> {
        if let Some(note) = &cfg.ranking_note {
            warn!("{note}");
        }
        match (&cfg.ranking, &cfg.embeddings, &cfg.freq) {
            (RankingMode::Weighted(weights), Some(embeddings), Some(frequencies)) => {
                let mut catalog = ResourceCatalog::new();
                catalog.register(
                    &cfg.lang,
                    ResourcePaths {
                        embeddings: embeddings.clone(),
                        frequencies: frequencies.clone(),
                        embedding_limit: cfg.embedding_limit,
                    },
                );
                let resources = catalog
                    .get(&cfg.lang)
                    .map_err(|e| CliError::Input(e.to_string()))?;
                Ok(Self::Weighted {
                    weights: *weights,
                    resources,
                })
            }
            _ => Ok(Self::Passthrough),
        }
    }

    pub fn with_weights(&self, weights: RankingWeights) -> Self {
        match self {
            Self::Passthrough => Self::Passthrough,
            Self::Weighted { resources, .. } => Self::Weighted {
                weights,
                resources: Arc::clone(resources),
            },
        }
    }

    pub fn rank(
        &self,
        candidates: &[CandidateWord],
        complex_word: &str,
        top_n: usize,
    ) -> Vec<Ranked> {
        match self {
            Self::Passthrough => rank_passthrough(candidates, top_n),
            Self::Weighted { weights, resources } => {
                let features = compute_features(candidates, complex_word, resources);
                rank(candidates, &features, weights, top_n)
                    .expect("one feature vector per candidate")
            }
        }
    }
}

/// Candidates for one dataset instance, or why there are none.
pub type InstanceResult = Result<Vec<CandidateWord>, GenerateError>;

pub fn thread_pool(workers: usize) -> Result<rayon::ThreadPool, CliError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CliError::Input(format!("worker pool: {e}")))
}

/// Generates candidates for every instance, in dataset order. Results do
/// not depend on the number of workers.
pub fn generate_all(
    pool: &rayon::ThreadPool,
    backend: &dyn ScoringBackend,
    golds: &[GoldInstance],
    lang: &str,
    generator: &GeneratorConfig,
) -> Vec<InstanceResult> {
    pool.install(|| {
        golds
            .par_iter()
            .map(|g| {
                let task = SimplificationTask::locate(&g.context, &g.complex_word, lang)?;
                generate_candidates(&task, backend, generator)
            })
            .collect()
    })
}

/// Turns generation results into predictions. Input errors become skipped
/// instances; the first backend failure, in dataset order, aborts.
pub fn predictions(
    golds: &[GoldInstance],
    results: &[InstanceResult],
    ranker: &Ranker,
    top_n: usize,
) -> Result<Vec<Prediction>, CliError> {
    golds
        .iter()
        .zip(results)
        .enumerate()
        .map(|(i, (gold, result))| match result {
            Ok(candidates) => {
                let ranked = ranker.rank(candidates, &gold.complex_word, top_n);
                Ok(Prediction::dedup(ranked.into_iter().map(|r| r.candidate.surface)))
            }
            Err(e) if e.is_input_error() => {
                warn!("instance {}: skipped ({e})", i + 1);
                Ok(Prediction::empty())
            }
            Err(e) => Err(CliError::Backend(format!("instance {}: {e}", i + 1))),
        })
        .collect()
}
