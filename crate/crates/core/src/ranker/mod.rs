//! Substitute ranking by a weighted sum of three features: the generator's
//! prediction score, Zipf word frequency, and embedding cosine similarity to
//! the complex word.
//!
//! Each feature column is min-max normalized over the candidate set before
//! weighting, since the raw columns live on unrelated scales.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::generator::CandidateWord;
use crate::text::fold;

pub mod resources;

pub use resources::{Embeddings, FrequencyTable, LanguageResources, ResourceCatalog, ResourcePaths};

/// Final number of substitutes kept per instance.
pub const DEFAULT_TOP_N: usize = 10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RankError {
    #[error("no lexical resources loaded for language `{0}`")]
    MissingResources(String),
    #[error("{0}")]
    Io(String),
    #[error("malformed resource: {0}")]
    Parse(String),
    #[error("{features} feature vectors for {candidates} candidates")]
    FeatureMismatch { candidates: usize, features: usize },
}

impl From<std::io::Error> for RankError {
    fn from(e: std::io::Error) -> Self {
        Self::Io(e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub prediction: f64,
    /// Zipf value, 0 when the word is unknown.
    pub frequency: f64,
    /// Cosine to the complex word, 0 when either side is unknown.
    pub similarity: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankingWeights {
    pub prediction: f64,
    pub frequency: f64,
    pub similarity: f64,
}

impl RankingWeights {
    pub const fn new(prediction: f64, frequency: f64, similarity: f64) -> Self {
        Self {
            prediction,
            frequency,
            similarity,
        }
    }

    /// Tuned weights for the shared-task languages.
    pub fn preset(lang: &str) -> Option<Self> {
        match lang {
            "en" => Some(Self::new(0.04, 0.04, 0.1)),
            "es" => Some(Self::new(0.04, 0.02, 0.4)),
            "pt" => Some(Self::new(0.04, 0.04, 0.4)),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        let all = [self.prediction, self.frequency, self.similarity];
        if all.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err("ranking weights must be finite and non-negative".into());
        }
        if all.iter().all(|&w| w == 0.0) {
            return Err("at least one ranking weight must be positive".into());
        }
        Ok(())
    }
}

impl std::str::FromStr for RankingWeights {
    type Err = String;

    /// Parses `p,f,s`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts = s
            .split(',')
            .map(|p| p.trim().parse::<f64>().map_err(|e| format!("`{p}`: {e}")))
            .collect::<Result<Vec<_>, _>>()?;
        let [p, f, sim] = parts[..] else {
            return Err(format!("expected three comma-separated weights, got `{s}`"));
        };
        let w = Self::new(p, f, sim);
        w.validate()?;
        Ok(w)
    }
}

/// A candidate with its final ranking score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ranked {
    pub candidate: CandidateWord,
    /// Absent in passthrough mode.
    pub features: Option<FeatureVector>,
    pub score: f64,
}

/// One feature vector per candidate, in candidate order.
pub fn compute_features(
    candidates: &[CandidateWord],
    complex_word: &str,
    resources: &LanguageResources,
) -> Vec<FeatureVector> {
    candidates
        .iter()
        .map(|c| {
            debug_assert_ne!(fold(&c.surface), fold(complex_word));
            FeatureVector {
                prediction: c.total_score,
                frequency: resources.frequencies.get(&c.surface).unwrap_or(0.0),
                similarity: resources
                    .embeddings
                    .cosine(&c.surface, complex_word)
                    .unwrap_or(0.0),
            }
        })
        .collect()
}

/// Looks up the language in `catalog` and computes features.
pub fn compute_features_for(
    candidates: &[CandidateWord],
    complex_word: &str,
    lang: &str,
    catalog: &ResourceCatalog,
) -> Result<Vec<FeatureVector>, RankError> {
    let resources = catalog.get(lang)?;
    Ok(compute_features(candidates, complex_word, &resources))
}

/// Min-max normalizes a column; constant columns map to 0.
fn normalize(column: &[f64]) -> Vec<f64> {
    let min = column.iter().copied().fold(f64::INFINITY, f64::min);
    let max = column.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let range = max - min;
    column
        .iter()
        .map(|&x| if range > 0.0 { (x - min) / range } else { 0.0 })
        .collect()
}

/// Ranks by weighted normalized features; ties fall back to prediction
/// score, then surface order.
pub fn rank(
    candidates: &[CandidateWord],
    features: &[FeatureVector],
    weights: &RankingWeights,
    top_n: usize,
) -> Result<Vec<Ranked>, RankError> {
    if candidates.len() != features.len() {
        return Err(RankError::FeatureMismatch {
            candidates: candidates.len(),
            features: features.len(),
        });
    }
    let column = |f: fn(&FeatureVector) -> f64| normalize(&features.iter().map(f).collect::<Vec<_>>());
    let prediction = column(|f| f.prediction);
    let frequency = column(|f| f.frequency);
    let similarity = column(|f| f.similarity);

    let mut ranked: Vec<Ranked> = candidates
        .iter()
        .zip(features)
        .enumerate()
        .map(|(i, (c, f))| Ranked {
            candidate: c.clone(),
            features: Some(*f),
            score: weights.prediction * prediction[i]
                + weights.frequency * frequency[i]
                + weights.similarity * similarity[i],
        })
        .collect();
    ranked.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then_with(|| b.candidate.total_score.total_cmp(&a.candidate.total_score))
            .then_with(|| a.candidate.surface.cmp(&b.candidate.surface))
    });
    ranked.truncate(top_n);
    Ok(ranked)
}

/// Keeps generator order, truncated.
pub fn rank_passthrough(candidates: &[CandidateWord], top_n: usize) -> Vec<Ranked> {
    candidates
        .iter()
        .take(top_n)
        .map(|c| Ranked {
            candidate: c.clone(),
            features: None,
            score: c.total_score,
        })
        .collect()
}
