//! TSAR-2022 style evaluation: dataset loading and the shared-task metrics
//! ACC@1, MAP@k, Potential@k and Accuracy@n@top1.
//!
//! Matching is exact string equality after [`fold`](crate::text::fold).

use std::collections::HashSet;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::text::fold;

pub mod metrics;
pub mod report;
pub mod tsar;

pub use metrics::{acc_at_n_top1, evaluate, map_at_k, potential_at_k, MetricsReport};
pub use tsar::{align_predictions, load_predictions, load_tsar, write_predictions, TsarDataset};

/// At most this many substitutes per instance are scored.
pub const MAX_PREDICTIONS: usize = 10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("file not found: {}", .0.display())]
    FileNotFound(PathBuf),
    #[error("{0}")]
    Io(String),
    #[error("{predictions} predictions for {golds} gold instances")]
    LengthMismatch { predictions: usize, golds: usize },
    #[error("duplicate prediction `{0}`")]
    DuplicatePrediction(String),
    #[error("predictions do not align with the dataset: {}", .0.join("; "))]
    Alignment(Vec<String>),
    #[error("malformed lines: {}", .0.iter().map(|m| m.to_string()).collect::<Vec<_>>().join("; "))]
    Malformed(Vec<MalformedLine>),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MalformedLine {
    pub line_no: usize,
    pub reason: String,
}

impl std::fmt::Display for MalformedLine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "line {}: {}", self.line_no, self.reason)
    }
}

/// One annotated instance: the sentence, its complex word, and the gold
/// substitutes with their annotator counts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldInstance {
    pub context: String,
    pub complex_word: String,
    /// Folded substitutes with vote counts, in first-seen order.
    pub gold: Vec<(String, u32)>,
}

impl GoldInstance {
    /// Aggregates repeated substitutes into counts. Empty entries are ignored.
    pub fn new<I, S>(context: &str, complex_word: &str, substitutes: I) -> Option<Self>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut gold: Vec<(String, u32)> = Vec::new();
        for s in substitutes {
            let key = fold(s.as_ref());
            if key.is_empty() {
                continue;
            }
            match gold.iter_mut().find(|(k, _)| *k == key) {
                Some((_, n)) => *n += 1,
                None => gold.push((key, 1)),
            }
        }
        (!gold.is_empty()).then(|| Self {
            context: context.trim().to_string(),
            complex_word: complex_word.trim().to_string(),
            gold,
        })
    }

    pub fn count(&self, word: &str) -> u32 {
        let key = fold(word);
        self.gold
            .iter()
            .find(|(k, _)| *k == key)
            .map_or(0, |&(_, n)| n)
    }

    pub fn contains(&self, word: &str) -> bool {
        self.count(word) > 0
    }

    pub fn key_count(&self) -> usize {
        self.gold.len()
    }

    /// Every substitute sharing the highest vote count.
    pub fn top_voted(&self) -> Vec<&str> {
        let max = self.gold.iter().map(|&(_, n)| n).max().unwrap_or(0);
        self.gold
            .iter()
            .filter(|&&(_, n)| n == max)
            .map(|(k, _)| k.as_str())
            .collect()
    }

    /// Alignment key between gold and prediction files.
    pub fn key(&self) -> (String, String) {
        (self.context.clone(), self.complex_word.clone())
    }
}

/// Ranked substitutes for one instance, distinct after folding. An empty
/// prediction counts as a skipped instance.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prediction {
    items: Vec<String>,
}

impl Prediction {
    /// Rejects duplicates; keeps at most [`MAX_PREDICTIONS`] items.
    pub fn new<I, S>(items: I) -> Result<Self, EvalError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        for item in items {
            let item: String = item.into();
            if !seen.insert(fold(&item)) {
                return Err(EvalError::DuplicatePrediction(item));
            }
            out.push(item.trim().to_string());
        }
        out.truncate(MAX_PREDICTIONS);
        Ok(Self { items: out })
    }

    /// Drops later duplicates and empty strings instead of failing.
    pub fn dedup<I, S>(items: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut seen = HashSet::new();
        let items = items
            .into_iter()
            .map(Into::into)
            .filter(|s: &String| !s.trim().is_empty() && seen.insert(fold(s)))
            .map(|s| s.trim().to_string())
            .take(MAX_PREDICTIONS)
            .collect();
        Self { items }
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn items(&self) -> &[String] {
        &self.items
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub(crate) fn assert_distinct(&self) {
        let mut seen = HashSet::new();
        assert!(
            self.items.iter().all(|i| seen.insert(fold(i))),
            "prediction contains duplicates: {:?}",
            self.items
        );
    }
}
