//! Word embeddings and Zipf frequency tables, loaded from plain-text files.
//!
//! Every key is stored under [`fold`](crate::text::fold); when two file
//! entries fold to the same key the first one wins (frequency-sorted files
//! keep their most common casing).

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use super::RankError;
use crate::text::fold;

/// Word vectors of one fixed dimension.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Embeddings {
    dim: usize,
    vectors: HashMap<String, Vec<f32>>,
}

impl Embeddings {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            vectors: HashMap::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn insert(&mut self, word: &str, vector: Vec<f32>) -> Result<(), RankError> {
        if vector.len() != self.dim {
            return Err(RankError::Parse(format!(
                "vector for `{word}` has {} dims, expected {}",
                vector.len(),
                self.dim
            )));
        }
        self.vectors.entry(fold(word)).or_insert(vector);
        Ok(())
    }

    pub fn get(&self, word: &str) -> Option<&[f32]> {
        self.vectors.get(&fold(word)).map(Vec::as_slice)
    }

    /// Cosine similarity, or `None` when either word is missing.
    /// Zero vectors give 0.
    pub fn cosine(&self, a: &str, b: &str) -> Option<f64> {
        let (a, b) = (self.get(a)?, self.get(b)?);
        let mut dot = 0.0f64;
        let mut na = 0.0f64;
        let mut nb = 0.0f64;
        for (&x, &y) in a.iter().zip(b) {
            let (x, y) = (f64::from(x), f64::from(y));
            dot += x * y;
            na += x * x;
            nb += y * y;
        }
        if na == 0.0 || nb == 0.0 {
            return Some(0.0);
        }
        Some((dot / (na.sqrt() * nb.sqrt())).clamp(-1.0, 1.0))
    }

    /// Reads the `.vec` text format: a `count dim` header, then one
    /// `word v1 .. vdim` line per word. `limit` keeps only the first N rows.
    pub fn from_text_file(path: &Path, limit: Option<usize>) -> Result<Self, RankError> {
        let reader = BufReader::new(open(path)?);
        let mut lines = reader.lines();
        let header = lines
            .next()
            .ok_or_else(|| RankError::Parse(format!("{}: empty file", path.display())))??;
        let dim = header
            .split_whitespace()
            .nth(1)
            .and_then(|d| d.parse::<usize>().ok())
            .filter(|&d| d > 0)
            .ok_or_else(|| {
                RankError::Parse(format!("{}: bad header `{header}`", path.display()))
            })?;
        let mut emb = Self::new(dim);
        for (line_no, line) in lines.enumerate() {
            if limit.is_some_and(|n| emb.len() >= n) {
                break;
            }
            let line = line?;
            let mut fields = line.trim_end().split(' ');
            let Some(word) = fields.next().filter(|w| !w.is_empty()) else {
                continue;
            };
            let vector = fields
                .filter(|f| !f.is_empty())
                .map(str::parse::<f32>)
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| {
                    RankError::Parse(format!("{}:{}: {e}", path.display(), line_no + 2))
                })?;
            emb.insert(word, vector).map_err(|e| {
                RankError::Parse(format!("{}:{}: {e}", path.display(), line_no + 2))
            })?;
        }
        Ok(emb)
    }
}

/// Zipf-scale word frequencies.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FrequencyTable {
    zipf: HashMap<String, f64>,
}

impl FrequencyTable {
    pub fn insert(&mut self, word: &str, zipf: f64) -> Result<(), RankError> {
        if !(zipf.is_finite() && zipf >= 0.0) {
            return Err(RankError::Parse(format!("zipf value {zipf} for `{word}`")));
        }
        self.zipf.entry(fold(word)).or_insert(zipf);
        Ok(())
    }

    pub fn get(&self, word: &str) -> Option<f64> {
        self.zipf.get(&fold(word)).copied()
    }

    pub fn len(&self) -> usize {
        self.zipf.len()
    }

    pub fn is_empty(&self) -> bool {
        self.zipf.is_empty()
    }

    /// Reads `word<TAB>zipf` lines. Blank lines and `#` comments are skipped.
    pub fn from_tsv_file(path: &Path) -> Result<Self, RankError> {
        let reader = BufReader::new(open(path)?);
        let mut table = Self::default();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let parsed = line
                .split_once('\t')
                .and_then(|(w, z)| Some((w, z.trim().parse::<f64>().ok()?)));
            let Some((word, zipf)) = parsed else {
                return Err(RankError::Parse(format!(
                    "{}:{}: expected word<TAB>zipf",
                    path.display(),
                    i + 1
                )));
            };
            table
                .insert(word, zipf)
                .map_err(|e| RankError::Parse(format!("{}:{}: {e}", path.display(), i + 1)))?;
        }
        Ok(table)
    }
}

fn open(path: &Path) -> Result<File, RankError> {
    File::open(path).map_err(|e| RankError::Io(format!("{}: {e}", path.display())))
}

/// Embeddings and frequencies for one language.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LanguageResources {
    pub embeddings: Embeddings,
    pub frequencies: FrequencyTable,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResourcePaths {
    pub embeddings: PathBuf,
    pub frequencies: PathBuf,
    pub embedding_limit: Option<usize>,
}

/// Per-language resources, loaded on first use and shared afterwards.
#[derive(Debug, Default)]
pub struct ResourceCatalog {
    sources: BTreeMap<String, ResourcePaths>,
    cache: Mutex<HashMap<String, Arc<LanguageResources>>>,
}

impl ResourceCatalog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, lang: &str, paths: ResourcePaths) {
        self.sources.insert(lang.to_string(), paths);
    }

    /// Installs already-built resources, bypassing the files.
    pub fn preload(&mut self, lang: &str, resources: LanguageResources) {
        self.cache
            .get_mut()
            .expect("resource cache")
            .insert(lang.to_string(), Arc::new(resources));
    }

    pub fn has(&self, lang: &str) -> bool {
        self.sources.contains_key(lang)
            || self.cache.lock().expect("resource cache").contains_key(lang)
    }

    pub fn get(&self, lang: &str) -> Result<Arc<LanguageResources>, RankError> {
        let mut cache = self.cache.lock().expect("resource cache");
        if let Some(res) = cache.get(lang) {
            return Ok(Arc::clone(res));
        }
        let paths = self
            .sources
            .get(lang)
            .ok_or_else(|| RankError::MissingResources(lang.to_string()))?;
        let res = Arc::new(LanguageResources {
            embeddings: Embeddings::from_text_file(&paths.embeddings, paths.embedding_limit)?,
            frequencies: FrequencyTable::from_tsv_file(&paths.frequencies)?,
        });
        cache.insert(lang.to_string(), Arc::clone(&res));
        Ok(res)
    }
}
