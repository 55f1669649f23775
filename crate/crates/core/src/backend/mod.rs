//! Model-scoring contract for paraphrase backends.
//!
//! A backend wraps an autoregressive encoder-decoder model and answers
//! stateless queries against an encoded source sentence: the next-token
//! distribution after a decoder prefix, and the summed log-probability of a
//! forced continuation. Two implementations ship with the crate:
//!
//! - [`ToyBackend`]: an exactly-computable position-aligned lexicon model used
//!   as an oracle fixture.
//! - [`RemoteBackend`]: a JSON-over-HTTP client for an external model server.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::Range;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub mod remote;
pub mod toy;
pub mod wire;

pub use remote::RemoteBackend;
pub use toy::{ToyBackend, ToyLexicon};

/// Index into a backend-owned vocabulary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TokenId(pub u32);

impl fmt::Display for TokenId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BackendError {
    #[error("unsupported language `{0}`")]
    UnsupportedLanguage(String),
    #[error("empty input")]
    EmptyInput,
    #[error("invalid decoder prefix: {0}")]
    InvalidPrefix(String),
    #[error("word `{0}` is not in the backend vocabulary")]
    OutOfVocabulary(String),
    #[error("encoding `{0}` expired or unknown")]
    EncodingExpired(String),
    #[error("backend unavailable: {0}")]
    Unavailable(String),
    #[error("protocol error: {0}")]
    Protocol(String),
}

pub type Result<T, E = BackendError> = std::result::Result<T, E>;

/// How a tokenizer marks word boundaries inside its vocabulary pieces.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum BoundaryConvention {
    /// Word-initial pieces start with the marker (SentencePiece `▁`).
    MarkerPrefix(String),
    /// Word-final pieces end with the marker (BPE `</w>`).
    MarkerSuffix(String),
    /// Every token is a whole word.
    None,
}

impl BoundaryConvention {
    /// Strips the marker from a raw vocabulary piece.
    pub fn surface<'a>(&self, piece: &'a str) -> &'a str {
        match self {
            Self::MarkerPrefix(m) => piece.strip_prefix(m.as_str()).unwrap_or(piece),
            Self::MarkerSuffix(m) => piece.strip_suffix(m.as_str()).unwrap_or(piece),
            Self::None => piece,
        }
    }

    /// Whether `piece` may start a new word when it follows a completed word.
    pub fn starts_word(&self, piece: &str) -> bool {
        match self {
            Self::MarkerPrefix(m) => piece.starts_with(m.as_str()),
            Self::MarkerSuffix(_) | Self::None => true,
        }
    }

    /// Whether `piece`, appended to an unfinished word, continues that word.
    /// `previous` is the last piece of the unfinished word.
    pub fn continues_word(&self, previous: &str, piece: &str) -> bool {
        match self {
            Self::MarkerPrefix(m) => !piece.starts_with(m.as_str()),
            Self::MarkerSuffix(m) => !previous.ends_with(m.as_str()),
            Self::None => false,
        }
    }

    /// Whether a word ending in `piece` is already complete without
    /// looking at the next token.
    pub fn ends_word(&self, piece: &str) -> bool {
        match self {
            Self::MarkerPrefix(_) => false,
            Self::MarkerSuffix(m) => piece.ends_with(m.as_str()),
            Self::None => true,
        }
    }
}

/// Role of a token the decoder prefix must begin with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StartRole {
    Bos,
    Eos,
    LangTag,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpecialTokens {
    pub bos: Option<TokenId>,
    pub eos: TokenId,
    pub lang_tags: BTreeMap<String, TokenId>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelInfo {
    pub vocab_size: usize,
    pub boundary: BoundaryConvention,
    pub special_tokens: SpecialTokens,
    pub supported_languages: Vec<String>,
    /// Tokens the caller must put at the head of every decoder prefix.
    pub decoder_start: Vec<StartRole>,
}

impl ModelInfo {
    pub fn validate(&self) -> Result<()> {
        if self.supported_languages.is_empty() {
            return Err(BackendError::Protocol("no supported languages".into()));
        }
        let specials = self
            .special_tokens
            .bos
            .iter()
            .chain(std::iter::once(&self.special_tokens.eos))
            .chain(self.special_tokens.lang_tags.values());
        for id in specials {
            if id.0 as usize >= self.vocab_size {
                return Err(BackendError::Protocol(format!(
                    "special token {id} outside vocabulary of {}",
                    self.vocab_size
                )));
            }
        }
        Ok(())
    }

    pub fn supports(&self, lang: &str) -> bool {
        self.supported_languages.iter().any(|l| l == lang)
    }

    pub fn is_special(&self, id: TokenId) -> bool {
        let s = &self.special_tokens;
        s.bos == Some(id) || s.eos == id || s.lang_tags.values().any(|&t| t == id)
    }

    /// Resolves [`Self::decoder_start`] for a target language.
    pub fn decoder_start_ids(&self, tgt_lang: &str) -> Result<Vec<TokenId>> {
        self.decoder_start
            .iter()
            .map(|role| match role {
                StartRole::Bos => self.special_tokens.bos.ok_or_else(|| {
                    BackendError::Protocol("decoder start requires bos but none declared".into())
                }),
                StartRole::Eos => Ok(self.special_tokens.eos),
                StartRole::LangTag => self
                    .special_tokens
                    .lang_tags
                    .get(tgt_lang)
                    .copied()
                    .ok_or_else(|| BackendError::UnsupportedLanguage(tgt_lang.to_string())),
            })
            .collect()
    }
}

/// Top-N next-token log-probabilities for one decoder position.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenDistribution {
    pub entries: Vec<(TokenId, f64)>,
    pub truncated: bool,
}

impl TokenDistribution {
    /// Builds a distribution, sorting by logprob descending (ties by id).
    pub fn new(mut entries: Vec<(TokenId, f64)>, truncated: bool) -> Self {
        entries.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        Self { entries, truncated }
    }

    pub fn logprob(&self, id: TokenId) -> Option<f64> {
        self.entries.iter().find(|(t, _)| *t == id).map(|&(_, lp)| lp)
    }

    pub fn argmax(&self) -> Option<(TokenId, f64)> {
        self.entries.first().copied()
    }

    pub fn mass(&self) -> f64 {
        self.entries.iter().map(|(_, lp)| lp.exp()).sum()
    }

    pub fn check_invariants(&self) -> Result<()> {
        let bad = |m: String| Err(BackendError::Protocol(m));
        let mut seen = std::collections::HashSet::new();
        for (i, &(id, lp)) in self.entries.iter().enumerate() {
            if !(lp <= 0.0) {
                return bad(format!("logprob {lp} for token {id} is positive or NaN"));
            }
            if !seen.insert(id) {
                return bad(format!("duplicate token {id}"));
            }
            if i > 0 && self.entries[i - 1].1 < lp {
                return bad("entries not sorted by logprob".into());
            }
        }
        if !self.truncated && (self.mass() - 1.0).abs() > 1e-4 {
            return bad(format!("untruncated mass {} is not 1", self.mass()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EncodingHandle {
    /// In-process backends re-derive everything from the source ids.
    Local,
    /// Server-side cache key.
    Remote(String),
}

/// An encoded source sentence that can be queried any number of times.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceEncoding {
    pub source_ids: Vec<TokenId>,
    pub src_lang: String,
    pub tgt_lang: String,
    pub handle: EncodingHandle,
}

/// Tokenizer output: ids plus char-offset spans into the input text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tokenized {
    pub ids: Vec<TokenId>,
    pub offsets: Vec<Range<usize>>,
}

/// The scoring contract consumed by the generator.
///
/// Every method is a read-only query; implementations must be safe to call
/// from many threads at once.
pub trait ScoringBackend: Send + Sync {
    fn model_info(&self) -> Result<ModelInfo>;

    fn tokenize(&self, text: &str, lang: &str) -> Result<Tokenized>;

    fn detokenize(&self, ids: &[TokenId]) -> Result<String>;

    /// Raw vocabulary piece for `id`, boundary marker included.
    fn token_piece(&self, id: TokenId) -> Result<String>;

    fn encode_source(&self, text: &str, src_lang: &str, tgt_lang: &str)
        -> Result<SourceEncoding>;

    fn next_token_logprobs(
        &self,
        enc: &SourceEncoding,
        decoder_prefix: &[TokenId],
        top_n: usize,
    ) -> Result<TokenDistribution>;

    /// Sum of conditional log-probabilities of `continuation` after
    /// `decoder_prefix`.
    fn score_continuation(
        &self,
        enc: &SourceEncoding,
        decoder_prefix: &[TokenId],
        continuation: &[TokenId],
    ) -> Result<f64>;
}

impl<B: ScoringBackend + ?Sized> ScoringBackend for Box<B> {
    fn model_info(&self) -> Result<ModelInfo> {
        (**self).model_info()
    }
    fn tokenize(&self, text: &str, lang: &str) -> Result<Tokenized> {
        (**self).tokenize(text, lang)
    }
    fn detokenize(&self, ids: &[TokenId]) -> Result<String> {
        (**self).detokenize(ids)
    }
    fn token_piece(&self, id: TokenId) -> Result<String> {
        (**self).token_piece(id)
    }
    fn encode_source(&self, text: &str, src: &str, tgt: &str) -> Result<SourceEncoding> {
        (**self).encode_source(text, src, tgt)
    }
    fn next_token_logprobs(
        &self,
        enc: &SourceEncoding,
        prefix: &[TokenId],
        top_n: usize,
    ) -> Result<TokenDistribution> {
        (**self).next_token_logprobs(enc, prefix, top_n)
    }
    fn score_continuation(
        &self,
        enc: &SourceEncoding,
        prefix: &[TokenId],
        continuation: &[TokenId],
    ) -> Result<f64> {
        (**self).score_continuation(enc, prefix, continuation)
    }
}
