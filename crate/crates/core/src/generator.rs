//! Substitute generation by prefix-forced decoding with suffix lookahead.
//!
//! For a sentence `x` with complex word `x_c`, the decoder is forced through
//! the tokens of `x_<c`. The most likely word-initial tokens at the next
//! position are completed into words, the complex word itself is removed,
//! and every survivor is re-scored as
//!
//! ```text
//! score(w) = log p(w | x_<c, x) + log p(x_c+1 .. x_c+L | x_<c, w, x)
//! ```
//!
//! where the second term is the lookahead over the first `L` words of the
//! original suffix. With `L = 0` this is plain top-K selection.

use std::collections::HashMap;
use std::ops::Range;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::{
    BackendError, ModelInfo, ScoringBackend, SourceEncoding, TokenDistribution, TokenId,
};
use crate::text::{self, fold};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GenerateError {
    #[error("invalid task: {0}")]
    InvalidTask(String),
    #[error("complex word `{0}` not found in sentence")]
    WordNotFound(String),
    #[error("complex word span starting at char {start} does not begin a token")]
    MisalignedSpan { start: usize },
    #[error("invalid generator config: {0}")]
    InvalidConfig(String),
    #[error("word exceeded {0} subtokens without reaching a boundary")]
    WordTooLong(usize),
    #[error("no candidates survived filtering")]
    NoCandidates,
    #[error(transparent)]
    Backend(#[from] BackendError),
}

impl GenerateError {
    /// Errors caused by the input instance rather than the backend. A
    /// backend that cannot tokenize this particular input counts as an
    /// input error; unreachable or misbehaving backends do not.
    pub fn is_input_error(&self) -> bool {
        !matches!(
            self,
            Self::Backend(
                BackendError::InvalidPrefix(_)
                    | BackendError::EncodingExpired(_)
                    | BackendError::Unavailable(_)
                    | BackendError::Protocol(_)
            )
        )
    }
}

pub type Result<T, E = GenerateError> = std::result::Result<T, E>;

/// One sentence with a designated complex word.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimplificationTask {
    text: String,
    complex_span: Range<usize>,
    lang: String,
}

impl SimplificationTask {
    /// `complex_span` is a char range into `text`.
    pub fn new(text: &str, complex_span: Range<usize>, lang: &str) -> Result<Self> {
        let chars: Vec<char> = text.chars().collect();
        let Range { start, end } = complex_span.clone();
        if start >= end || end > chars.len() {
            return Err(GenerateError::InvalidTask(format!(
                "span {start}..{end} outside text of {} chars",
                chars.len()
            )));
        }
        if chars[start..end].iter().any(|c| c.is_whitespace()) {
            return Err(GenerateError::InvalidTask(
                "complex word contains whitespace".into(),
            ));
        }
        let before = start.checked_sub(1).map(|i| chars[i]);
        if !text::is_boundary_char(before) || !text::is_boundary_char(chars.get(end).copied()) {
            return Err(GenerateError::InvalidTask(format!(
                "span {start}..{end} is not on word boundaries"
            )));
        }
        Ok(Self {
            text: text.to_string(),
            complex_span,
            lang: lang.to_string(),
        })
    }

    /// Uses the first case-insensitive whole-word occurrence of `word`.
    pub fn locate(text: &str, word: &str, lang: &str) -> Result<Self> {
        let span = text::find_word(text, word)
            .ok_or_else(|| GenerateError::WordNotFound(word.to_string()))?;
        Self::new(text, span, lang)
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn complex_span(&self) -> Range<usize> {
        self.complex_span.clone()
    }

    pub fn lang(&self) -> &str {
        &self.lang
    }

    pub fn complex_word(&self) -> &str {
        text::char_slice(&self.text, self.complex_span.clone())
    }
}

/// Decoder start tokens followed by the tokens of the text before the
/// complex word.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecoderPrefix {
    pub ids: Vec<TokenId>,
    pub prefix_word_count: usize,
}

/// Everything the generator needs from the tokenized sentence.
#[derive(Debug, Clone, PartialEq)]
pub struct ForcedContext {
    pub prefix: DecoderPrefix,
    pub suffix_words: Vec<String>,
    /// In-context token ids of each suffix word.
    pub suffix_tokens: Vec<Vec<TokenId>>,
}

impl ForcedContext {
    /// Token ids of the first `words` suffix words.
    pub fn lookahead_ids(&self, words: usize) -> Vec<TokenId> {
        self.suffix_tokens
            .iter()
            .take(words)
            .flatten()
            .copied()
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeneratorConfig {
    /// Number of candidates returned.
    pub k: usize,
    /// Suffix words scored by the lookahead term.
    pub lookahead_words: usize,
    /// Size of the first-token pool drawn before filtering.
    pub first_token_pool: usize,
    pub max_word_subtokens: usize,
}

pub const MAX_LOOKAHEAD_WORDS: usize = 5;

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            k: 50,
            lookahead_words: 3,
            first_token_pool: 200,
            max_word_subtokens: 4,
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(GenerateError::InvalidConfig(m.to_string()));
        if self.k == 0 {
            return bad("k must be at least 1");
        }
        if self.first_token_pool < self.k {
            return bad("first_token_pool must be at least k");
        }
        if self.lookahead_words > MAX_LOOKAHEAD_WORDS {
            return bad("lookahead_words must be at most 5");
        }
        if self.max_word_subtokens == 0 {
            return bad("max_word_subtokens must be at least 1");
        }
        Ok(())
    }
}

/// A generated substitute with its score components.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateWord {
    pub surface: String,
    pub token_path: Vec<TokenId>,
    pub first_token_logprob: f64,
    /// Zero for single-token words.
    pub own_continuation_logprob: f64,
    pub lookahead_logprob: f64,
    pub total_score: f64,
}

/// Orders by total score descending, then surface ascending.
pub fn candidate_order(a: &CandidateWord, b: &CandidateWord) -> std::cmp::Ordering {
    b.total_score
        .total_cmp(&a.total_score)
        .then_with(|| a.surface.cmp(&b.surface))
}

/// Forces the decoder through the text before the complex word.
pub fn build_decoder_prefix(
    task: &SimplificationTask,
    backend: &dyn ScoringBackend,
) -> Result<ForcedContext> {
    let info = backend.model_info()?;
    let tokenized = backend.tokenize(task.text(), task.lang())?;
    let span = task.complex_span();
    let chars: Vec<char> = task.text().chars().collect();

    let content: Vec<(TokenId, Range<usize>)> = tokenized
        .ids
        .iter()
        .zip(&tokenized.offsets)
        .filter(|(id, _)| !info.is_special(**id))
        .map(|(id, r)| (*id, r.clone()))
        .collect();

    // First token reaching into the complex word; anything between its start
    // and the span start must be whitespace.
    let first = content
        .iter()
        .position(|(_, r)| r.end > span.start)
        .ok_or(GenerateError::MisalignedSpan { start: span.start })?;
    let first_start = content[first].1.start;
    let aligned = first_start <= span.start
        && chars[first_start..span.start]
            .iter()
            .all(|c| c.is_whitespace());
    if !aligned {
        return Err(GenerateError::MisalignedSpan { start: span.start });
    }

    let mut ids = info.decoder_start_ids(task.lang())?;
    ids.extend(content[..first].iter().map(|(id, _)| *id));
    let prefix_word_count = text::char_slice(task.text(), 0..span.start)
        .split_whitespace()
        .count();

    // Suffix words with their char spans.
    let mut suffix_spans: Vec<Range<usize>> = Vec::new();
    let mut word_start = None;
    for i in span.end..=chars.len() {
        let ws = chars.get(i).is_none_or(|c| c.is_whitespace());
        match (ws, word_start) {
            (false, None) => word_start = Some(i),
            (true, Some(s)) => {
                suffix_spans.push(s..i);
                word_start = None;
            }
            _ => {}
        }
    }
    let suffix_words = suffix_spans
        .iter()
        .map(|r| chars[r.clone()].iter().collect())
        .collect();
    let mut suffix_tokens = vec![Vec::new(); suffix_spans.len()];
    for (id, r) in content.iter().filter(|(_, r)| r.start >= span.end) {
        if let Some(w) = suffix_spans.iter().position(|s| r.start < s.end) {
            suffix_tokens[w].push(*id);
        }
    }

    Ok(ForcedContext {
        prefix: DecoderPrefix {
            ids,
            prefix_word_count,
        },
        suffix_words,
        suffix_tokens,
    })
}

/// Top-`pool` next tokens that can begin a word.
///
/// Special tokens, word-internal pieces and pure punctuation are removed.
pub fn first_token_candidates(
    backend: &dyn ScoringBackend,
    enc: &SourceEncoding,
    prefix: &DecoderPrefix,
    pool: usize,
) -> Result<TokenDistribution> {
    let info = backend.model_info()?;
    let dist = backend.next_token_logprobs(enc, &prefix.ids, pool)?;
    let mut kept = Vec::with_capacity(dist.entries.len());
    for (id, lp) in dist.entries {
        if info.is_special(id) {
            continue;
        }
        let piece = backend.token_piece(id)?;
        let surface = info.boundary.surface(&piece).trim();
        if info.boundary.starts_word(&piece) && !surface.is_empty() && !text::is_punctuation(surface)
        {
            kept.push((id, lp));
        }
    }
    Ok(TokenDistribution::new(kept, dist.truncated))
}

/// A first token greedily extended to a whole word.
#[derive(Debug, Clone, PartialEq)]
pub struct CompletedWord {
    pub token_path: Vec<TokenId>,
    pub surface: String,
    pub own_continuation_logprob: f64,
}

/// Appends argmax tokens while they continue the current word.
pub fn complete_word(
    backend: &dyn ScoringBackend,
    info: &ModelInfo,
    enc: &SourceEncoding,
    prefix: &DecoderPrefix,
    first_token: TokenId,
    max_word_subtokens: usize,
) -> Result<CompletedWord> {
    let mut path = vec![first_token];
    let mut continuation = 0.0;
    let mut last_piece = backend.token_piece(first_token)?;
    while !info.boundary.ends_word(&last_piece) {
        let decoder: Vec<TokenId> = prefix.ids.iter().chain(&path).copied().collect();
        let Some((next, lp)) = backend.next_token_logprobs(enc, &decoder, 1)?.argmax() else {
            break;
        };
        if info.is_special(next) {
            break;
        }
        let piece = backend.token_piece(next)?;
        if !info.boundary.continues_word(&last_piece, &piece)
            || text::is_punctuation(info.boundary.surface(&piece).trim())
        {
            break;
        }
        if path.len() >= max_word_subtokens {
            return Err(GenerateError::WordTooLong(max_word_subtokens));
        }
        path.push(next);
        continuation += lp;
        last_piece = piece;
    }
    let surface = backend.detokenize(&path)?.trim().to_string();
    Ok(CompletedWord {
        token_path: path,
        surface,
        own_continuation_logprob: continuation,
    })
}

/// Generates up to `cfg.k` substitutes, best first.
pub fn generate_candidates(
    task: &SimplificationTask,
    backend: &dyn ScoringBackend,
    cfg: &GeneratorConfig,
) -> Result<Vec<CandidateWord>> {
    cfg.validate()?;
    let info = backend.model_info()?;
    if !info.supports(task.lang()) {
        return Err(BackendError::UnsupportedLanguage(task.lang().to_string()).into());
    }
    let ctx = build_decoder_prefix(task, backend)?;
    let enc = backend.encode_source(task.text(), task.lang(), task.lang())?;
    let firsts = first_token_candidates(backend, &enc, &ctx.prefix, cfg.first_token_pool)?;

    let complex = fold(task.complex_word());
    let capitalize = text::starts_uppercase(task.complex_word());
    let lookahead = ctx.lookahead_ids(cfg.lookahead_words);

    let mut best: HashMap<String, CandidateWord> = HashMap::new();
    for (first, first_lp) in firsts.entries {
        let word = match complete_word(
            backend,
            &info,
            &enc,
            &ctx.prefix,
            first,
            cfg.max_word_subtokens,
        ) {
            Ok(w) => w,
            Err(GenerateError::WordTooLong(_)) => continue,
            Err(e) => return Err(e),
        };
        let surface = text::with_first_case(&word.surface, capitalize);
        if surface.is_empty() || fold(&surface) == complex {
            continue;
        }
        let lookahead_logprob = if lookahead.is_empty() {
            0.0
        } else {
            let decoder: Vec<TokenId> =
                ctx.prefix.ids.iter().chain(&word.token_path).copied().collect();
            backend.score_continuation(&enc, &decoder, &lookahead)?
        };
        let total_score = first_lp + word.own_continuation_logprob + lookahead_logprob;
        if !total_score.is_finite() {
            continue;
        }
        let candidate = CandidateWord {
            surface: surface.clone(),
            token_path: word.token_path,
            first_token_logprob: first_lp,
            own_continuation_logprob: word.own_continuation_logprob,
            lookahead_logprob,
            total_score,
        };
        match best.get(&surface) {
            Some(existing) if existing.total_score >= total_score => {}
            _ => {
                best.insert(surface, candidate);
            }
        }
    }

    let mut candidates: Vec<CandidateWord> = best.into_values().collect();
    candidates.sort_by(candidate_order);
    candidates.truncate(cfg.k);
    if candidates.is_empty() {
        return Err(GenerateError::NoCandidates);
    }
    Ok(candidates)
}
