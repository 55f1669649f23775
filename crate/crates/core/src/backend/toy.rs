//! Exactly-computable toy paraphrase model.
//!
//! Decoding is position-aligned with the source: the word emitted at output
//! position `t` depends only on source word `s_t` and the previous output
//! word, via
//!
//! ```text
//! p(w | w_prev, s_t) = lex(s_t, w) * big(w_prev, w) / Z
//! ```
//!
//! where `Z` sums over the lexicon row of `s_t` and `big` defaults to 1.
//! Words are emitted capitalized exactly when `s_t` is capitalized in the
//! source. Source words without a lexicon row copy themselves. Past the last source
//! word the model emits end-of-sequence with probability 1.
//!
//! In subword mode, words longer than [`SPLIT_AT`] chars become two pieces:
//! a boundary-marked head of [`SPLIT_AT`] chars and an unmarked tail. The head
//! carries the word's probability and the tail is then (normally) certain.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::ops::Range;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{
    BackendError, BoundaryConvention, EncodingHandle, ModelInfo, Result, ScoringBackend,
    SourceEncoding, SpecialTokens, StartRole, TokenDistribution, TokenId, Tokenized,
};
use crate::text::{fold, starts_uppercase, with_first_case};

pub const TOY_LANG: &str = "toy";
pub const MARKER: &str = "▁";
/// Subword mode splits words longer than this many chars after this char.
pub const SPLIT_AT: usize = 6;

const BOS: TokenId = TokenId(0);
const EOS: TokenId = TokenId(1);
const LANG_TAG: TokenId = TokenId(2);

/// Lexicon and bigram tables defining a toy model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyLexicon {
    /// Source word to weighted target words.
    pub lex: BTreeMap<String, BTreeMap<String, f64>>,
    /// Exceptions to the default bigram weight of 1: previous word to next
    /// word to weight.
    #[serde(default)]
    pub bigram: BTreeMap<String, BTreeMap<String, f64>>,
    /// Words that only appear in source text and have no lexicon row.
    #[serde(default)]
    pub extra_words: Vec<String>,
}

impl ToyLexicon {
    /// The normative "he attempted to evade the issue" fixture.
    pub fn evade_fixture() -> Self {
        fn row(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
            pairs.iter().map(|&(w, p)| (w.to_string(), p)).collect()
        }
        let lex = [
            ("he", row(&[("he", 1.0)])),
            ("attempted", row(&[("attempted", 0.5), ("tried", 0.3), ("sought", 0.2)])),
            ("to", row(&[("to", 1.0)])),
            (
                "evade",
                row(&[("evade", 0.4), ("avoid", 0.3), ("get", 0.2), ("dodge", 0.1)]),
            ),
            ("the", row(&[("the", 0.9), ("this", 0.1)])),
            ("issue", row(&[("issue", 0.6), ("question", 0.25), ("matter", 0.15)])),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect();
        let bigram = [("get".to_string(), row(&[("the", 0.05), ("this", 1.0)]))].into();
        Self {
            lex,
            bigram,
            extra_words: Vec::new(),
        }
    }

    pub fn from_json_file(path: &Path) -> std::io::Result<Self> {
        let data = std::fs::read_to_string(path)?;
        serde_json::from_str(&data)
            .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))
    }

    pub fn bigram_weight(&self, prev: Option<&str>, next: &str) -> f64 {
        prev.and_then(|p| self.bigram.get(p))
            .and_then(|row| row.get(next))
            .copied()
            .unwrap_or(1.0)
    }

    /// Lexicon row of a source word, falling back to the identity row.
    pub fn row(&self, source_word: &str) -> BTreeMap<String, f64> {
        self.lex
            .get(source_word)
            .cloned()
            .unwrap_or_else(|| [(source_word.to_string(), 1.0)].into())
    }

    /// Unnormalized-then-normalized word distribution at one position.
    pub fn word_distribution(&self, source_word: &str, prev: Option<&str>) -> Vec<(String, f64)> {
        let weighted: Vec<(String, f64)> = self
            .row(source_word)
            .into_iter()
            .map(|(w, p)| {
                let weight = p * self.bigram_weight(prev, &w);
                (w, weight)
            })
            .collect();
        let z: f64 = weighted.iter().map(|(_, p)| p).sum();
        weighted.into_iter().map(|(w, p)| (w, p / z)).collect()
    }

    fn words(&self) -> BTreeSet<String> {
        let mut words = BTreeSet::new();
        for (src, row) in &self.lex {
            words.insert(src.clone());
            words.extend(row.keys().cloned());
        }
        for row in self.bigram.values() {
            words.extend(row.keys().cloned());
        }
        words.extend(self.bigram.keys().cloned());
        words.extend(self.extra_words.iter().cloned());
        words
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(BackendError::Protocol(m));
        for w in self.words() {
            if w.is_empty() || w.chars().any(char::is_whitespace) || w != fold(&w) {
                return bad(format!("toy word `{w}` must be non-empty, lowercase, single token"));
            }
        }
        for (src, row) in &self.lex {
            if row.is_empty() {
                return bad(format!("empty lexicon row for `{src}`"));
            }
            if let Some((w, p)) = row.iter().find(|(_, &p)| !(p > 0.0 && p.is_finite())) {
                return bad(format!("lex({src}, {w}) = {p} must be positive"));
            }
        }
        for (prev, row) in &self.bigram {
            if let Some((w, p)) = row.iter().find(|(_, &p)| !(p > 0.0 && p.is_finite())) {
                return bad(format!("big({prev}, {w}) = {p} must be positive"));
            }
        }
        Ok(())
    }
}

/// Splits a surface form into vocabulary pieces.
fn split_pieces(form: &str, subword: bool) -> Vec<String> {
    if !subword {
        return vec![form.to_string()];
    }
    let chars: Vec<char> = form.chars().collect();
    if chars.len() > SPLIT_AT {
        let head: String = chars[..SPLIT_AT].iter().collect();
        let tail: String = chars[SPLIT_AT..].iter().collect();
        vec![format!("{MARKER}{head}"), tail]
    } else {
        vec![format!("{MARKER}{form}")]
    }
}

/// Parsed state of a decoder prefix.
struct PrefixState {
    words: Vec<String>,
    /// Whether each word was written capitalized.
    upper: Vec<bool>,
    /// Head piece (marker stripped) of a split word awaiting its tail.
    pending: Option<String>,
    ended: bool,
}

/// See the module docs.
#[derive(Debug, Clone)]
pub struct ToyBackend {
    lexicon: ToyLexicon,
    subword: bool,
    pieces: Vec<String>,
    piece_ids: HashMap<String, TokenId>,
    /// Surface forms (lowercase and capitalized) of every vocabulary word.
    forms: HashMap<String, String>,
    info: ModelInfo,
}

impl ToyBackend {
    pub fn new(lexicon: ToyLexicon, subword: bool) -> Result<Self> {
        lexicon.validate()?;
        let mut forms = HashMap::new();
        let mut piece_set = BTreeSet::new();
        for word in lexicon.words() {
            for form in [word.clone(), with_first_case(&word, true)] {
                piece_set.extend(split_pieces(&form, subword));
                forms.insert(form, word.clone());
            }
        }
        if subword {
            // A six-char whole word and a split head would share one piece.
            for form in forms.keys().filter(|f| f.chars().count() > SPLIT_AT) {
                let head = &split_pieces(form, true)[0][MARKER.len()..];
                if forms.contains_key(head) {
                    return Err(BackendError::Protocol(format!(
                        "toy word `{head}` collides with the head of `{form}`"
                    )));
                }
            }
        }
        let mut pieces = vec!["<s>".to_string(), "</s>".to_string(), "__toy__".to_string()];
        pieces.extend(piece_set);
        let piece_ids = pieces
            .iter()
            .enumerate()
            .map(|(i, p)| (p.clone(), TokenId(i as u32)))
            .collect();
        let info = ModelInfo {
            vocab_size: pieces.len(),
            boundary: if subword {
                BoundaryConvention::MarkerPrefix(MARKER.to_string())
            } else {
                BoundaryConvention::None
            },
            special_tokens: SpecialTokens {
                bos: Some(BOS),
                eos: EOS,
                lang_tags: [(TOY_LANG.to_string(), LANG_TAG)].into(),
            },
            supported_languages: vec![TOY_LANG.to_string()],
            decoder_start: vec![StartRole::Bos, StartRole::LangTag],
        };
        Ok(Self {
            lexicon,
            subword,
            pieces,
            piece_ids,
            forms,
            info,
        })
    }

    /// Word-level toy backend on the normative fixture.
    pub fn evade_fixture() -> Self {
        Self::new(ToyLexicon::evade_fixture(), false).expect("fixture is valid")
    }

    pub fn lexicon(&self) -> &ToyLexicon {
        &self.lexicon
    }

    pub fn is_subword(&self) -> bool {
        self.subword
    }

    pub fn id_of(&self, piece: &str) -> Option<TokenId> {
        self.piece_ids.get(piece).copied()
    }

    /// Ids for a whole word, split into pieces when in subword mode.
    pub fn word_ids(&self, form: &str) -> Result<Vec<TokenId>> {
        split_pieces(form, self.subword)
            .iter()
            .map(|p| {
                self.id_of(p)
                    .ok_or_else(|| BackendError::OutOfVocabulary(form.to_string()))
            })
            .collect()
    }

    fn piece(&self, id: TokenId) -> Result<&str> {
        self.pieces
            .get(id.0 as usize)
            .map(String::as_str)
            .ok_or_else(|| BackendError::OutOfVocabulary(format!("token id {id}")))
    }

    fn check_lang(&self, lang: &str) -> Result<()> {
        if lang == TOY_LANG {
            Ok(())
        } else {
            Err(BackendError::UnsupportedLanguage(lang.to_string()))
        }
    }

    /// Source positions (case-folded words) of an encoding.
    pub fn source_words(&self, enc: &SourceEncoding) -> Result<Vec<String>> {
        let state = self.parse_words(&enc.source_ids)?;
        Ok(state.words)
    }

    fn parse_words(&self, ids: &[TokenId]) -> Result<PrefixState> {
        let invalid = |m: String| Err(BackendError::InvalidPrefix(m));
        let mut state = PrefixState {
            words: Vec::new(),
            upper: Vec::new(),
            pending: None,
            ended: false,
        };
        for &id in ids {
            if state.ended {
                return invalid("tokens after end-of-sequence".into());
            }
            if id == EOS {
                if state.pending.is_some() {
                    return invalid("end-of-sequence inside a split word".into());
                }
                state.ended = true;
                continue;
            }
            if id == BOS || id == LANG_TAG {
                return invalid(format!("special token {id} inside content"));
            }
            let piece = self.piece(id)?;
            if !self.subword {
                state.words.push(self.forms[piece].clone());
                state.upper.push(starts_uppercase(piece));
            } else if let Some(stripped) = piece.strip_prefix(MARKER) {
                if state.pending.is_some() {
                    return invalid(format!("split word interrupted by `{piece}`"));
                }
                match self.forms.get(stripped) {
                    Some(word) => {
                        state.words.push(word.clone());
                        state.upper.push(starts_uppercase(stripped));
                    }
                    None => state.pending = Some(stripped.to_string()),
                }
            } else {
                let Some(head) = state.pending.take() else {
                    return invalid(format!("word-internal piece `{piece}` starts a word"));
                };
                match self.forms.get(&format!("{head}{piece}")) {
                    Some(word) => {
                        state.words.push(word.clone());
                        state.upper.push(starts_uppercase(&head));
                    }
                    None => return invalid(format!("`{head}{piece}` is not a toy word")),
                }
            }
        }
        Ok(state)
    }

    /// Full next-token distribution as (id, probability) pairs.
    fn next_probs(&self, enc: &SourceEncoding, prefix: &[TokenId]) -> Result<Vec<(TokenId, f64)>> {
        let start = [BOS, LANG_TAG];
        let Some(content) = prefix.strip_prefix(&start[..]) else {
            return Err(BackendError::InvalidPrefix(
                "decoder prefix must begin with <s> __toy__".into(),
            ));
        };
        let source_state = self.parse_words(&enc.source_ids)?;
        let source = source_state.words;
        let state = self.parse_words(content)?;
        if state.ended {
            return Ok(vec![(EOS, 1.0)]);
        }
        let t = state.words.len();
        let prev = state.words.last().map(String::as_str);

        if let Some(head) = state.pending {
            let head = fold(&head);
            let dist = source
                .get(t)
                .map(|s| self.lexicon.word_distribution(s, prev))
                .unwrap_or_default();
            let mut tails: Vec<(String, f64)> = dist
                .into_iter()
                .filter_map(|(w, p)| tail_after(&w, &head).map(|tail| (tail, p)))
                .collect();
            if tails.is_empty() {
                // Zero-probability prefix: spread mass over every word with this head.
                let mut words: Vec<&String> = self.forms.values().collect();
                words.sort();
                words.dedup();
                tails = words
                    .into_iter()
                    .filter_map(|w| tail_after(w, &head).map(|tail| (tail, 1.0)))
                    .collect();
            }
            let z: f64 = tails.iter().map(|(_, p)| p).sum();
            return tails
                .into_iter()
                .map(|(tail, p)| Ok((self.lookup(&tail)?, p / z)))
                .collect();
        }

        let Some(source_word) = source.get(t) else {
            return Ok(vec![(EOS, 1.0)]);
        };
        let upper = source_state.upper[t];
        let mut by_id: BTreeMap<TokenId, f64> = BTreeMap::new();
        for (word, p) in self.lexicon.word_distribution(source_word, prev) {
            let form = if upper { with_first_case(&word, true) } else { word };
            let first = self.word_ids(&form)?[0];
            *by_id.entry(first).or_default() += p;
        }
        Ok(by_id.into_iter().collect())
    }

    fn lookup(&self, piece: &str) -> Result<TokenId> {
        self.id_of(piece)
            .ok_or_else(|| BackendError::OutOfVocabulary(piece.to_string()))
    }
}

fn tail_after(word: &str, head: &str) -> Option<String> {
    let chars: Vec<char> = word.chars().collect();
    (chars.len() > SPLIT_AT && chars[..SPLIT_AT].iter().collect::<String>() == head)
        .then(|| chars[SPLIT_AT..].iter().collect())
}

impl ScoringBackend for ToyBackend {
    fn model_info(&self) -> Result<ModelInfo> {
        Ok(self.info.clone())
    }

    fn tokenize(&self, text: &str, lang: &str) -> Result<Tokenized> {
        self.check_lang(lang)?;
        if text.trim().is_empty() {
            return Err(BackendError::EmptyInput);
        }
        let mut ids = Vec::new();
        let mut offsets: Vec<Range<usize>> = Vec::new();
        let mut word_start: Option<usize> = None;
        let chars: Vec<char> = text.chars().collect();
        for i in 0..=chars.len() {
            let ws = chars.get(i).is_none_or(|c| c.is_whitespace());
            match (ws, word_start) {
                (false, None) => word_start = Some(i),
                (true, Some(start)) => {
                    let form: String = chars[start..i].iter().collect();
                    if !self.forms.contains_key(&form) {
                        return Err(BackendError::OutOfVocabulary(form));
                    }
                    let mut pos = start;
                    for (piece, id) in split_pieces(&form, self.subword)
                        .iter()
                        .zip(self.word_ids(&form)?)
                    {
                        let len = piece.strip_prefix(MARKER).unwrap_or(piece).chars().count();
                        ids.push(id);
                        offsets.push(pos..pos + len);
                        pos += len;
                    }
                    word_start = None;
                }
                _ => {}
            }
        }
        Ok(Tokenized { ids, offsets })
    }

    fn detokenize(&self, ids: &[TokenId]) -> Result<String> {
        let mut out = String::new();
        for &id in ids {
            if self.info.is_special(id) {
                continue;
            }
            let piece = self.piece(id)?;
            if self.subword {
                out.push_str(&piece.replace(MARKER, " "));
            } else {
                out.push(' ');
                out.push_str(piece);
            }
        }
        Ok(out.trim().to_string())
    }

    fn token_piece(&self, id: TokenId) -> Result<String> {
        self.piece(id).map(str::to_string)
    }

    fn encode_source(&self, text: &str, src_lang: &str, tgt_lang: &str) -> Result<SourceEncoding> {
        self.check_lang(src_lang)?;
        self.check_lang(tgt_lang)?;
        let tokenized = self.tokenize(text, src_lang)?;
        Ok(SourceEncoding {
            source_ids: tokenized.ids,
            src_lang: src_lang.to_string(),
            tgt_lang: tgt_lang.to_string(),
            handle: EncodingHandle::Local,
        })
    }

    fn next_token_logprobs(
        &self,
        enc: &SourceEncoding,
        decoder_prefix: &[TokenId],
        top_n: usize,
    ) -> Result<TokenDistribution> {
        if top_n == 0 {
            return Err(BackendError::Protocol("top_n must be at least 1".into()));
        }
        let probs = self.next_probs(enc, decoder_prefix)?;
        let mut dist = TokenDistribution::new(
            probs.into_iter().map(|(id, p)| (id, p.ln())).collect(),
            top_n < self.info.vocab_size,
        );
        dist.entries.truncate(top_n);
        Ok(dist)
    }

    fn score_continuation(
        &self,
        enc: &SourceEncoding,
        decoder_prefix: &[TokenId],
        continuation: &[TokenId],
    ) -> Result<f64> {
        if continuation.is_empty() {
            return Err(BackendError::EmptyInput);
        }
        let mut prefix = decoder_prefix.to_vec();
        let mut total = 0.0;
        for &id in continuation {
            let p = self
                .next_probs(enc, &prefix)?
                .into_iter()
                .find(|&(t, _)| t == id)
                .map_or(0.0, |(_, p)| p);
            total += p.ln();
            if p == 0.0 {
                // The rest of the path cannot be parsed reliably; its mass is zero anyway.
                return Ok(f64::NEG_INFINITY);
            }
            prefix.push(id);
        }
        Ok(total)
    }
}
