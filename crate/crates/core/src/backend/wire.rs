//! JSON bodies of the `/v1/*` model-server protocol.
//!
//! Offsets on the wire are char offsets `[start, end]`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{BackendError, BoundaryConvention, ModelInfo, SpecialTokens, StartRole, TokenId};

/// Decoder start convention assumed when a server omits `decoder_start`:
/// NLLB-style `</s> <lang_tag>`.
pub const DEFAULT_DECODER_START: [StartRole; 2] = [StartRole::Eos, StartRole::LangTag];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryBody {
    /// One of `marker-prefix`, `marker-suffix`, `none`.
    pub convention: String,
    #[serde(default)]
    pub marker: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelInfoBody {
    pub vocab_size: usize,
    pub boundary: BoundaryBody,
    pub special_tokens: SpecialTokens,
    pub languages: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decoder_start: Option<Vec<StartRole>>,
}

impl TryFrom<ModelInfoBody> for ModelInfo {
    type Error = BackendError;

    fn try_from(body: ModelInfoBody) -> Result<Self, Self::Error> {
        let boundary = match body.boundary.convention.as_str() {
            "marker-prefix" => BoundaryConvention::MarkerPrefix(body.boundary.marker),
            "marker-suffix" => BoundaryConvention::MarkerSuffix(body.boundary.marker),
            "none" => BoundaryConvention::None,
            other => {
                return Err(BackendError::Protocol(format!(
                    "unknown boundary convention `{other}`"
                )))
            }
        };
        let info = ModelInfo {
            vocab_size: body.vocab_size,
            boundary,
            special_tokens: body.special_tokens,
            supported_languages: body.languages,
            decoder_start: body
                .decoder_start
                .unwrap_or_else(|| DEFAULT_DECODER_START.to_vec()),
        };
        info.validate()?;
        Ok(info)
    }
}

impl From<&ModelInfo> for ModelInfoBody {
    fn from(info: &ModelInfo) -> Self {
        let (convention, marker) = match &info.boundary {
            BoundaryConvention::MarkerPrefix(m) => ("marker-prefix", m.clone()),
            BoundaryConvention::MarkerSuffix(m) => ("marker-suffix", m.clone()),
            BoundaryConvention::None => ("none", String::new()),
        };
        Self {
            vocab_size: info.vocab_size,
            boundary: BoundaryBody {
                convention: convention.to_string(),
                marker,
            },
            special_tokens: info.special_tokens.clone(),
            languages: info.supported_languages.clone(),
            decoder_start: Some(info.decoder_start.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenizeRequest {
    pub text: String,
    pub lang: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenizeResponse {
    pub ids: Vec<TokenId>,
    pub offsets: Vec<[usize; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetokenizeRequest {
    pub ids: Vec<TokenId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetokenizeResponse {
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodeRequest {
    pub text: String,
    pub src_lang: String,
    pub tgt_lang: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodeResponse {
    pub encoding_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NextTokenRequest {
    pub encoding_id: String,
    pub prefix_ids: Vec<TokenId>,
    pub top_n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NextTokenResponse {
    pub entries: Vec<(TokenId, f64)>,
    pub truncated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRequest {
    pub encoding_id: String,
    pub prefix_ids: Vec<TokenId>,
    pub continuation_ids: Vec<TokenId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreResponse {
    /// `null` stands for a zero-probability continuation, since JSON has no
    /// infinity.
    #[serde(deserialize_with = "null_as_neg_infinity")]
    pub logprob: f64,
}

fn null_as_neg_infinity<'de, D: serde::Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
    Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NEG_INFINITY))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error_code: String,
    #[serde(default)]
    pub message: String,
}

impl ErrorBody {
    pub fn into_error(self) -> BackendError {
        match self.error_code.as_str() {
            "UNSUPPORTED_LANGUAGE" => BackendError::UnsupportedLanguage(self.message),
            "INVALID_PREFIX" => BackendError::InvalidPrefix(self.message),
            "EMPTY_INPUT" => BackendError::EmptyInput,
            other => BackendError::Protocol(format!("{other}: {}", self.message)),
        }
    }

    /// Wire form of a backend error, with its HTTP status.
    pub fn from_error(err: &BackendError) -> (u16, Self) {
        let (status, code) = match err {
            BackendError::UnsupportedLanguage(_) => (400, "UNSUPPORTED_LANGUAGE"),
            BackendError::InvalidPrefix(_) => (400, "INVALID_PREFIX"),
            BackendError::EmptyInput => (400, "EMPTY_INPUT"),
            BackendError::EncodingExpired(_) => (404, "EXPIRED_ENCODING"),
            BackendError::Unavailable(_) => (503, "MODEL_NOT_LOADED"),
            BackendError::OutOfVocabulary(_) | BackendError::Protocol(_) => (400, "BAD_REQUEST"),
        };
        (
            status,
            Self {
                error_code: code.to_string(),
                message: err.to_string(),
            },
        )
    }
}

/// Language-tag map helper for building [`SpecialTokens`] by hand.
pub fn lang_tags<I: IntoIterator<Item = (&'static str, u32)>>(tags: I) -> BTreeMap<String, TokenId> {
    tags.into_iter()
        .map(|(code, id)| (code.to_string(), TokenId(id)))
        .collect()
}
