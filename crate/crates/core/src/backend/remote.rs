//! Client for a model server speaking the `/v1/*` JSON protocol.

use std::collections::HashMap;
use std::sync::Mutex;
use std::time::Duration;

use serde::de::DeserializeOwned;
use serde::Serialize;

use super::wire::{
    DetokenizeRequest, DetokenizeResponse, EncodeRequest, EncodeResponse, ErrorBody,
    ModelInfoBody, NextTokenRequest, NextTokenResponse, ScoreRequest, ScoreResponse,
    TokenizeRequest, TokenizeResponse,
};
use super::{
    BackendError, BoundaryConvention, EncodingHandle, ModelInfo, Result, ScoringBackend,
    SourceEncoding, TokenDistribution, TokenId, Tokenized,
};

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(120);

/// Logprobs this far above zero are treated as float noise.
const POSITIVE_SLACK: f64 = 1e-6;

pub struct RemoteBackend {
    base_url: String,
    agent: ureq::Agent,
    info: Mutex<Option<ModelInfo>>,
    anchor: Mutex<Option<(TokenId, String)>>,
    pieces: Mutex<HashMap<TokenId, String>>,
}

impl std::fmt::Debug for RemoteBackend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RemoteBackend")
            .field("base_url", &self.base_url)
            .finish_non_exhaustive()
    }
}

impl RemoteBackend {
    pub fn new(base_url: &str) -> Self {
        Self::with_timeout(base_url, DEFAULT_TIMEOUT)
    }

    pub fn with_timeout(base_url: &str, timeout: Duration) -> Self {
        let agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(timeout))
            .build()
            .new_agent();
        Self {
            base_url: base_url.trim_end_matches('/').to_string(),
            agent,
            info: Mutex::new(None),
            anchor: Mutex::new(None),
            pieces: Mutex::new(HashMap::new()),
        }
    }

    pub fn base_url(&self) -> &str {
        &self.base_url
    }

    fn url(&self, path: &str) -> String {
        format!("{}{path}", self.base_url)
    }

    fn get<Resp: DeserializeOwned>(&self, path: &str) -> Result<Resp> {
        Self::decode(self.agent.get(&self.url(path)).call(), path)
    }

    fn post<Req: Serialize, Resp: DeserializeOwned>(&self, path: &str, body: &Req) -> Result<Resp> {
        Self::decode(self.agent.post(&self.url(path)).send_json(body), path)
    }

    fn decode<Resp: DeserializeOwned>(
        resp: std::result::Result<ureq::http::Response<ureq::Body>, ureq::Error>,
        path: &str,
    ) -> Result<Resp> {
        let mut resp = resp.map_err(|e| BackendError::Unavailable(format!("{path}: {e}")))?;
        let status = resp.status().as_u16();
        let body = resp.body_mut();
        match status {
            200 => body
                .read_json()
                .map_err(|e| BackendError::Protocol(format!("{path}: {e}"))),
            400 => match body.read_json::<ErrorBody>() {
                Ok(err) => Err(err.into_error()),
                Err(e) => Err(BackendError::Protocol(format!("{path}: 400 ({e})"))),
            },
            404 => Err(BackendError::EncodingExpired(path.to_string())),
            503 => Err(BackendError::Unavailable(format!("{path}: model not loaded"))),
            other => Err(BackendError::Protocol(format!("{path}: HTTP {other}"))),
        }
    }

    fn encoding_id(enc: &SourceEncoding) -> Result<&str> {
        match &enc.handle {
            EncodingHandle::Remote(id) => Ok(id),
            EncodingHandle::Local => Err(BackendError::Protocol(
                "encoding was not produced by a remote backend".into(),
            )),
        }
    }

    /// A plain one-token word used to probe boundary behavior of pieces.
    fn anchor(&self) -> Result<(TokenId, String)> {
        if let Some(a) = self.anchor.lock().expect("anchor lock").clone() {
            return Ok(a);
        }
        let info = self.model_info()?;
        let lang = &info.supported_languages[0];
        let tokenized = self.tokenize("a", lang)?;
        let id = tokenized
            .ids
            .iter()
            .zip(&tokenized.offsets)
            .find(|(id, span)| !span.is_empty() && !info.is_special(**id))
            .map(|(id, _)| *id)
            .ok_or_else(|| BackendError::Protocol("cannot find an anchor token".into()))?;
        let text = self.detokenize(&[id])?;
        let anchor = (id, text);
        *self.anchor.lock().expect("anchor lock") = Some(anchor.clone());
        Ok(anchor)
    }

    /// Reconstructs the raw piece of `id` from detokenizer behavior next to
    /// an anchor word: a space between them means a word boundary.
    fn probe_piece(&self, id: TokenId) -> Result<String> {
        let info = self.model_info()?;
        if info.is_special(id) {
            return Ok(String::new());
        }
        match &info.boundary {
            BoundaryConvention::None => self.detokenize(&[id]),
            BoundaryConvention::MarkerPrefix(marker) => {
                let (anchor, anchor_text) = self.anchor()?;
                let joined = self.detokenize(&[anchor, id])?;
                Ok(match joined.strip_prefix(anchor_text.as_str()) {
                    Some(rest) if rest.starts_with(char::is_whitespace) => {
                        format!("{marker}{}", rest.trim_start())
                    }
                    Some(rest) => rest.to_string(),
                    None => self.detokenize(&[id])?,
                })
            }
            BoundaryConvention::MarkerSuffix(marker) => {
                let (anchor, anchor_text) = self.anchor()?;
                let joined = self.detokenize(&[id, anchor])?;
                Ok(match joined.strip_suffix(anchor_text.as_str()) {
                    Some(rest) if rest.ends_with(char::is_whitespace) => {
                        format!("{}{marker}", rest.trim_end())
                    }
                    Some(rest) => rest.to_string(),
                    None => self.detokenize(&[id])?,
                })
            }
        }
    }
}

impl ScoringBackend for RemoteBackend {
    fn model_info(&self) -> Result<ModelInfo> {
        if let Some(info) = self.info.lock().expect("info lock").clone() {
            return Ok(info);
        }
        let body: ModelInfoBody = self.get("/v1/model_info")?;
        let info = ModelInfo::try_from(body)?;
        *self.info.lock().expect("info lock") = Some(info.clone());
        Ok(info)
    }

    fn tokenize(&self, text: &str, lang: &str) -> Result<Tokenized> {
        if text.trim().is_empty() {
            return Err(BackendError::EmptyInput);
        }
        let resp: TokenizeResponse = self.post(
            "/v1/tokenize",
            &TokenizeRequest {
                text: text.to_string(),
                lang: lang.to_string(),
            },
        )?;
        if resp.ids.len() != resp.offsets.len() {
            return Err(BackendError::Protocol(
                "tokenize returned mismatched ids and offsets".into(),
            ));
        }
        Ok(Tokenized {
            ids: resp.ids,
            offsets: resp.offsets.into_iter().map(|[s, e]| s..e).collect(),
        })
    }

    fn detokenize(&self, ids: &[TokenId]) -> Result<String> {
        let resp: DetokenizeResponse =
            self.post("/v1/detokenize", &DetokenizeRequest { ids: ids.to_vec() })?;
        Ok(resp.text)
    }

    fn token_piece(&self, id: TokenId) -> Result<String> {
        if let Some(p) = self.pieces.lock().expect("piece cache").get(&id) {
            return Ok(p.clone());
        }
        let piece = self.probe_piece(id)?;
        self.pieces
            .lock()
            .expect("piece cache")
            .insert(id, piece.clone());
        Ok(piece)
    }

    fn encode_source(&self, text: &str, src_lang: &str, tgt_lang: &str) -> Result<SourceEncoding> {
        let info = self.model_info()?;
        for lang in [src_lang, tgt_lang] {
            if !info.supports(lang) {
                return Err(BackendError::UnsupportedLanguage(lang.to_string()));
            }
        }
        let source = self.tokenize(text, src_lang)?;
        let resp: EncodeResponse = self.post(
            "/v1/encode",
            &EncodeRequest {
                text: text.to_string(),
                src_lang: src_lang.to_string(),
                tgt_lang: tgt_lang.to_string(),
            },
        )?;
        Ok(SourceEncoding {
            source_ids: source.ids,
            src_lang: src_lang.to_string(),
            tgt_lang: tgt_lang.to_string(),
            handle: EncodingHandle::Remote(resp.encoding_id),
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
        let resp: NextTokenResponse = self.post(
            "/v1/next_token_logprobs",
            &NextTokenRequest {
                encoding_id: Self::encoding_id(enc)?.to_string(),
                prefix_ids: decoder_prefix.to_vec(),
                top_n,
            },
        )?;
        let entries = resp
            .entries
            .into_iter()
            .map(|(id, lp)| {
                if lp.is_nan() || lp > POSITIVE_SLACK {
                    Err(BackendError::Protocol(format!("logprob {lp} for token {id}")))
                } else {
                    Ok((id, lp.min(0.0)))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        let mut dist = TokenDistribution::new(entries, resp.truncated);
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
        let resp: ScoreResponse = self.post(
            "/v1/score_continuation",
            &ScoreRequest {
                encoding_id: Self::encoding_id(enc)?.to_string(),
                prefix_ids: decoder_prefix.to_vec(),
                continuation_ids: continuation.to_vec(),
            },
        )?;
        Ok(resp.logprob.min(0.0))
    }
}
