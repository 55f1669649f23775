//! Shared test support: independent oracles, seeded fuzzers and a mock
//! model server.
#![allow(dead_code)]

use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;

use lexsimp::backend::toy::{ToyBackend, ToyLexicon, TOY_LANG};
use lexsimp::backend::wire::{
    DetokenizeRequest, DetokenizeResponse, EncodeRequest, EncodeResponse, ErrorBody,
    ModelInfoBody, NextTokenRequest, NextTokenResponse, ScoreRequest, ScoreResponse,
    TokenizeRequest, TokenizeResponse,
};
use lexsimp::backend::{BackendError, ScoringBackend, SourceEncoding};
use lexsimp::generator::SimplificationTask;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

pub fn oracle_file(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/oracles")
        .join(name)
}

// ---------------------------------------------------------------------------
// Toy generator oracle
// ---------------------------------------------------------------------------

/// Word-level probability under the toy model, straight from the tables:
/// lex(src, w) * big(prev, w), normalized over the lexicon row of `src`.
fn toy_word_prob(lex: &ToyLexicon, src: &str, prev: Option<&str>, w: &str) -> f64 {
    let row: BTreeMap<String, f64> = match lex.lex.get(src) {
        Some(row) => row.clone(),
        None => [(src.to_string(), 1.0)].into(),
    };
    let big = |p: Option<&str>, n: &str| -> f64 {
        p.and_then(|p| lex.bigram.get(p))
            .and_then(|r| r.get(n))
            .copied()
            .unwrap_or(1.0)
    };
    let z: f64 = row.iter().map(|(v, p)| p * big(prev, v)).sum();
    row.get(w).map_or(0.0, |p| p * big(prev, w) / z)
}

fn first_piece(word: &str, subword: bool) -> String {
    if subword && word.chars().count() > 6 {
        word.chars().take(6).collect()
    } else {
        word.to_string()
    }
}

fn recase(word: &str, upper: bool) -> String {
    let mut chars = word.chars();
    match chars.next() {
        Some(c) if upper => c.to_uppercase().chain(chars).collect(),
        Some(c) => c.to_lowercase().chain(chars).collect(),
        None => String::new(),
    }
}

/// Expected `(surface, total score)` list for the complex word at
/// `complex_idx` of a whitespace-separated toy sentence, computed by
/// enumerating the lexicon row instead of decoding.
///
/// In subword mode the decoder can only reach, for each distinct first
/// piece, the most probable word starting with it; that word's score is
/// its full word probability.
pub fn toy_oracle(
    lex: &ToyLexicon,
    words: &[&str],
    complex_idx: usize,
    lookahead: usize,
    k: usize,
    subword: bool,
) -> Vec<(String, f64)> {
    let folded: Vec<String> = words.iter().map(|w| w.to_lowercase()).collect();
    let src = folded[complex_idx].as_str();
    let prev = complex_idx.checked_sub(1).map(|i| folded[i].as_str());
    let row: Vec<String> = match lex.lex.get(src) {
        Some(row) => row.keys().cloned().collect(),
        None => vec![src.to_string()],
    };

    // Best reachable word per first piece; ties go to the smaller word.
    let mut best: BTreeMap<String, (String, f64)> = BTreeMap::new();
    for w in &row {
        let p = toy_word_prob(lex, src, prev, w);
        let key = first_piece(w, subword);
        let better = match best.get(&key) {
            None => true,
            Some((bw, bp)) => p > *bp || (p == *bp && w < bw),
        };
        if better {
            best.insert(key, (w.clone(), p));
        }
    }

    let upper = words[complex_idx].chars().next().is_some_and(char::is_uppercase);
    let mut out: Vec<(String, f64)> = Vec::new();
    for (w, p) in best.into_values() {
        if w == src || p <= 0.0 {
            continue;
        }
        let mut total = p.ln();
        let mut prev_word = w.clone();
        for j in complex_idx + 1..(complex_idx + 1 + lookahead).min(words.len()) {
            total += toy_word_prob(lex, &folded[j], Some(&prev_word), &folded[j]).ln();
            prev_word = folded[j].clone();
        }
        if total.is_finite() {
            out.push((recase(&w, upper), total));
        }
    }
    out.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    out.truncate(k);
    out
}

// ---------------------------------------------------------------------------
// Toy fuzzing
// ---------------------------------------------------------------------------

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_word(rng: &mut ChaCha8Rng, taken: &mut HashSet<String>) -> String {
    // Length 6 is avoided so whole words never collide with split heads.
    const LENGTHS: [usize; 7] = [2, 3, 4, 5, 7, 8, 9];
    loop {
        let len = *LENGTHS.choose(rng).expect("lengths");
        let w: String = (0..len).map(|_| rng.random_range(b'b'..=b'z') as char).collect();
        if taken.insert(w.clone()) {
            return w;
        }
    }
}

/// A random lexicon. Some long words deliberately share their first six
/// characters so subword decoding has competing completions.
pub fn random_lexicon(rng: &mut ChaCha8Rng) -> ToyLexicon {
    let mut taken: HashSet<String> = ["a".to_string()].into();
    let mut targets: Vec<String> = (0..rng.random_range(6..14))
        .map(|_| random_word(rng, &mut taken))
        .collect();
    let long: Vec<String> = targets.iter().filter(|w| w.len() > 6).cloned().collect();
    for w in long.iter().take(3) {
        let sibling = format!(
            "{}{}",
            &w[..6],
            (0..rng.random_range(1..3))
                .map(|_| rng.random_range(b'b'..=b'z') as char)
                .collect::<String>()
        );
        if sibling.len() != 6 && taken.insert(sibling.clone()) {
            targets.push(sibling);
        }
    }

    let mut lex = BTreeMap::new();
    let sources: Vec<String> = (0..rng.random_range(3..7))
        .map(|_| random_word(rng, &mut taken))
        .collect();
    for src in &sources {
        let mut row = BTreeMap::new();
        if rng.random_bool(0.85) {
            row.insert(src.clone(), rng.random_range(0.05..1.0));
        }
        for _ in 0..rng.random_range(1..6) {
            let w = targets.choose(rng).expect("targets").clone();
            row.insert(w, rng.random_range(0.05..1.0));
        }
        lex.insert(src.clone(), row);
    }

    let mut vocab: Vec<String> = sources.clone();
    vocab.extend(targets.iter().cloned());
    let mut bigram: BTreeMap<String, BTreeMap<String, f64>> = BTreeMap::new();
    for _ in 0..rng.random_range(0..8) {
        let prev = vocab.choose(rng).expect("vocab").clone();
        let next = vocab.choose(rng).expect("vocab").clone();
        bigram
            .entry(prev)
            .or_default()
            .insert(next, rng.random_range(0.05..3.0));
    }
    let mut extra_words = vec!["a".to_string()];
    extra_words.extend((0..rng.random_range(1..4)).map(|_| random_word(rng, &mut taken)));
    ToyLexicon {
        lex,
        bigram,
        extra_words,
    }
}

/// A random sentence over the lexicon with one complex position.
#[derive(Debug, Clone)]
pub struct ToyCase {
    pub lexicon: ToyLexicon,
    pub words: Vec<String>,
    pub complex_idx: usize,
    pub lookahead: usize,
    pub k: usize,
}

impl ToyCase {
    pub fn text(&self) -> String {
        self.words.join(" ")
    }

    pub fn task(&self) -> SimplificationTask {
        let start: usize = self.words[..self.complex_idx]
            .iter()
            .map(|w| w.chars().count() + 1)
            .sum();
        let end = start + self.words[self.complex_idx].chars().count();
        SimplificationTask::new(&self.text(), start..end, TOY_LANG).expect("valid toy task")
    }

    pub fn oracle(&self, subword: bool) -> Vec<(String, f64)> {
        let words: Vec<&str> = self.words.iter().map(String::as_str).collect();
        toy_oracle(&self.lexicon, &words, self.complex_idx, self.lookahead, self.k, subword)
    }
}

pub fn random_case(rng: &mut ChaCha8Rng) -> ToyCase {
    let lexicon = random_lexicon(rng);
    let sources: Vec<&String> = lexicon.lex.keys().collect();
    let mut fillers: Vec<String> = lexicon.extra_words.clone();
    fillers.extend(lexicon.lex.values().flat_map(|r| r.keys().cloned()));
    let len = rng.random_range(2..8);
    let complex_idx = rng.random_range(0..len);
    let mut words: Vec<String> = (0..len)
        .map(|i| {
            if i == complex_idx || rng.random_bool(0.5) {
                (*sources.choose(rng).expect("sources")).clone()
            } else {
                fillers.choose(rng).expect("fillers").clone()
            }
        })
        .collect();
    for w in &mut words {
        if rng.random_bool(0.25) {
            *w = recase(w, true);
        }
    }
    ToyCase {
        lexicon,
        words,
        complex_idx,
        lookahead: rng.random_range(0..=5),
        k: rng.random_range(1..8),
    }
}

// ---------------------------------------------------------------------------
// Metric oracle
// ---------------------------------------------------------------------------

/// Brute-force dataset metrics over raw string lists; shares no code with
/// the library. Gold lists may repeat a substitute (one entry per vote).
pub fn oracle_metrics(golds: &[Vec<String>], preds: &[Vec<String>]) -> BTreeMap<String, f64> {
    let fold = |s: &str| s.trim().to_lowercase();
    let n = golds.len() as f64;
    let mut sums: BTreeMap<String, f64> = BTreeMap::new();
    for (gold, pred) in golds.iter().zip(preds) {
        let mut votes: HashMap<String, u32> = HashMap::new();
        for g in gold {
            let g = fold(g);
            if !g.is_empty() {
                *votes.entry(g).or_default() += 1;
            }
        }
        let mut p: Vec<String> = Vec::new();
        for item in pred {
            let item = fold(item);
            if !item.is_empty() && !p.contains(&item) {
                p.push(item);
            }
        }
        p.truncate(10);
        let top = votes.values().copied().max().unwrap_or(0);
        let relevant = |w: &String| votes.contains_key(w);

        let potential = |k: usize| f64::from(u8::from(p.iter().take(k).any(relevant)));
        *sums.entry("ACC@1".into()).or_default() += potential(1);
        for k in [3, 5, 10] {
            *sums.entry(format!("Potential@{k}")).or_default() += potential(k);
        }
        for n_top in [1, 2, 3] {
            let hit = p.iter().take(n_top).any(|w| votes.get(w) == Some(&top));
            *sums.entry(format!("Acc@{n_top}@Top1")).or_default() += f64::from(u8::from(hit));
        }
        for k in [3, 5, 10] {
            let mut ap = 0.0;
            for i in 0..p.len().min(k) {
                if relevant(&p[i]) {
                    let hits = p[..=i].iter().filter(|w| relevant(w)).count();
                    ap += hits as f64 / (i + 1) as f64;
                }
            }
            *sums.entry(format!("MAP@{k}")).or_default() += ap / k.min(votes.len()) as f64;
        }
    }
    sums.into_iter().map(|(k, v)| (k, v / n)).collect()
}

/// A random gold/prediction pair drawn from a small word pool so hits,
/// ties and case variants are common.
pub fn random_instance(rng: &mut ChaCha8Rng) -> (Vec<String>, Vec<String>) {
    const POOL: [&str; 14] = [
        "alpha", "beta", "gamma", "delta", "eps", "zeta", "eta", "theta", "iota", "kappa",
        "lambda", "mu", "nu", "xi",
    ];
    let case = |rng: &mut ChaCha8Rng, w: &str| {
        if rng.random_bool(0.2) {
            w.to_uppercase()
        } else {
            w.to_string()
        }
    };
    let gold: Vec<String> = (0..rng.random_range(1..12))
        .map(|_| {
            let w = *POOL[..8].choose(rng).expect("pool");
            case(rng, w)
        })
        .collect();
    let mut seen = HashSet::new();
    let mut pred = Vec::new();
    for _ in 0..rng.random_range(0..12) {
        let w = *POOL.choose(rng).expect("pool");
        if seen.insert(w) {
            pred.push(case(rng, w));
        }
    }
    (gold, pred)
}

// ---------------------------------------------------------------------------
// Mock model server
// ---------------------------------------------------------------------------

struct ServerState {
    backend: ToyBackend,
    encodings: Mutex<HashMap<String, SourceEncoding>>,
    next_id: AtomicUsize,
    unavailable: AtomicBool,
    requests: AtomicUsize,
}

/// Serves a [`ToyBackend`] over the `/v1` HTTP protocol on a free local
/// port. Stops when dropped.
pub struct MockServer {
    pub url: String,
    server: Arc<tiny_http::Server>,
    state: Arc<ServerState>,
    workers: Vec<JoinHandle<()>>,
}

impl MockServer {
    pub fn start(backend: ToyBackend) -> Self {
        let server = Arc::new(tiny_http::Server::http("127.0.0.1:0").expect("bind mock server"));
        let port = server.server_addr().to_ip().expect("ip listener").port();
        let state = Arc::new(ServerState {
            backend,
            encodings: Mutex::new(HashMap::new()),
            next_id: AtomicUsize::new(0),
            unavailable: AtomicBool::new(false),
            requests: AtomicUsize::new(0),
        });
        let workers = (0..4)
            .map(|_| {
                let server = Arc::clone(&server);
                let state = Arc::clone(&state);
                std::thread::spawn(move || {
                    while let Ok(request) = server.recv() {
                        handle(&state, request);
                    }
                })
            })
            .collect();
        Self {
            url: format!("http://127.0.0.1:{port}"),
            server,
            state,
            workers,
        }
    }

    /// Forgets every encoding, as a server restart would.
    pub fn expire_encodings(&self) {
        self.state.encodings.lock().expect("encodings").clear();
    }

    /// Makes every endpoint answer 503.
    pub fn set_unavailable(&self, down: bool) {
        self.state.unavailable.store(down, Ordering::SeqCst);
    }

    pub fn request_count(&self) -> usize {
        self.state.requests.load(Ordering::SeqCst)
    }
}

impl Drop for MockServer {
    fn drop(&mut self) {
        for _ in &self.workers {
            self.server.unblock();
        }
        for w in self.workers.drain(..) {
            let _ = w.join();
        }
    }
}

fn respond_json(request: tiny_http::Request, status: u16, body: String) {
    let header =
        tiny_http::Header::from_bytes(&b"Content-Type"[..], &b"application/json"[..]).expect("header");
    let response = tiny_http::Response::from_string(body)
        .with_status_code(status)
        .with_header(header);
    let _ = request.respond(response);
}

fn bad_request(message: String) -> (u16, String) {
    let body = ErrorBody {
        error_code: "BAD_REQUEST".into(),
        message,
    };
    (400, serde_json::to_string(&body).expect("json"))
}

fn handle(state: &ServerState, mut request: tiny_http::Request) {
    state.requests.fetch_add(1, Ordering::SeqCst);
    let mut body = String::new();
    let _ = request.as_reader().read_to_string(&mut body);
    let path = request.url().to_string();
    let (status, out) = if state.unavailable.load(Ordering::SeqCst) {
        let (status, body) = ErrorBody::from_error(&BackendError::Unavailable("loading".into()));
        (status, serde_json::to_string(&body).expect("json"))
    } else {
        route(state, &path, &body)
    };
    respond_json(request, status, out);
}

fn route(state: &ServerState, path: &str, body: &str) -> (u16, String) {
    fn parse<T: serde::de::DeserializeOwned>(body: &str) -> Result<T, (u16, String)> {
        serde_json::from_str(body).map_err(|e| bad_request(e.to_string()))
    }
    fn reply<T: serde::Serialize>(r: Result<T, BackendError>) -> (u16, String) {
        match r {
            Ok(v) => (200, serde_json::to_string(&v).expect("json")),
            Err(e) => {
                let (status, body) = ErrorBody::from_error(&e);
                (status, serde_json::to_string(&body).expect("json"))
            }
        }
    }
    let b = &state.backend;
    let lookup = |id: &str| {
        state
            .encodings
            .lock()
            .expect("encodings")
            .get(id)
            .cloned()
            .ok_or_else(|| BackendError::EncodingExpired(id.to_string()))
    };
    let result = (|| -> Result<(u16, String), (u16, String)> {
        Ok(match path {
            "/v1/model_info" => reply(b.model_info().map(|i| ModelInfoBody::from(&i))),
            "/v1/tokenize" => {
                let req: TokenizeRequest = parse(body)?;
                reply(b.tokenize(&req.text, &req.lang).map(|t| TokenizeResponse {
                    ids: t.ids,
                    offsets: t.offsets.iter().map(|r| [r.start, r.end]).collect(),
                }))
            }
            "/v1/detokenize" => {
                let req: DetokenizeRequest = parse(body)?;
                reply(b.detokenize(&req.ids).map(|text| DetokenizeResponse { text }))
            }
            "/v1/encode" => {
                let req: EncodeRequest = parse(body)?;
                reply(b.encode_source(&req.text, &req.src_lang, &req.tgt_lang).map(|enc| {
                    let id = format!("enc-{}", state.next_id.fetch_add(1, Ordering::SeqCst));
                    state.encodings.lock().expect("encodings").insert(id.clone(), enc);
                    EncodeResponse { encoding_id: id }
                }))
            }
            "/v1/next_token_logprobs" => {
                let req: NextTokenRequest = parse(body)?;
                reply(lookup(&req.encoding_id).and_then(|enc| {
                    b.next_token_logprobs(&enc, &req.prefix_ids, req.top_n)
                        .map(|d| NextTokenResponse {
                            entries: d.entries,
                            truncated: d.truncated,
                        })
                }))
            }
            "/v1/score_continuation" => {
                let req: ScoreRequest = parse(body)?;
                reply(lookup(&req.encoding_id).and_then(|enc| {
                    b.score_continuation(&enc, &req.prefix_ids, &req.continuation_ids)
                        .map(|logprob| ScoreResponse { logprob })
                }))
            }
            other => (404, format!("{{\"error_code\":\"NOT_FOUND\",\"message\":\"{other}\"}}")),
        })
    })();
    result.unwrap_or_else(|e| e)
}
