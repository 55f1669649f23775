mod common;

use common::{random_case, rng, toy_oracle, ToyCase};
use lexsimp::backend::toy::{ToyBackend, ToyLexicon, TOY_LANG};
use lexsimp::backend::ScoringBackend;
use lexsimp::generator::{
    generate_candidates, CandidateWord, GenerateError, GeneratorConfig, SimplificationTask,
};

fn config(k: usize, lookahead: usize) -> GeneratorConfig {
    GeneratorConfig {
        k,
        lookahead_words: lookahead,
        ..GeneratorConfig::default()
    }
}

fn assert_matches_oracle(got: &[CandidateWord], want: &[(String, f64)], label: &str) {
    let surfaces: Vec<&str> = got.iter().map(|c| c.surface.as_str()).collect();
    let expected: Vec<&str> = want.iter().map(|(s, _)| s.as_str()).collect();
    assert_eq!(surfaces, expected, "{label}");
    for (c, (_, score)) in got.iter().zip(want) {
        assert!(
            (c.total_score - score).abs() < 1e-9,
            "{label}: {} scored {} vs oracle {score}",
            c.surface,
            c.total_score
        );
        let parts = c.first_token_logprob + c.own_continuation_logprob + c.lookahead_logprob;
        assert!((parts - c.total_score).abs() < 1e-12, "{label}: components");
    }
}

fn run_case(case: &ToyCase, subword: bool) {
    let backend = ToyBackend::new(case.lexicon.clone(), subword).expect("valid lexicon");
    let cfg = config(case.k, case.lookahead);
    let want = case.oracle(subword);
    let label = format!("{:?} (subword={subword})", case);
    match generate_candidates(&case.task(), &backend, &cfg) {
        Ok(got) => assert_matches_oracle(&got, &want, &label),
        Err(GenerateError::NoCandidates) => assert!(want.is_empty(), "{label}: oracle {want:?}"),
        Err(e) => panic!("{label}: {e}"),
    }
}

#[test]
fn fixture_without_lookahead() {
    let lex = ToyLexicon::evade_fixture();
    let backend = ToyBackend::evade_fixture();
    let task = SimplificationTask::locate("he attempted to evade the issue", "evade", TOY_LANG).unwrap();
    let got = generate_candidates(&task, &backend, &config(3, 0)).unwrap();
    let words = ["he", "attempted", "to", "evade", "the", "issue"];
    let want = toy_oracle(&lex, &words, 3, 0, 3, false);
    assert_matches_oracle(&got, &want, "L=0");
    let surfaces: Vec<&str> = got.iter().map(|c| c.surface.as_str()).collect();
    assert_eq!(surfaces, ["avoid", "get", "dodge"]);
    assert!((got[0].total_score - 0.3f64.ln()).abs() < 1e-12);
}

#[test]
fn fixture_with_two_word_lookahead() {
    let lex = ToyLexicon::evade_fixture();
    let backend = ToyBackend::evade_fixture();
    let task = SimplificationTask::locate("he attempted to evade the issue", "evade", TOY_LANG).unwrap();
    let got = generate_candidates(&task, &backend, &config(3, 2)).unwrap();
    let words = ["he", "attempted", "to", "evade", "the", "issue"];
    assert_matches_oracle(&got, &toy_oracle(&lex, &words, 3, 2, 3, false), "L=2");
    let surfaces: Vec<&str> = got.iter().map(|c| c.surface.as_str()).collect();
    assert_eq!(surfaces, ["avoid", "dodge", "get"]);
}

#[test]
fn fuzzed_tasks_match_oracle_word_level() {
    let mut r = rng(0x5eed_0001);
    for _ in 0..100 {
        run_case(&random_case(&mut r), false);
    }
}

#[test]
fn fuzzed_tasks_match_oracle_subword() {
    let mut r = rng(0x5eed_0002);
    for _ in 0..100 {
        run_case(&random_case(&mut r), true);
    }
}

/// With no lookahead the ranking is the top-k of the first-position
/// distribution after completion and filtering.
#[test]
fn zero_lookahead_is_plain_top_k() {
    let mut r = rng(0x5eed_0003);
    for _ in 0..100 {
        let case = ToyCase {
            lookahead: 0,
            ..random_case(&mut r)
        };
        let backend = ToyBackend::new(case.lexicon.clone(), false).unwrap();
        let Ok(got) = generate_candidates(&case.task(), &backend, &config(case.k, 0)) else {
            continue;
        };
        for c in &got {
            assert_eq!(c.lookahead_logprob, 0.0);
            assert_eq!(c.own_continuation_logprob, 0.0);
        }
        // Directly from the backend: the distribution right after the
        // forced prefix.
        let task = case.task();
        let enc = backend.encode_source(task.text(), TOY_LANG, TOY_LANG).unwrap();
        let mut prefix = backend.model_info().unwrap().decoder_start_ids(TOY_LANG).unwrap();
        let tokens = backend.tokenize(task.text(), TOY_LANG).unwrap();
        prefix.extend(&tokens.ids[..case.complex_idx]);
        let dist = backend.next_token_logprobs(&enc, &prefix, 1000).unwrap();
        let complex = case.words[case.complex_idx].to_lowercase();
        let mut direct: Vec<(String, f64)> = dist
            .entries
            .iter()
            .map(|&(id, lp)| (backend.token_piece(id).unwrap().to_lowercase(), lp))
            .filter(|(p, _)| *p != complex)
            .collect();
        direct.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        direct.truncate(case.k);
        let got_lower: Vec<(String, f64)> = got
            .iter()
            .map(|c| (c.surface.to_lowercase(), c.total_score))
            .collect();
        assert_eq!(got_lower.len(), direct.len(), "{case:?}");
        for ((a, x), (b, y)) in got_lower.iter().zip(&direct) {
            assert_eq!(a, b);
            assert!((x - y).abs() < 1e-12);
        }
    }
}

#[test]
fn smaller_k_is_a_prefix_of_larger_k() {
    let mut r = rng(0x5eed_0004);
    for _ in 0..50 {
        let case = random_case(&mut r);
        let backend = ToyBackend::new(case.lexicon.clone(), false).unwrap();
        let task = case.task();
        let Ok(full) = generate_candidates(&task, &backend, &config(20, case.lookahead)) else {
            continue;
        };
        for k in 1..=full.len() {
            let part = generate_candidates(&task, &backend, &config(k, case.lookahead)).unwrap();
            assert_eq!(part, full[..k], "k={k} {case:?}");
        }
    }
}

#[test]
fn capitalized_complex_word_gives_capitalized_candidates() {
    let backend = ToyBackend::evade_fixture();
    let task = SimplificationTask::locate("Attempted to evade the issue", "Attempted", TOY_LANG).unwrap();
    let got = generate_candidates(&task, &backend, &config(5, 3)).unwrap();
    let surfaces: Vec<&str> = got.iter().map(|c| c.surface.as_str()).collect();
    assert_eq!(surfaces, ["Tried", "Sought"]);
}

#[test]
fn generation_is_deterministic() {
    let mut r = rng(0x5eed_0005);
    for _ in 0..20 {
        let case = random_case(&mut r);
        let backend = ToyBackend::new(case.lexicon.clone(), true).unwrap();
        let cfg = config(case.k, case.lookahead);
        let a = generate_candidates(&case.task(), &backend, &cfg);
        let b = generate_candidates(&case.task(), &backend, &cfg);
        assert_eq!(a, b);
    }
}
