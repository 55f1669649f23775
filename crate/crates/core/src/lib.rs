//! Lexical simplification by paraphrase decoding.
//!
//! The pipeline forces an encoder-decoder paraphrase model through the text
//! preceding a complex word, collects the most likely words at the complex
//! word's position, re-scores them with the likelihood of the original
//! continuation, and ranks the survivors by prediction score, word frequency
//! and embedding similarity.

pub mod backend;
pub mod cli;
pub mod eval;
pub mod generator;
pub mod ranker;
pub mod text;
