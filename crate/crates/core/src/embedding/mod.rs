//! Skip-gram word2vec with negative sampling over token streams.
//!
//! Defaults follow the selected `(min_count 10, iterations 200, dim 300)`
//! model with the usual word2vec window (5), negatives (5) and starting
//! learning rate (0.025). Training is single-threaded and bit-reproducible
//! for a fixed seed.

mod io;
mod sgns;
mod vocab;

pub use io::{parse_text, read_text, render_text, sidecar, sidecar_path, write_text, EmbeddingSidecar};
pub use sgns::{generate_pairs, pair_loss, train, NegativeSampler, PairGradient};
pub use vocab::{build_vocab, Vocabulary};

use serde::{Deserialize, Serialize};

use crate::lexer::TokenStream;
use crate::numerics::Matrix;

/// Default number of tokens kept by [`EmbeddingModel::embed_sequence`].
pub const DEFAULT_MAX_LEN: usize = 200;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Word2vecConfig {
    pub vector_dim: usize,
    pub min_count: u64,
    pub iterations: usize,
    pub window: usize,
    pub negatives_per_positive: usize,
    pub initial_learning_rate: f64,
    pub seed: u64,
}

impl Default for Word2vecConfig {
    fn default() -> Self {
        Word2vecConfig {
            vector_dim: 300,
            min_count: 10,
            iterations: 200,
            window: 5,
            negatives_per_positive: 5,
            initial_learning_rate: 0.025,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingModel {
    pub vocab: Vocabulary,
    /// One row per vocabulary entry; these are the published token vectors.
    pub input_vectors: Matrix,
    /// Context vectors from training. Not persisted, so `None` after loading
    /// a model from disk.
    pub output_vectors: Option<Matrix>,
    pub config: Word2vecConfig,
    /// Mean per-pair loss of each training epoch.
    pub epoch_losses: Vec<f64>,
}

/// A `(max_len x dim)` matrix of token vectors and the number of leading rows
/// that hold real tokens.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceEmbedding {
    pub matrix: Matrix,
    pub valid_len: usize,
}

impl SequenceEmbedding {
    pub fn dim(&self) -> usize {
        self.matrix.cols()
    }
}

impl EmbeddingModel {
    pub fn dim(&self) -> usize {
        self.input_vectors.cols()
    }

    pub fn vector(&self, lexeme: &str) -> Option<&[f64]> {
        self.vocab.get(lexeme).map(|i| self.input_vectors.row(i))
    }

    /// Maps a stream to token vectors. Out-of-vocabulary tokens become zero
    /// rows but still occupy a position. Long streams keep their last
    /// `max_len` tokens; short ones are zero-padded at the end.
    pub fn embed_sequence(&self, stream: &TokenStream, max_len: usize) -> SequenceEmbedding {
        let max_len = max_len.max(1);
        let dim = self.dim();
        let skip = stream.len().saturating_sub(max_len);
        let mut matrix = Matrix::zeros(max_len, dim);
        let mut valid_len = 0;
        for (row, token) in stream.tokens[skip..].iter().enumerate() {
            if let Some(v) = self.vector(&token.lexeme) {
                matrix.row_mut(row).copy_from_slice(v);
            }
            valid_len = row + 1;
        }
        SequenceEmbedding { matrix, valid_len }
    }

    /// Mean of the in-vocabulary token vectors, or zeros if there are none.
    pub fn pool_mean(&self, stream: &TokenStream) -> Vec<f64> {
        let mut sum = vec![0.0; self.dim()];
        let mut count = 0usize;
        for v in stream.lexemes().filter_map(|l| self.vector(l)) {
            sum.iter_mut().zip(v).for_each(|(s, x)| *s += x);
            count += 1;
        }
        if count > 0 {
            sum.iter_mut().for_each(|s| *s /= count as f64);
        }
        sum
    }

    pub fn cosine_similarity(&self, a: &str, b: &str) -> Option<f64> {
        Some(cosine(self.vector(a)?, self.vector(b)?))
    }
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let na = crate::numerics::dot(a, a).sqrt();
    let nb = crate::numerics::dot(b, b).sqrt();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    crate::numerics::dot(a, b) / (na * nb)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lexer::{tokenize, Token, TokenKind};

    fn model_with(lexemes: &[&str], rows: Vec<Vec<f64>>) -> EmbeddingModel {
        let vocab = Vocabulary::from_counts(lexemes.iter().map(|l| (l.to_string(), 10)).collect());
        EmbeddingModel {
            vocab,
            input_vectors: Matrix::from_rows(&rows).unwrap(),
            output_vectors: None,
            config: Word2vecConfig::default(),
            epoch_losses: vec![],
        }
    }

    fn stream(lexemes: &[&str]) -> TokenStream {
        TokenStream {
            tokens: lexemes.iter().map(|l| Token::new(TokenKind::Identifier, *l)).collect(),
            source_id: String::new(),
        }
    }

    #[test]
    fn defaults_are_the_selected_model() {
        let c = Word2vecConfig::default();
        assert_eq!((c.min_count, c.iterations, c.vector_dim), (10, 200, 300));
        assert_eq!((c.window, c.negatives_per_positive), (5, 5));
        assert_eq!(c.initial_learning_rate, 0.025);
    }

    #[test]
    fn embed_pads_short_streams() {
        let m = model_with(&["a", "b", "c"], vec![vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]]);
        let e = m.embed_sequence(&stream(&["a", "b", "c"]), 5);
        assert_eq!(e.valid_len, 3);
        assert_eq!(e.matrix.shape(), (5, 2));
        assert_eq!(e.matrix.row(2), &[5.0, 6.0]);
        assert_eq!(e.matrix.row(3), &[0.0, 0.0]);
        assert_eq!(e.matrix.row(4), &[0.0, 0.0]);
    }

    #[test]
    fn unknown_tokens_are_zero_but_counted() {
        let m = model_with(&["a"], vec![vec![1.0, 1.0]]);
        let e = m.embed_sequence(&stream(&["x", "y", "z"]), 5);
        assert_eq!(e.valid_len, 3);
        assert!(e.matrix.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn long_streams_keep_the_tail() {
        let names = ["t0", "t1", "t2", "t3", "t4", "t5", "t6"];
        let rows = (0..7).map(|i| vec![i as f64]).collect();
        let m = model_with(&names, rows);
        let e = m.embed_sequence(&stream(&names), 5);
        assert_eq!(e.valid_len, 5);
        let firsts: Vec<f64> = (0..5).map(|r| e.matrix.get(r, 0)).collect();
        assert_eq!(firsts, vec![2.0, 3.0, 4.0, 5.0, 6.0]);
    }

    #[test]
    fn pooling() {
        let m = model_with(&["v", "w"], vec![vec![1.5, -2.0], vec![-1.5, 2.0]]);
        assert_eq!(m.pool_mean(&stream(&["v"])), vec![1.5, -2.0]);
        assert_eq!(m.pool_mean(&stream(&["v", "w"])), vec![0.0, 0.0]);
        assert_eq!(m.pool_mean(&stream(&["nope"])), vec![0.0, 0.0]);
        assert_eq!(m.pool_mean(&tokenize("")), vec![0.0, 0.0]);
    }

    #[test]
    fn pooling_matches_summation_oracle() {
        let mut rng = crate::numerics::Rng::new(8);
        let names: Vec<String> = (0..6).map(|i| format!("k{i}")).collect();
        let refs: Vec<&str> = names.iter().map(String::as_str).collect();
        let rows: Vec<Vec<f64>> = (0..6).map(|_| (0..4).map(|_| rng.uniform(-1.0, 1.0)).collect()).collect();
        let m = model_with(&refs, rows.clone());
        for _ in 0..20 {
            let len = 1 + rng.below(10);
            let picks: Vec<usize> = (0..len).map(|_| rng.below(8)).collect();
            let lex: Vec<String> = picks.iter().map(|&p| format!("k{p}")).collect();
            let lex_refs: Vec<&str> = lex.iter().map(String::as_str).collect();
            let known: Vec<usize> = picks.iter().copied().filter(|&p| p < 6).collect();
            let mut want = vec![0.0; 4];
            for &p in &known {
                for d in 0..4 {
                    want[d] += rows[p][d];
                }
            }
            if !known.is_empty() {
                want.iter_mut().for_each(|w| *w /= known.len() as f64);
            }
            let got = m.pool_mean(&stream(&lex_refs));
            for (g, w) in got.iter().zip(&want) {
                assert!((g - w).abs() < 1e-12);
            }
        }
    }
}
