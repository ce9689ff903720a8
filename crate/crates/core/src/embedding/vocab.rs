use std::collections::HashMap;

use super::Word2vecConfig;
use crate::error::{Error, Result};
use crate::lexer::TokenStream;

/// Lexeme-to-index map ordered by descending frequency, ties broken by
/// lexeme order.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Vocabulary {
    lexemes: Vec<String>,
    counts: Vec<u64>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    /// Builds a vocabulary from `(lexeme, count)` entries, applying the
    /// canonical ordering.
    pub fn from_counts(mut entries: Vec<(String, u64)>) -> Self {
        entries.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        let index = entries
            .iter()
            .enumerate()
            .map(|(i, (l, _))| (l.clone(), i))
            .collect();
        let (lexemes, counts) = entries.into_iter().unzip();
        Vocabulary {
            lexemes,
            counts,
            index,
        }
    }

    /// Builds a vocabulary that keeps the given order, as read from a file.
    pub fn from_ordered(lexemes: Vec<String>, counts: Vec<u64>) -> Result<Self> {
        if lexemes.len() != counts.len() {
            return Err(Error::Shape(format!("{} lexemes but {} counts", lexemes.len(), counts.len())));
        }
        let mut index = HashMap::with_capacity(lexemes.len());
        for (i, l) in lexemes.iter().enumerate() {
            if index.insert(l.clone(), i).is_some() {
                return Err(Error::Artifact(format!("duplicate lexeme {l:?}")));
            }
        }
        Ok(Vocabulary {
            lexemes,
            counts,
            index,
        })
    }

    pub fn len(&self) -> usize {
        self.lexemes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lexemes.is_empty()
    }

    pub fn get(&self, lexeme: &str) -> Option<usize> {
        self.index.get(lexeme).copied()
    }

    pub fn lexeme(&self, i: usize) -> &str {
        &self.lexemes[i]
    }

    pub fn count(&self, i: usize) -> u64 {
        self.counts[i]
    }

    pub fn lexemes(&self) -> &[String] {
        &self.lexemes
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    /// Indices of a stream's tokens, `None` where out of vocabulary.
    pub fn map_stream(&self, stream: &TokenStream) -> Vec<Option<usize>> {
        stream.lexemes().map(|l| self.get(l)).collect()
    }
}

/// Counts lexemes over the corpus and keeps those seen at least
/// `config.min_count` times.
pub fn build_vocab(corpus: &[TokenStream], config: &Word2vecConfig) -> Result<Vocabulary> {
    if corpus.iter().all(TokenStream::is_empty) {
        return Err(Error::Empty("corpus"));
    }
    let mut counts: HashMap<&str, u64> = HashMap::new();
    for lexeme in corpus.iter().flat_map(TokenStream::lexemes) {
        *counts.entry(lexeme).or_default() += 1;
    }
    let kept: Vec<(String, u64)> = counts
        .into_iter()
        .filter(|&(_, c)| c >= config.min_count)
        .map(|(l, c)| (l.to_string(), c))
        .collect();
    if kept.is_empty() {
        return Err(Error::Empty("vocabulary after min_count filtering"));
    }
    Ok(Vocabulary::from_counts(kept))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lexer::{Token, TokenKind};
    use crate::numerics::Rng;
    use std::collections::BTreeMap;

    fn stream(lexemes: &[String]) -> TokenStream {
        TokenStream {
            tokens: lexemes.iter().map(|l| Token::new(TokenKind::Identifier, l.clone())).collect(),
            source_id: String::new(),
        }
    }

    fn repeated(word: &str, n: usize) -> Vec<String> {
        vec![word.to_string(); n]
    }

    fn config(min_count: u64) -> Word2vecConfig {
        Word2vecConfig {
            min_count,
            ..Word2vecConfig::default()
        }
    }

    #[test]
    fn min_count_boundary() {
        let mut words = repeated("rare", 9);
        words.extend(repeated("def", 10));
        let v = build_vocab(&[stream(&words)], &config(10)).unwrap();
        assert_eq!(v.get("def"), Some(0));
        assert_eq!(v.get("rare"), None);
        assert_eq!(v.count(0), 10);
    }

    #[test]
    fn min_count_one_keeps_everything() {
        let words: Vec<String> = ["a", "b", "a", "c"].iter().map(|s| s.to_string()).collect();
        let v = build_vocab(&[stream(&words)], &config(1)).unwrap();
        assert_eq!(v.lexemes(), &["a", "b", "c"]);
    }

    #[test]
    fn errors() {
        assert!(matches!(build_vocab(&[], &config(1)), Err(Error::Empty(_))));
        let words = repeated("x", 3);
        assert!(matches!(build_vocab(&[stream(&words)], &config(5)), Err(Error::Empty(_))));
    }

    #[test]
    fn matches_brute_force_filter_and_is_order_independent() {
        let mut rng = Rng::new(17);
        for _ in 0..20 {
            let mut corpus: Vec<TokenStream> = (0..1 + rng.below(6))
                .map(|_| {
                    let words: Vec<String> = (0..rng.below(40)).map(|_| format!("w{}", rng.below(12))).collect();
                    stream(&words)
                })
                .collect();
            let min_count = 1 + rng.below(5) as u64;
            if corpus.iter().all(TokenStream::is_empty) {
                continue;
            }
            let mut oracle: BTreeMap<String, u64> = BTreeMap::new();
            for s in &corpus {
                for t in &s.tokens {
                    *oracle.entry(t.lexeme.clone()).or_insert(0) += 1;
                }
            }
            oracle.retain(|_, c| *c >= min_count);
            match build_vocab(&corpus, &config(min_count)) {
                Ok(v) => {
                    let got: BTreeMap<String, u64> =
                        v.lexemes().iter().cloned().zip(v.counts().iter().copied()).collect();
                    assert_eq!(got, oracle);
                    assert!(v.counts().windows(2).all(|w| w[0] >= w[1]));
                    corpus.reverse();
                    assert_eq!(build_vocab(&corpus, &config(min_count)).unwrap(), v);
                }
                Err(_) => assert!(oracle.is_empty()),
            }
        }
    }
}
