use super::{build_vocab, EmbeddingModel, Vocabulary, Word2vecConfig};
use crate::error::{Error, Result};
use crate::lexer::TokenStream;
use crate::numerics::{dot, sigmoid, softplus, Matrix, Rng};

/// Learning rate at the end of training, relative to the initial rate.
const FINAL_LR_FRACTION: f64 = 1e-4;

/// `(center, context)` vocabulary-index pairs for every in-vocabulary
/// position `i` and in-vocabulary `j` with `0 < |i - j| <= window`. Positions
/// are those of the original stream; out-of-vocabulary tokens are skipped
/// but still occupy their slot.
pub fn generate_pairs(stream: &TokenStream, vocab: &Vocabulary, window: usize) -> Vec<(usize, usize)> {
    let mapped = vocab.map_stream(stream);
    let mut pairs = Vec::new();
    for_each_pair(&mapped, window, |c, o| pairs.push((c, o)));
    pairs
}

fn for_each_pair(mapped: &[Option<usize>], window: usize, mut f: impl FnMut(usize, usize)) {
    for (i, center) in mapped.iter().enumerate() {
        let Some(center) = *center else { continue };
        let lo = i.saturating_sub(window);
        let hi = (i + window).min(mapped.len().saturating_sub(1));
        for (j, context) in mapped.iter().enumerate().take(hi + 1).skip(lo) {
            if j == i {
                continue;
            }
            if let Some(context) = *context {
                f(center, context);
            }
        }
    }
}

/// Draws negatives from the unigram distribution raised to the 3/4 power.
#[derive(Debug, Clone)]
pub struct NegativeSampler {
    cumulative: Vec<f64>,
}

impl NegativeSampler {
    pub fn new(counts: &[u64]) -> Self {
        let mut acc = 0.0;
        let cumulative = counts
            .iter()
            .map(|&c| {
                acc += (c as f64).powf(0.75);
                acc
            })
            .collect();
        NegativeSampler { cumulative }
    }

    fn draw_any(&self, rng: &mut Rng) -> usize {
        let total = *self.cumulative.last().expect("non-empty vocabulary");
        let u = rng.next_f64() * total;
        self.cumulative
            .partition_point(|&c| c <= u)
            .min(self.cumulative.len() - 1)
    }

    /// A sample different from `exclude`, or `None` when the vocabulary has
    /// no other entry.
    pub fn draw(&self, exclude: usize, rng: &mut Rng) -> Option<usize> {
        if self.cumulative.len() < 2 {
            return None;
        }
        loop {
            let k = self.draw_any(rng);
            if k != exclude {
                return Some(k);
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairGradient {
    pub loss: f64,
    pub center: Vec<f64>,
    pub context: Vec<f64>,
    pub negatives: Vec<Vec<f64>>,
}

/// Negative-sampling loss `-ln s(c.o) - sum_k ln s(-c.n_k)` and its gradient
/// with respect to the center, context and negative vectors.
pub fn pair_loss(center: &[f64], context: &[f64], negatives: &[&[f64]]) -> PairGradient {
    let dim = center.len();
    let mut grad_center = vec![0.0; dim];
    let x = dot(center, context);
    let mut loss = softplus(-x);
    let g = sigmoid(x) - 1.0;
    grad_center.iter_mut().zip(context).for_each(|(gc, o)| *gc += g * o);
    let grad_context = center.iter().map(|c| g * c).collect();
    let grad_negatives = negatives
        .iter()
        .map(|n| {
            let x = dot(center, n);
            loss += softplus(x);
            let g = sigmoid(x);
            grad_center.iter_mut().zip(n.iter()).for_each(|(gc, v)| *gc += g * v);
            center.iter().map(|c| g * c).collect()
        })
        .collect();
    PairGradient {
        loss,
        center: grad_center,
        context: grad_context,
        negatives: grad_negatives,
    }
}

/// Trains skip-gram embeddings with negative sampling.
///
/// Each epoch walks the corpus in order. For every pair the context vector is
/// pushed towards the center vector and `negatives_per_positive` sampled
/// vectors are pushed away, with word2vec's in-place update order. The step
/// size decays linearly over all pair updates to `1e-4` of its start value.
pub fn train(corpus: &[TokenStream], config: &Word2vecConfig) -> Result<EmbeddingModel> {
    if config.vector_dim == 0 || config.window == 0 {
        return Err(Error::InvalidArgument("vector_dim and window must be positive".into()));
    }
    let vocab = build_vocab(corpus, config)?;
    let dim = config.vector_dim;
    let mut rng = Rng::new(config.seed);
    let mut input = Matrix::uniform(vocab.len(), dim, 0.5 / dim as f64, &mut rng);
    let mut output = Matrix::zeros(vocab.len(), dim);
    let sampler = NegativeSampler::new(vocab.counts());

    let mapped: Vec<Vec<Option<usize>>> = corpus.iter().map(|s| vocab.map_stream(s)).collect();
    let pairs_per_epoch: usize = mapped
        .iter()
        .map(|m| {
            let mut n = 0;
            for_each_pair(m, config.window, |_, _| n += 1);
            n
        })
        .sum();
    let total_steps = (pairs_per_epoch * config.iterations).max(1) as f64;

    let mut epoch_losses = Vec::with_capacity(config.iterations);
    let mut step = 0usize;
    let mut update = vec![0.0; dim];
    let mut negatives = Vec::with_capacity(config.negatives_per_positive);
    for epoch in 0..config.iterations {
        let mut epoch_loss = 0.0;
        for (stream_idx, m) in mapped.iter().enumerate() {
            let mut stream_loss = 0.0;
            for_each_pair(m, config.window, |center, context| {
                let progress = step as f64 / total_steps;
                let lr = config.initial_learning_rate * (1.0 - (1.0 - FINAL_LR_FRACTION) * progress);
                step += 1;

                negatives.clear();
                for _ in 0..config.negatives_per_positive {
                    if let Some(k) = sampler.draw(context, &mut rng) {
                        negatives.push(k);
                    }
                }

                update.iter_mut().for_each(|u| *u = 0.0);
                let c = input.row(center);
                for (target, label) in std::iter::once((context, 1.0)).chain(negatives.iter().map(|&k| (k, 0.0))) {
                    let o = output.row_mut(target);
                    let x = dot(c, o);
                    stream_loss += if label == 1.0 { softplus(-x) } else { softplus(x) };
                    let g = lr * (label - sigmoid(x));
                    update.iter_mut().zip(o.iter()).for_each(|(u, ov)| *u += g * ov);
                    o.iter_mut().zip(c).for_each(|(ov, cv)| *ov += g * cv);
                }
                input
                    .row_mut(center)
                    .iter_mut()
                    .zip(&update)
                    .for_each(|(cv, u)| *cv += u);
            });
            if !stream_loss.is_finite() {
                return Err(Error::Diverged {
                    epoch,
                    batch: stream_idx,
                });
            }
            epoch_loss += stream_loss;
        }
        epoch_losses.push(if pairs_per_epoch > 0 {
            epoch_loss / pairs_per_epoch as f64
        } else {
            0.0
        });
    }

    if !(input.is_finite() && output.is_finite()) {
        return Err(Error::NonFinite("embedding vectors".into()));
    }
    Ok(EmbeddingModel {
        vocab,
        input_vectors: input,
        output_vectors: Some(output),
        config: config.clone(),
        epoch_losses,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lexer::{Token, TokenKind};
    use crate::numerics::gradient_check;
    use proptest::prelude::{prop_assert, proptest};

    fn stream(lexemes: &[String]) -> TokenStream {
        TokenStream {
            tokens: lexemes.iter().map(|l| Token::new(TokenKind::Identifier, l.clone())).collect(),
            source_id: String::new(),
        }
    }

    fn words(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    fn vocab_of(ws: &[&str]) -> Vocabulary {
        Vocabulary::from_counts(ws.iter().map(|w| (w.to_string(), 1)).collect())
    }

    #[test]
    fn three_token_window_two() {
        let v = vocab_of(&["a", "b", "c"]);
        let (a, b, c) = (v.get("a").unwrap(), v.get("b").unwrap(), v.get("c").unwrap());
        let pairs = generate_pairs(&stream(&words("a b c")), &v, 2);
        assert_eq!(pairs, vec![(a, b), (a, c), (b, a), (b, c), (c, a), (c, b)]);
    }

    #[test]
    fn single_token_has_no_pairs() {
        let v = vocab_of(&["a"]);
        assert!(generate_pairs(&stream(&words("a")), &v, 5).is_empty());
    }

    #[test]
    fn pairs_match_double_loop() {
        let mut rng = Rng::new(5);
        let v = vocab_of(&["a", "b", "c", "d"]);
        let alphabet = ["a", "b", "c", "d", "x", "y"];
        for _ in 0..50 {
            let ws: Vec<String> = (0..rng.below(15)).map(|_| alphabet[rng.below(6)].to_string()).collect();
            let window = 1 + rng.below(4);
            let mut oracle = Vec::new();
            for i in 0..ws.len() {
                for j in 0..ws.len() {
                    let d = i.abs_diff(j);
                    if d == 0 || d > window {
                        continue;
                    }
                    if let (Some(c), Some(o)) = (v.get(&ws[i]), v.get(&ws[j])) {
                        oracle.push((c, o));
                    }
                }
            }
            let mut got = generate_pairs(&stream(&ws), &v, window);
            got.sort_unstable();
            oracle.sort_unstable();
            assert_eq!(got, oracle);
        }
    }

    #[test]
    fn pair_gradient_matches_finite_differences() {
        // Five-token vocabulary: one center, one context, three negatives.
        let mut rng = Rng::new(13);
        let dim = 4;
        for _ in 0..10 {
            let point: Vec<f64> = (0..5 * dim).map(|_| rng.uniform(-1.0, 1.0)).collect();
            let split = |p: &[f64]| -> (Vec<f64>, Vec<f64>, Vec<Vec<f64>>) {
                let rows: Vec<Vec<f64>> = p.chunks(dim).map(|c| c.to_vec()).collect();
                (rows[0].clone(), rows[1].clone(), rows[2..].to_vec())
            };
            let (c, o, n) = split(&point);
            let negs: Vec<&[f64]> = n.iter().map(Vec::as_slice).collect();
            let g = pair_loss(&c, &o, &negs);
            let mut analytic = g.center.clone();
            analytic.extend(&g.context);
            g.negatives.iter().for_each(|x| analytic.extend(x));
            let f = |p: &[f64]| {
                let (c, o, n) = split(p);
                let negs: Vec<&[f64]> = n.iter().map(Vec::as_slice).collect();
                Ok(pair_loss(&c, &o, &negs).loss)
            };
            let check = gradient_check(f, &analytic, &point, 1e-5).unwrap();
            assert!(check.max_rel_error < 1e-6, "{check:?}");
        }
    }

    #[test]
    fn sgd_update_is_a_gradient_step() {
        // With distinct targets, one training update equals -lr * gradient.
        let corpus = vec![stream(&words("a b"))];
        let config = Word2vecConfig {
            vector_dim: 3,
            min_count: 1,
            iterations: 1,
            window: 1,
            negatives_per_positive: 0,
            initial_learning_rate: 0.5,
            seed: 2,
        };
        let model = train(&corpus, &config).unwrap();
        // Replay the first pair by hand.
        let mut rng = Rng::new(2);
        let init = Matrix::uniform(2, 3, 0.5 / 3.0, &mut rng);
        let (a, b) = (model.vocab.get("a").unwrap(), model.vocab.get("b").unwrap());
        let c0 = init.row(a).to_vec();
        let g = pair_loss(&c0, &[0.0; 3], &[]);
        let out_b: Vec<f64> = g.context.iter().map(|x| -0.5 * x).collect();
        let out = model.output_vectors.as_ref().unwrap();
        // The second pair (b, a) touches row a of the output matrix only.
        for (d, want) in out_b.iter().enumerate() {
            assert!((out.get(b, d) - want).abs() < 1e-15);
        }
        // Center a moved by -lr * grad_center, which is zero for a zero context.
        assert_eq!(model.input_vectors.row(a), c0.as_slice());
    }

    #[test]
    fn cliques_separate() {
        let cliques = [["a0", "a1", "a2", "a3"], ["b0", "b1", "b2", "b3"]];
        let mut rng = Rng::new(21);
        let corpus: Vec<TokenStream> = (0..40)
            .map(|i| {
                let clique = &cliques[i % 2];
                let ws: Vec<String> = (0..12).map(|_| clique[rng.below(4)].to_string()).collect();
                stream(&ws)
            })
            .collect();
        let config = Word2vecConfig {
            vector_dim: 10,
            min_count: 1,
            iterations: 20,
            window: 2,
            negatives_per_positive: 3,
            ..Word2vecConfig::default()
        };
        let model = train(&corpus, &config).unwrap();
        let (mut intra, mut inter) = (Vec::new(), Vec::new());
        let all: Vec<(usize, &str)> = cliques
            .iter()
            .enumerate()
            .flat_map(|(c, ws)| ws.iter().map(move |w| (c, *w)))
            .collect();
        for (i, (ci, wi)) in all.iter().enumerate() {
            for (cj, wj) in &all[i + 1..] {
                let sim = model.cosine_similarity(wi, wj).unwrap();
                if ci == cj { intra.push(sim) } else { inter.push(sim) }
            }
        }
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        assert!(mean(&intra) > mean(&inter), "intra {} inter {}", mean(&intra), mean(&inter));
    }

    #[test]
    fn zero_iterations_keep_initialization() {
        let corpus = vec![stream(&words("a b c a b c"))];
        let config = Word2vecConfig {
            vector_dim: 4,
            min_count: 1,
            iterations: 0,
            ..Word2vecConfig::default()
        };
        let model = train(&corpus, &config).unwrap();
        let mut rng = Rng::new(config.seed);
        assert_eq!(model.input_vectors, Matrix::uniform(3, 4, 0.125, &mut rng));
        assert!(model.epoch_losses.is_empty());
    }

    #[test]
    fn training_is_reproducible() {
        let corpus: Vec<TokenStream> = (0..5).map(|i| stream(&words(&format!("a b c d{} e a b", i % 2)))).collect();
        let config = Word2vecConfig {
            vector_dim: 8,
            min_count: 1,
            iterations: 3,
            ..Word2vecConfig::default()
        };
        let a = train(&corpus, &config).unwrap();
        let b = train(&corpus, &config).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.epoch_losses.len(), 3);
    }

    #[test]
    fn rejects_empty_and_filtered_corpora() {
        assert!(matches!(train(&[], &Word2vecConfig::default()), Err(Error::Empty(_))));
        let corpus = vec![stream(&words("a b"))];
        assert!(train(&corpus, &Word2vecConfig::default()).is_err());
    }

    proptest! {
        #[test]
        fn negatives_never_equal_context(counts in proptest::collection::vec(1u64..50, 2..10), seed: u64) {
            let sampler = NegativeSampler::new(&counts);
            let mut rng = Rng::new(seed);
            for exclude in 0..counts.len() {
                for _ in 0..20 {
                    let k = sampler.draw(exclude, &mut rng).unwrap();
                    prop_assert!(k != exclude && k < counts.len());
                }
            }
        }
    }

    #[test]
    fn sampler_follows_three_quarter_power() {
        let counts = [1u64, 16, 81];
        let sampler = NegativeSampler::new(&counts);
        let mut rng = Rng::new(3);
        let mut hits = [0usize; 3];
        let n = 60_000;
        for _ in 0..n {
            hits[sampler.draw_any(&mut rng)] += 1;
        }
        // Weights 1, 8, 27 out of 36.
        for (h, w) in hits.iter().zip([1.0, 8.0, 27.0]) {
            assert!((*h as f64 / n as f64 - w / 36.0).abs() < 0.01);
        }
        assert_eq!(NegativeSampler::new(&[5]).draw(0, &mut rng), None);
    }
}
