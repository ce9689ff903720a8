use criterion::{black_box, criterion_group, criterion_main, BatchSize, Criterion};
use vulnlex::bilstm::{BiLstmNetwork, Mode, NetworkConfig};
use vulnlex::corpus::{synthetic, VulnClass};
use vulnlex::embedding::{self, Word2vecConfig};
use vulnlex::evaluation::roc;
use vulnlex::lexer::{tokenize, TokenStream};
use vulnlex::numerics::Rng;

fn corpus(n: usize) -> Vec<TokenStream> {
    VulnClass::ALL
        .iter()
        .flat_map(|&c| synthetic::generate(c, n, 7))
        .map(|s| tokenize(&s.code))
        .collect()
}

fn lexer(c: &mut Criterion) {
    let sources: Vec<String> = synthetic::generate(VulnClass::SqlInjection, 200, 3).into_iter().map(|s| s.code).collect();
    c.bench_function("lexer/200 snippets", |b| {
        b.iter(|| sources.iter().map(|s| tokenize(black_box(s)).tokens.len()).sum::<usize>())
    });
}

fn word2vec(c: &mut Criterion) {
    let streams = corpus(30);
    let config = Word2vecConfig { vector_dim: 100, min_count: 2, iterations: 1, ..Word2vecConfig::default() };
    let mut group = c.benchmark_group("word2vec");
    group.sample_size(10);
    group.bench_function("one epoch, dim 100", |b| b.iter(|| embedding::train(black_box(&streams), &config).unwrap()));
    group.finish();
}

fn bilstm(c: &mut Criterion) {
    let streams = corpus(10);
    let config = Word2vecConfig { vector_dim: 32, min_count: 1, iterations: 1, ..Word2vecConfig::default() };
    let model = embedding::train(&streams, &config).unwrap();
    let seq = model.embed_sequence(&streams[0], 200);
    let mut rng = Rng::new(5);
    let net = BiLstmNetwork::new(NetworkConfig::new(32), &mut rng).unwrap();

    let mut group = c.benchmark_group("bilstm");
    group.sample_size(20);
    group.bench_function("forward", |b| {
        b.iter(|| net.forward(black_box(&seq.matrix), seq.valid_len, Mode::Infer).unwrap())
    });
    group.bench_function("forward+backward", |b| {
        b.iter_batched(
            || net.zeros_like(),
            |mut grad| {
                let cache = net.forward(&seq.matrix, seq.valid_len, Mode::Infer).unwrap();
                net.backward(&cache, 1.0, &mut grad).unwrap();
                grad
            },
            BatchSize::SmallInput,
        )
    });
    group.finish();
}

fn roc_curve(c: &mut Criterion) {
    let mut rng = Rng::new(9);
    let scores: Vec<f64> = (0..10_000).map(|_| (rng.below(1000) as f64) / 1000.0).collect();
    let labels: Vec<u8> = (0..10_000).map(|_| rng.bernoulli(0.3) as u8).collect();
    c.bench_function("roc/10k", |b| b.iter(|| roc(black_box(&scores), &labels).unwrap().auc));
}

criterion_group!(benches, lexer, word2vec, bilstm, roc_curve);
criterion_main!(benches);
