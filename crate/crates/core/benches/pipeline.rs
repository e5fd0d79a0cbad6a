use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};

use verbchunk::grammar::default_grammar;

const GOLDEN: &str = include_str!("../tests/data/golden.txt");

fn corpus(copies: usize) -> String {
    GOLDEN.repeat(copies)
}

fn chunking(c: &mut Criterion) {
    let grammar = default_grammar();
    let mut group = c.benchmark_group("chunk");
    for copies in [1, 32, 256] {
        let text = corpus(copies);
        let sentences = grammar.sentences(&text).len() as u64;
        group.throughput(Throughput::Elements(sentences));
        group.bench_with_input(BenchmarkId::new("sequential", sentences), &text, |b, t| {
            b.iter(|| grammar.chunk_text_sequential(black_box(t), false).unwrap())
        });
        #[cfg(feature = "parallel")]
        group.bench_with_input(BenchmarkId::new("parallel", sentences), &text, |b, t| {
            b.iter(|| grammar.chunk_text_parallel(black_box(t), false).unwrap())
        });
    }
    group.finish();
}

fn analysis(c: &mut Criterion) {
    let grammar = default_grammar();
    let text = corpus(32);
    c.bench_function("analyze", |b| {
        b.iter(|| grammar.analyze_text(black_box(&text)))
    });
}

criterion_group!(benches, chunking, analysis);
criterion_main!(benches);
