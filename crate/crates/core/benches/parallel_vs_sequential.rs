use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use claimq::harness::synth;
use claimq::par;
use claimq::relation::{Embedder, FeatureHashEmbedder};
use claimq::stats::{ConfidenceState, CsKind, CsMode};

/// Runs one betting confidence sequence over a deterministic bit stream.
fn cs_stream(seed: &u64) -> (f64, f64) {
    let mut st = ConfidenceState::new(0.05, CsMode::WithReplacement, CsKind::Betting);
    let mut x = *seed | 1;
    for _ in 0..400 {
        x ^= x << 13;
        x ^= x >> 7;
        x ^= x << 17;
        st.update(x % 10 < 3).unwrap();
    }
    st.interval()
}

fn bench_cs(c: &mut Criterion) {
    let seeds: Vec<u64> = (0..256).collect();
    let mut g = c.benchmark_group("cs_streams");
    g.bench_function(BenchmarkId::new("sequential", seeds.len()), |b| {
        b.iter(|| par::map_seq(black_box(&seeds), cs_stream))
    });
    #[cfg(feature = "parallel")]
    g.bench_function(BenchmarkId::new("parallel", seeds.len()), |b| {
        b.iter(|| par::map_par(black_box(&seeds), cs_stream))
    });
    g.finish();
}

fn bench_embed(c: &mut Criterion) {
    let texts: Vec<String> = synth::generate(&synth::SynthConfig::default())
        .into_iter()
        .map(|r| r.text)
        .collect();
    let emb = FeatureHashEmbedder::default();
    let mut g = c.benchmark_group("embed_reviews");
    g.bench_function(BenchmarkId::new("sequential", texts.len()), |b| {
        b.iter(|| par::map_seq(black_box(&texts), |t| emb.embed(t)))
    });
    #[cfg(feature = "parallel")]
    g.bench_function(BenchmarkId::new("parallel", texts.len()), |b| {
        b.iter(|| par::map_par(black_box(&texts), |t| emb.embed(t)))
    });
    g.finish();
}

criterion_group!(benches, bench_cs, bench_embed);
criterion_main!(benches);
