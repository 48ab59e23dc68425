//! Segmentation kernel throughput on synthetic banded scenes.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sclp::{compute_k, gaussian_smooth, segment, RunConfig, SceneGrammar};

fn bench_segmentation(c: &mut Criterion) {
    let mut grammar = SceneGrammar::ambiguous_default();
    grammar.width = 256;
    grammar.height = 256;
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let (image, _) = grammar.generate(&mut rng).expect("valid grammar");
    let config = RunConfig::default();
    let params = config.seg_params(image.longer_dimension());

    c.bench_function("segment_256x256", |b| {
        b.iter(|| segment(black_box(&image), black_box(&params)).expect("segmentation"))
    });
    c.bench_function("gaussian_smooth_256x256", |b| {
        b.iter(|| gaussian_smooth(black_box(&image), black_box(config.sigma)))
    });
    c.bench_function("compute_k", |b| b.iter(|| compute_k(black_box(256))));
}

criterion_group!(benches, bench_segmentation);
criterion_main!(benches);
