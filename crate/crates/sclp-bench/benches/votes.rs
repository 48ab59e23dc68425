//! Global vote accumulation: per-target scans versus the block/class table.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sclp::{build_global_prior, global_votes, BlockClassMass, GlobalPrior, LabeledSuperpixel, Voter};

const CLASSES: usize = 8;
const BLOCKS: usize = 36;
const VOTERS: usize = 300;

fn random_scene(seed: u64) -> (Vec<Voter>, GlobalPrior) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let images: Vec<Vec<LabeledSuperpixel>> = (0..12)
        .map(|_| {
            (0..40)
                .map(|_| LabeledSuperpixel {
                    class_id: rng.random_range(0..CLASSES) as i32,
                    block: rng.random_range(0..BLOCKS),
                    pixel_count: rng.random_range(50..2000),
                })
                .collect()
        })
        .collect();
    let prior = build_global_prior(&images, CLASSES, BLOCKS, 0.0).expect("valid prior");
    let voters: Vec<Voter> = (0..VOTERS)
        .map(|_| Voter {
            block: rng.random_range(0..BLOCKS),
            class_id: rng.random_range(0..CLASSES),
            confidence: rng.random_range(0.05..1.0),
            pixel_count: rng.random_range(50..2000),
        })
        .collect();
    (voters, prior)
}

fn bench_votes(c: &mut Criterion) {
    let (voters, prior) = random_scene(9);

    c.bench_function("global_votes_per_voter_scan", |b| {
        b.iter(|| {
            for target in &voters {
                black_box(
                    global_votes(black_box(target.block), &voters, &prior).expect("votes"),
                );
            }
        })
    });
    c.bench_function("global_votes_block_table", |b| {
        b.iter(|| {
            let table =
                BlockClassMass::accumulate(&voters, BLOCKS, CLASSES).expect("table");
            for target in &voters {
                black_box(table.global_votes(black_box(target.block), &prior).expect("votes"));
            }
        })
    });
}

criterion_group!(benches, bench_votes);
criterion_main!(benches);
