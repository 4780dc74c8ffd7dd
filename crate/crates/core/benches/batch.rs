use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sessrec_core::batch::batch_recommend;
use sessrec_core::synth::{generate, SyntheticSpec};
use sessrec_core::{recommend, DegreeScope, Execution, RecommendParams, Variant};

fn shop_graph() -> sessrec_core::SessionGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    generate(&SyntheticSpec::shop_week(), &mut rng).unwrap()
}

fn single_seed(c: &mut Criterion) {
    let g = shop_graph();
    let seed = g.objects()[g.object_count() / 2].clone();
    let mut group = c.benchmark_group("recommend_one");
    for (name, params) in [
        ("base", RecommendParams::default()),
        ("global", RecommendParams::default().with_scope(DegreeScope::Global)),
        ("three_layer", RecommendParams::default().with_variant(Variant::ThreeLayer)),
    ] {
        group.bench_function(name, |b| b.iter(|| black_box(recommend(&g, &seed, &params).unwrap())));
    }
    group.finish();
}

fn batch(c: &mut Criterion) {
    let g = shop_graph();
    let seeds = g.objects().to_vec();
    let mut group = c.benchmark_group("recommend_all_objects");
    group.sample_size(20);
    for variant in [Variant::Base, Variant::ThreeLayer] {
        let params = RecommendParams::default().with_variant(variant);
        for exec in [Execution::Sequential, Execution::Parallel] {
            group.bench_with_input(BenchmarkId::new(format!("{variant}"), format!("{exec:?}")), &exec, |b, &exec| {
                b.iter(|| black_box(batch_recommend(&g, &seeds, &params, exec)))
            });
        }
    }
    group.finish();
}

criterion_group!(benches, single_seed, batch);
criterion_main!(benches);
