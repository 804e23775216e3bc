//! Timings for the hot paths: weight propagation and the final estimator on
//! ring families (dense dependencies, the worst case for exact fusion),
//! ideality testing on random topologies, and redundancy reduction.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use ffnet_core::analysis::{is_ideal, reduce, ring_network};
use ffnet_core::ensemble::random_network;
use ffnet_core::estimation::final_estimate;
use ffnet_core::net::PrecisionVector;

fn ring_final_estimate(c: &mut Criterion) {
    let mut group = c.benchmark_group("ring_final_estimate");
    for n in [10, 30, 100] {
        let net = ring_network(n).unwrap();
        let precisions = PrecisionVector::ones(net.layer_size(1));
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| final_estimate(&net, &precisions).unwrap())
        });
    }
    group.finish();
}

fn random_ideality(c: &mut Criterion) {
    let mut group = c.benchmark_group("random_is_ideal");
    for (sizes, p, seed) in [
        (vec![30usize, 25], 0.3, 7u64),
        (vec![30, 25], 0.8, 7),
        (vec![20, 18, 15], 0.5, 7),
    ] {
        let net = random_network(&sizes, p, seed).unwrap();
        let precisions = PrecisionVector::ones(sizes[0]);
        let label = format!(
            "{}_p{p}",
            sizes.iter().map(|s| s.to_string()).collect::<Vec<_>>().join("x")
        );
        group.bench_function(BenchmarkId::from_parameter(label), |b| {
            b.iter(|| is_ideal(&net, &precisions).unwrap())
        });
    }
    group.finish();
}

fn reduction(c: &mut Criterion) {
    // Dense draws produce many containment pairs, so reduce has real work.
    let net = random_network(&[40, 35], 0.85, 3).unwrap();
    c.bench_function("reduce_40x35_p0.85", |b| b.iter(|| reduce(&net).unwrap()));
}

criterion_group!(benches, ring_final_estimate, random_ideality, reduction);
criterion_main!(benches);
