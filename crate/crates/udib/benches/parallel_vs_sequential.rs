//! Compares the dispatched assignment kernel (rayon when the `parallel`
//! feature is on) against the always-available sequential reference, plus a
//! full clustering run for end-to-end numbers.
//!
//! Run `cargo bench` for the default build and
//! `cargo bench --no-default-features` to time the sequential build of the
//! dispatched paths; the outputs are bit-identical either way.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use udib::cluster::{assignment_step, assignment_step_sequential, cluster_stats};
use udib::corpus::{EmbeddingRecord, EmbeddingSet};
use udib::{run_udib, Role, UdibConfig};

fn synthetic_set(n: usize, dim: usize, seed: u64) -> EmbeddingSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let records = (0..n)
        .map(|i| EmbeddingRecord {
            id: format!("s{i}"),
            role: if i % 2 == 0 { Role::Prompt } else { Role::Answer },
            group_id: format!("g{}", i % 10),
            generation_id: 0,
            text: None,
            embedding: (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect(),
        })
        .collect();
    EmbeddingSet::from_records(records).unwrap()
}

fn bench_assignment(c: &mut Criterion) {
    let tau = 0.05;
    let mut group = c.benchmark_group("assignment_step");
    for &(n, dim, k) in &[(500usize, 64usize, 8usize), (2000, 256, 16)] {
        let set = synthetic_set(n, dim, 7);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
        let stats = cluster_stats(&set, &labels).unwrap();
        group.throughput(Throughput::Elements(n as u64));
        let id = format!("n{n}_d{dim}_k{k}");
        group.bench_with_input(BenchmarkId::new("dispatched", &id), &set, |b, set| {
            b.iter(|| assignment_step(set, &stats, tau).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("sequential", &id), &set, |b, set| {
            b.iter(|| assignment_step_sequential(set, &stats, tau).unwrap())
        });
    }
    group.finish();
}

fn bench_full_run(c: &mut Criterion) {
    let set = synthetic_set(1000, 128, 7);
    let config = UdibConfig::new(12, 0.05, 0);
    let mut group = c.benchmark_group("run_udib");
    group.sample_size(10);
    group.bench_function("n1000_d128_kmax12", |b| {
        b.iter(|| run_udib(&set, &config).unwrap())
    });
    group.finish();
}

criterion_group!(benches, bench_assignment, bench_full_run);
criterion_main!(benches);
