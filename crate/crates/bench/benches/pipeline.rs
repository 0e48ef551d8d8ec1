//! Throughput benchmarks for the hot paths: the in-place bit transform,
//! successive-cancellation decoding, profile estimation, and full code
//! construction.

use std::time::Duration;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use polarsec::bitchan::{
    construct_code, exact_entropy_profile, mc_entropy_profile, ConstructParams, ConstructionMode,
};
use polarsec::codec::{posterior_leaves, sc_decode, FrozenMap};
use polarsec::polar::transform_in_place;
use polarsec::probability::WiretapChannel;
use polarsec::Pmf;

fn rng() -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(0x5eed)
}

fn bench_transform(c: &mut Criterion) {
    let mut group = c.benchmark_group("transform");
    for log_n in [10usize, 14, 18] {
        let n = 1usize << log_n;
        let mut rng = rng();
        let mut bits: Vec<u8> = (0..n).map(|_| rng.gen_range(0..2u8)).collect();
        group.throughput(Throughput::Elements(n as u64));
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| transform_in_place(&mut bits).unwrap());
        });
    }
    group.finish();
}

fn bench_sc_decode(c: &mut Criterion) {
    let channel = WiretapChannel::bsc_cascade(0.05, 0.15, Pmf::uniform(2)).unwrap();
    let source = channel.source();
    let xy = source.xy_joint();
    let mut group = c.benchmark_group("sc_decode");
    group.measurement_time(Duration::from_secs(3));
    for log_n in [8usize, 10, 12] {
        let n = 1usize << log_n;
        let mut rng = rng();
        let sides: Vec<usize> = (0..n).map(|_| rng.gen_range(0..2usize)).collect();
        let leaves = posterior_leaves(&xy, &sides).unwrap();
        let frozen = FrozenMap::free(n);
        group.throughput(Throughput::Elements(n as u64));
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| sc_decode(&leaves, &frozen).unwrap());
        });
    }
    group.finish();
}

fn bench_profiles(c: &mut Criterion) {
    let channel = WiretapChannel::bsc_cascade(0.05, 0.15, Pmf::uniform(2)).unwrap();
    let xy = channel.source().xy_joint();
    let mut group = c.benchmark_group("entropy_profile");
    group.sample_size(10);
    group.bench_function("exact_n8", |b| {
        b.iter(|| exact_entropy_profile(&xy, 8).unwrap());
    });
    group.bench_function("mc_n256_t200", |b| {
        b.iter(|| mc_entropy_profile(&xy, 256, 200, 7).unwrap());
    });
    group.finish();
}

fn bench_construction(c: &mut Criterion) {
    let channel = WiretapChannel::bsc_cascade(0.05, 0.15, Pmf::uniform(2)).unwrap();
    let source = channel.source();
    let hash = channel.content_hash();
    let mut group = c.benchmark_group("construct");
    group.sample_size(10);
    group.measurement_time(Duration::from_secs(5));
    group.bench_function("mc_l64_m4_t500", |b| {
        let params = ConstructParams {
            l: 64,
            m: 4,
            eps1: 0.1,
            eps2: 0.1,
            mode: ConstructionMode::Mc,
            trials: 500,
            seed: 9,
            keep_profiles: false,
        };
        b.iter(|| construct_code(&source, &hash, &params).unwrap());
    });
    group.finish();
}

criterion_group!(
    benches,
    bench_transform,
    bench_sc_decode,
    bench_profiles,
    bench_construction
);
criterion_main!(benches);
