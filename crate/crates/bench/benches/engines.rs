use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use nlqnd::cluster::fusion_link;
use nlqnd::oracle::mc_estimate;
use nlqnd::protocols::closed_form_noise;
use nlqnd::{build, build_cluster, fuse, nullifiers, optimize, Case, OptimizerOptions, Problem, Scheme};
use nlqnd_bench::{cluster_spec, ideal_points, lossy_points, ETA, G, T};

fn engines(c: &mut Criterion) {
    let mut group = c.benchmark_group("build");
    for p in lossy_points() {
        group.bench_with_input(BenchmarkId::new("both engines", p.scheme()), &p, |b, p| {
            b.iter(|| build(black_box(p)).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("closed form", p.scheme()), &p, |b, p| {
            b.iter(|| closed_form_noise(black_box(p)).unwrap())
        });
    }
    group.finish();
}

fn optimizer(c: &mut Criterion) {
    let mut group = c.benchmark_group("optimize");
    group.sample_size(10);
    let opts = OptimizerOptions::default();
    for s in Scheme::ALL {
        let problem = Problem::new(s, G, T, ETA, Case::On);
        group.bench_function(BenchmarkId::from_parameter(s), |b| b.iter(|| optimize(black_box(&problem), &opts).unwrap()));
    }
    group.finish();
}

fn monte_carlo(c: &mut Criterion) {
    let mut group = c.benchmark_group("monte carlo");
    group.sample_size(10);
    for p in ideal_points() {
        let r = build(&p).unwrap();
        group.bench_function(BenchmarkId::from_parameter(p.scheme()), |b| {
            b.iter(|| mc_estimate(black_box(&r), 20_000, 1).unwrap())
        });
    }
    group.finish();
}

fn clusters(c: &mut Criterion) {
    let mut group = c.benchmark_group("cluster");
    for pairs in [2, 8, 32] {
        let spec = cluster_spec(pairs);
        group.bench_with_input(BenchmarkId::new("build + nullifiers", pairs), &spec, |b, spec| {
            b.iter(|| nullifiers(&build_cluster(black_box(spec)).unwrap()).unwrap())
        });
    }
    let link = fusion_link(G, T, ETA, Case::On).unwrap();
    let (a, b) = (cluster_spec(4), cluster_spec(4));
    group.bench_function("fuse 4+4", |bench| bench.iter(|| fuse(black_box(&a), &b, &link).unwrap()));
    group.finish();
}

criterion_group!(benches, engines, optimizer, monte_carlo, clusters);
criterion_main!(benches);
