use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use dade_bench::Fixture;
use dade_core::{
    linear_scan, DcoStats, DistanceComparator, HnswIndex, HnswParams, IvfIndex, IvfParams, Layout,
};

const K: usize = 10;

fn fixture() -> Fixture {
    Fixture::new(10_000, 50, 128, 32, 0.1).expect("fixture")
}

fn scan_all(c: &mut Criterion, fx: &Fixture) {
    let mut group = c.benchmark_group("linear_scan");
    group.sample_size(10);
    let fd = fx.fd();
    let dade = fx.dade();
    let ads = fx.ads(2.1);
    let cases: [(&str, &dyn DistanceComparator, &_); 3] = [
        ("fd", &fd, &fx.pca),
        ("dade", &dade, &fx.pca),
        ("ads", &ads, &fx.random),
    ];
    for (name, dco, rotated) in cases {
        group.bench_function(name, |b| {
            b.iter(|| {
                let mut stats = DcoStats::default();
                for q in rotated.queries.rows() {
                    black_box(linear_scan(&rotated.base, q, K, dco, &mut stats).unwrap());
                }
            })
        });
    }
    group.finish();
}

fn ivf(c: &mut Criterion, fx: &Fixture) {
    let params = IvfParams {
        layout: Layout::Split,
        delta_d: fx.delta_d,
        ..Default::default()
    };
    let pca_index = IvfIndex::build(&fx.pca.base, &params).unwrap();
    let random_index = IvfIndex::build(&fx.random.base, &params).unwrap();
    let (fd, dade, ads) = (fx.fd(), fx.dade(), fx.ads(2.1));
    let mut group = c.benchmark_group("ivf");
    for n_probe in [10, 40] {
        let cases: [(&str, &dyn DistanceComparator, &IvfIndex, &_); 3] = [
            ("fd", &fd, &pca_index, &fx.pca.queries),
            ("dade", &dade, &pca_index, &fx.pca.queries),
            ("ads", &ads, &random_index, &fx.random.queries),
        ];
        for (name, dco, index, queries) in cases {
            group.bench_with_input(BenchmarkId::new(name, n_probe), &n_probe, |b, &n_probe| {
                b.iter(|| {
                    let mut stats = DcoStats::default();
                    for q in queries.rows() {
                        black_box(index.search(q, K, n_probe, dco, &mut stats).unwrap());
                    }
                })
            });
        }
    }
    group.finish();
}

fn hnsw(c: &mut Criterion, fx: &Fixture) {
    let params = HnswParams {
        ef_construction: 100,
        ..Default::default()
    };
    let index = HnswIndex::build(fx.pca.base.clone(), &params).unwrap();
    let (fd, dade) = (fx.fd(), fx.dade());
    let mut group = c.benchmark_group("hnsw");
    for ef in [50, 200] {
        let cases: [(&str, &dyn DistanceComparator, bool); 3] = [
            ("fd", &fd, false),
            ("dade", &dade, false),
            ("dade-decoupled", &dade, true),
        ];
        for (name, dco, decoupled) in cases {
            group.bench_with_input(BenchmarkId::new(name, ef), &ef, |b, &ef| {
                b.iter(|| {
                    let mut stats = DcoStats::default();
                    for q in fx.pca.queries.rows() {
                        black_box(index.search(q, K, ef, dco, decoupled, &mut stats).unwrap());
                    }
                })
            });
        }
    }
    group.finish();
}

fn benches(c: &mut Criterion) {
    let fx = fixture();
    scan_all(c, &fx);
    ivf(c, &fx);
    hnsw(c, &fx);
}

criterion_group!(dco, benches);
criterion_main!(dco);
