use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};

use tda_bench::{cube_cloud, torus_cloud};
use tda_core::filtration::{build_cech, build_rips};
use tda_core::metrics::{bottleneck_distance, wasserstein_distance, Ground};
use tda_core::persistence::{compute_persistence_with, ReductionStrategy};
use tda_core::representations::{persistence_image, default_bandwidth, default_grid, WeightSpec};
use tda_core::{compute_persistence, DiagramPoint, PersistenceDiagram};

fn bench_build(c: &mut Criterion) {
    let mut group = c.benchmark_group("build");
    group.sample_size(10);
    for &n in &[200usize, 400] {
        let cloud = cube_cloud(n, 1);
        let r = 2.5 * (n as f64).ln().sqrt() / (n as f64).sqrt();
        group.bench_with_input(BenchmarkId::new("rips", n), &cloud, |b, cloud| {
            b.iter(|| build_rips(black_box(cloud), r, 1).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("cech", n), &cloud, |b, cloud| {
            b.iter(|| build_cech(black_box(cloud), r / 2.0, 1).unwrap())
        });
    }
    group.finish();
}

fn bench_reduction(c: &mut Criterion) {
    let mut group = c.benchmark_group("reduction");
    group.sample_size(10);
    let cloud = torus_cloud(300, 2);
    let complex = build_rips(&cloud, 1.95, 1).unwrap();
    group.bench_function("cohomology", |b| {
        b.iter(|| compute_persistence(black_box(&complex), 1).unwrap())
    });
    group.bench_function("homology_clearing", |b| {
        b.iter(|| {
            compute_persistence_with(black_box(&complex), 1, ReductionStrategy::Clearing).unwrap()
        })
    });
    group.finish();
}

fn random_diagram(n: usize, seed: u64) -> PersistenceDiagram {
    use rand::Rng;
    let mut rng = tda_core::rng::rng_from_seed(seed);
    let points = (0..n)
        .map(|i| {
            let birth: f64 = rng.random::<f64>();
            DiagramPoint {
                birth,
                death: birth + rng.random::<f64>() + 1e-3,
                censored: false,
                positive: i as u32,
                negative: Some(i as u32),
            }
        })
        .collect();
    PersistenceDiagram::new(1, 100.0, points)
}

fn bench_matching(c: &mut Criterion) {
    let mut group = c.benchmark_group("matching");
    group.sample_size(10);
    for &n in &[50usize, 150] {
        let d1 = random_diagram(n, 3);
        let d2 = random_diagram(n, 4);
        group.bench_with_input(BenchmarkId::new("wasserstein2", n), &n, |b, _| {
            b.iter(|| wasserstein_distance(&d1, &d2, 2.0, Ground::Euclidean).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("bottleneck", n), &n, |b, _| {
            b.iter(|| bottleneck_distance(&d1, &d2, Ground::Euclidean).unwrap())
        });
    }
    group.finish();
}

fn bench_image(c: &mut Criterion) {
    let mut group = c.benchmark_group("representation");
    group.sample_size(10);
    let d = random_diagram(500, 5);
    let w = WeightSpec::power(2.0).unwrap();
    let h = default_bandwidth(&d);
    let grid = default_grid(&d, h, 40);
    group.bench_function("persistence_image_500pts_40x40", |b| {
        b.iter(|| persistence_image(&d, &w, &grid, h).unwrap())
    });
    group.finish();
}

criterion_group!(benches, bench_build, bench_reduction, bench_matching, bench_image);
criterion_main!(benches);
