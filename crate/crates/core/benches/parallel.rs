//! Sequential vs rayon execution of the data-parallel stages.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use infogap::align::{align_articles, build_paragraph_graph, AlignConfig};
use infogap::eval::bootstrap_percentile_test;
use infogap::stats::imbalance::imbalance_test;
use infogap::synthetic::random_pair;
use infogap::Exec;

fn modes() -> Vec<(&'static str, Exec)> {
    let mut v = vec![("sequential", Exec::Sequential)];
    if cfg!(feature = "parallel") {
        v.push(("parallel", Exec::default()));
    }
    v
}

fn imbalance(c: &mut Criterion) {
    let mut g = c.benchmark_group("imbalance_test_S20000");
    for (name, exec) in modes() {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| imbalance_test(14, 20, 3, 12, 20_000, 1, 0.05, exec).unwrap())
        });
    }
    g.finish();
}

fn bootstrap(c: &mut Criterion) {
    let a: Vec<bool> = (0..200).map(|i| i % 5 != 0).collect();
    let b: Vec<bool> = (0..200).map(|i| i % 3 != 0).collect();
    let mut g = c.benchmark_group("bootstrap_B5000_n200");
    for (name, exec) in modes() {
        g.bench_function(BenchmarkId::from_parameter(name), |bench| {
            bench.iter(|| bootstrap_percentile_test(&a, &b, 5000, 2, exec).unwrap())
        });
    }
    g.finish();
}

fn alignment(c: &mut Criterion) {
    let pairs: Vec<_> = (0..8).map(|s| random_pair(s, 256)).collect();
    let graphs: Vec<_> = pairs.iter().map(|(s, t)| build_paragraph_graph(s, t).unwrap()).collect();
    let mut g = c.benchmark_group("align_articles_8_pairs");
    for (name, exec) in modes() {
        let config = AlignConfig {
            exec,
            ..AlignConfig::default()
        };
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| {
                for ((s, t), graph) in pairs.iter().zip(&graphs) {
                    align_articles(s, graph, t, &config).unwrap();
                }
            })
        });
    }
    g.finish();
}

criterion_group!(benches, imbalance, bootstrap, alignment);
criterion_main!(benches);
