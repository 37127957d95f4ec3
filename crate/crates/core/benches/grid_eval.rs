//! Sequential vs parallel grid evaluation. Run with `nproc=1` (or
//! `taskset -c 0`) to see the scheduling overhead of the parallel path.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use logtauber_core::catalog::catalog_get;
use logtauber_core::means::{mean_series, MeanKind};
use logtauber_core::model::{Grid, Spec};
use logtauber_core::par::Execution;
use logtauber_core::quadrature::QuadConfig;
use logtauber_core::tauberian::{condition_profile, default_n_grid, ProfileConfig};

const MODES: [(&str, Execution); 2] = [
    ("sequential", Execution::Sequential),
    ("parallel", Execution::Parallel),
];

fn means(c: &mut Criterion) {
    let f = Spec::Func(catalog_get("sin_loglog").unwrap().func.unwrap());
    let grid = Grid::log_spaced(10.0, 1e6, 32).unwrap();
    let cfg = QuadConfig::default();
    let mut group = c.benchmark_group("mean_series");
    for kind in [MeanKind::C1, MeanKind::L1] {
        for (name, exec) in MODES {
            group.bench_with_input(
                BenchmarkId::new(format!("{kind:?}"), name),
                &exec,
                |b, &exec| b.iter(|| black_box(mean_series(&f, &grid, kind, &cfg, exec).unwrap())),
            );
        }
    }
    group.finish();
}

fn profiles(c: &mut Criterion) {
    let alt = Spec::Seq(catalog_get("alt").unwrap().seq.unwrap());
    let log_u = Spec::Func(catalog_get("log_u").unwrap().func.unwrap());
    let t_grid = Grid::log_spaced(10.0, 1e4, 8).unwrap();
    let n_grid = default_n_grid();
    let mut group = c.benchmark_group("condition_profile");
    group.sample_size(10);
    for (label, spec, grid) in [("alt", &alt, &n_grid), ("log_u", &log_u, &t_grid)] {
        for (name, exec) in MODES {
            let cfg = ProfileConfig {
                exec,
                ..ProfileConfig::default()
            };
            group.bench_with_input(BenchmarkId::new(label, name), &cfg, |b, cfg| {
                b.iter(|| black_box(condition_profile(spec, grid, cfg).unwrap()))
            });
        }
    }
    group.finish();
}

criterion_group!(benches, means, profiles);
criterion_main!(benches);
