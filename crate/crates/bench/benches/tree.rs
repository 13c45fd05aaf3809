use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use slim_core::basis::{BasisOptions, ContinuousBasis, DesignSpec};
use slim_core::linalg::{standardize, sym_eig, GramStats};
use slim_core::simgen::{simulate, SimKind};
use slim_core::tree::grow;
use slim_core::GrowConfig;

fn split_search(c: &mut Criterion) {
    let data = simulate(SimKind::F2, 20_000, 0.0, 1).unwrap().dataset();
    let rows: Vec<usize> = (0..data.len()).collect();
    let spec = DesignSpec::fit(
        &data,
        &rows,
        &BasisOptions {
            continuous: ContinuousBasis::Linear,
            ..BasisOptions::default()
        },
    )
    .unwrap();
    let mut group = c.benchmark_group("root_split_search");
    group.sample_size(10);
    for bins in [10, 50] {
        let config = GrowConfig {
            max_depth: 1,
            num_bins: bins,
            ..GrowConfig::default()
        };
        group.bench_with_input(BenchmarkId::from_parameter(bins), &config, |b, cfg| {
            b.iter(|| grow(black_box(&data), &spec, cfg).unwrap())
        });
    }
    group.finish();
}

fn gram_pass(c: &mut Criterion) {
    let data = simulate(SimKind::F1, 20_000, 0.0, 2).unwrap().dataset();
    let rows: Vec<usize> = (0..data.len()).collect();
    let spec = DesignSpec::fit(&data, &rows, &BasisOptions::default()).unwrap();
    let design = spec.design_matrix(&data).unwrap();
    let y = data.response();
    let accumulate = || {
        let mut g = GramStats::zeros(spec.width);
        for (r, &yr) in y.iter().enumerate() {
            let (cols, vals) = design.row(r);
            g.add_sparse(cols, vals, yr);
        }
        g
    };
    c.bench_function("gram_pass_20k_rows", |b| b.iter(accumulate));

    let g = accumulate();
    let std = standardize(&g).unwrap();
    c.bench_function("eigendecomposition_spline_design", |b| {
        b.iter(|| sym_eig(std.active.len(), black_box(&std.matrix)).unwrap())
    });
}

criterion_group!(benches, split_search, gram_pass);
criterion_main!(benches);
