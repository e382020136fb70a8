use std::hint::black_box;

use bosefunc::fock::onsite_interaction;
use bosefunc::par::{map_indexed_with, Execution};
use bosefunc::qfim::qfim_functional;
use bosefunc::{build_basis, OneBodyRDM, SearchOptions, StrategyChoice};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn disk(n: usize, grid: usize) -> Vec<(f64, f64)> {
    let r = n as f64 / 2.0;
    let step = 2.0 * r / grid as f64;
    let mut pts = Vec::new();
    for i in 0..grid {
        for k in 0..grid {
            let (x, z) = (-r + (i as f64 + 0.5) * step, -r + (k as f64 + 0.5) * step);
            if x.hypot(z) <= r {
                pts.push((x, z));
            }
        }
    }
    pts
}

fn sweep(c: &mut Criterion) {
    let mut group = c.benchmark_group("qfim_sweep");
    group.sample_size(10);
    for (n, u) in [(2, -1.0), (6, 1.0)] {
        let pts = disk(n, 10);
        let w = onsite_interaction(build_basis(n), u);
        let opts = SearchOptions::default();
        for (label, exec) in [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)] {
            group.bench_with_input(BenchmarkId::new(label, format!("N{n}_u{u}")), &pts, |b, pts| {
                b.iter(|| {
                    map_indexed_with(exec, pts, |_, &(x, z)| {
                        let target = OneBodyRDM::in_plane(n, x, z).unwrap();
                        qfim_functional(&target, &w, &opts, StrategyChoice::Auto).map(|(m, _)| m.zz()).unwrap_or(f64::NAN)
                    })
                    .into_iter()
                    .map(black_box)
                    .count()
                })
            });
        }
    }
    group.finish();
}

criterion_group!(benches, sweep);
criterion_main!(benches);
