use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use interleave_bench::pair;
use interleave_core::calculators::optimal_homogeneous;
use interleave_core::decompose::decompose;
use interleave_core::divergence::{sup_hockey_stick, Method, SweepOptions};
use interleave_core::renyi::budget_monitor;
use interleave_core::Setting;

fn sweeps(c: &mut Criterion) {
    let mut g = c.benchmark_group("hockey_stick_sweep");
    let single = pair(1, 2, 2, 3);
    let a = pair(2, 2, 2, 1);
    let b = pair(3, 2, 2, 2);
    let both = [a, b];
    for (name, setting, rounds) in [
        ("single_t3", Setting::single(&single), 3),
        ("concurrent_1+2", Setting::concurrent(&both), 3),
    ] {
        for method in [Method::Exhaustive, Method::Induction] {
            let opts = SweepOptions {
                method,
                ..SweepOptions::default()
            };
            g.bench_with_input(BenchmarkId::new(name, format!("{method:?}")), &opts, |bch, &opts| {
                bch.iter(|| sup_hockey_stick(&setting, rounds, black_box(0.5), opts).unwrap())
            });
        }
    }
    g.finish();
}

fn decomposition(c: &mut Criterion) {
    let p = pair(4, 2, 3, 3);
    let delta = sup_hockey_stick(
        &Setting::single(&p),
        3,
        0.5,
        SweepOptions {
            method: Method::Induction,
            ..SweepOptions::default()
        },
    )
    .unwrap()
    .delta;
    c.bench_function("decompose_2x3_t3", |b| b.iter(|| decompose(&p, 0.5, black_box(delta)).unwrap()));
}

fn monitor(c: &mut Criterion) {
    let mut g = c.benchmark_group("budget_monitor");
    for t in [2, 4, 6] {
        let p = pair(5, 2, 2, t);
        g.bench_with_input(BenchmarkId::from_parameter(t), &p, |b, p| b.iter(|| budget_monitor(p, black_box(2.0)).unwrap()));
    }
    g.finish();
}

fn optimal(c: &mut Criterion) {
    let mut g = c.benchmark_group("optimal_homogeneous");
    for k in [10u64, 100, 1000] {
        g.bench_with_input(BenchmarkId::from_parameter(k), &k, |b, &k| {
            b.iter(|| optimal_homogeneous(k, 0.1, 1e-6, black_box(1.0)).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, sweeps, decomposition, monitor, optimal);
criterion_main!(benches);
