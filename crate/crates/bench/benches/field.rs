use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use permfield::cycles::sample_cycle_structure;
use permfield::field::{eval_point, scan_max};
use permfield::ratefn::{lambda, solve_xcrit, tilted_tail_estimate};
use permfield::rng::stream;
use permfield::{Mesh, TorusPoint};
use permfield_bench::fixture;
use std::hint::black_box;

fn scan(c: &mut Criterion) {
    let mut group = c.benchmark_group("scan_max");
    group.sample_size(10);
    for n in [10_000u64, 100_000, 1_000_000] {
        let (_, spec) = fixture(n, 1);
        let mesh = Mesh::new(2 * n, 1, 7).unwrap();
        group.throughput(Throughput::Elements(2 * n));
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| scan_max(black_box(&spec), &mesh, false).unwrap())
        });
    }
    group.finish();
}

fn eval(c: &mut Criterion) {
    let (_, spec) = fixture(1_000_000, 2);
    let t = TorusPoint::float(permfield::torus::GOLDEN);
    c.bench_function("eval_point/1e6", |b| b.iter(|| eval_point(black_box(&spec), t).unwrap()));
}

fn sample(c: &mut Criterion) {
    let mut group = c.benchmark_group("sample_cycle_structure");
    for n in [1_000u64, 1_000_000, 1_000_000_000] {
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, &n| {
            let mut rng = stream(3, &[n]);
            b.iter(|| sample_cycle_structure(black_box(n), &mut rng).unwrap())
        });
    }
    group.finish();
}

fn rate(c: &mut Criterion) {
    c.bench_function("lambda", |b| b.iter(|| lambda(black_box(11.75)).unwrap()));
    c.bench_function("solve_xcrit", |b| b.iter(solve_xcrit));
    let x = solve_xcrit().x_crit;
    let mut group = c.benchmark_group("tilted_tail_estimate");
    group.sample_size(10);
    group.bench_function("q32/1e5", |b| b.iter(|| tilted_tail_estimate(x, 32, 100_000, 4).unwrap()));
    group.finish();
}

criterion_group!(benches, scan, eval, sample, rate);
criterion_main!(benches);
