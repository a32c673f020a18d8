use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use divtree_bench::{pipeline, square_problem, CHAIN, CUSP, HOLDER};

fn local_solver(c: &mut Criterion) {
    let mut group = c.benchmark_group("bogovskii");
    group.sample_size(10);
    for cells in [8, 16] {
        let (solver, fs) = square_problem(cells, 1);
        group.bench_with_input(BenchmarkId::new("raw", cells), &fs, |b, fs| b.iter(|| solver.solve_flux_many(fs, 0.0, 0).unwrap()));
        group.bench_with_input(BenchmarkId::new("corrected", cells), &fs, |b, fs| b.iter(|| solver.solve_flux_many(fs, 1e-3, 3).unwrap()));
    }
    let (solver, fs) = square_problem(16, 8);
    group.bench_function("batched_8", |b| b.iter(|| solver.solve_flux_many(&fs, 0.0, 0).unwrap()));
    group.finish();
}

fn decomposition(c: &mut Criterion) {
    let mut group = c.benchmark_group("decompose");
    for (name, json) in [("chain", CHAIN), ("holder", HOLDER), ("cusp", CUSP)] {
        let p = pipeline(json);
        let f = p.data().unwrap();
        group.bench_function(name, |b| b.iter(|| p.decompose(&f).unwrap()));
    }
    group.finish();
}

fn geometry(c: &mut Criterion) {
    let mut group = c.benchmark_group("build");
    group.sample_size(10);
    group.bench_function("holder", |b| b.iter(|| pipeline(HOLDER)));
    group.finish();
}

criterion_group!(benches, local_solver, decomposition, geometry);
criterion_main!(benches);
