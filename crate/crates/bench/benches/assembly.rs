use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};

use mlnhardy::operators::{assemble_fractional, AssemblyOptions};
use mlnhardy::solver::{self, SolverOptions};
use mlnhardy_bench::{ball, operators, singular_rhs};

fn assembly(c: &mut Criterion) {
    let mut group = c.benchmark_group("fractional_assembly");
    group.sample_size(10);
    for n in [12, 16] {
        let mesh = ball(n);
        group.bench_with_input(BenchmarkId::from_parameter(mesh.interior_count()), &mesh, |b, mesh| {
            b.iter(|| assemble_fractional(mesh, 0.5, AssemblyOptions::default()).unwrap())
        });
    }
    group.finish();
}

fn matvec(c: &mut Criterion) {
    let ops = operators(16, 0.5);
    let u = singular_rhs(&ops);
    let mut out = vec![0.0; ops.size()];
    c.bench_function("apply_n16", |b| b.iter(|| ops.apply(0.1, black_box(u.values()), &mut out)));
}

fn solve(c: &mut Criterion) {
    let mut group = c.benchmark_group("solve");
    group.sample_size(10);
    for n in [12, 16] {
        let ops = operators(n, 0.5);
        let f = singular_rhs(&ops);
        group.bench_function(BenchmarkId::from_parameter(ops.size()), |b| {
            b.iter(|| solver::solve_linear(&ops, 0.15, &f, SolverOptions::default()).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, assembly, matvec, solve);
criterion_main!(benches);
