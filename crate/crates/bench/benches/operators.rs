use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use dck_bench::{cube, pentagon};
use dck_core::solvers::{
    solve_control_constrained, solve_penalized, solve_unconstrained, StateData, Tolerances, UnconstrainedMethod,
};

fn apply_a(c: &mut Criterion) {
    let mut group = c.benchmark_group("apply_a");
    for (label, prob) in [("pentagon-64", pentagon(64)), ("pentagon-128", pentagon(128)), ("cube-16", cube(16))] {
        let u = vec![0.1; prob.n_boundary()];
        group.bench_with_input(BenchmarkId::from_parameter(label), &prob, |b, p| {
            b.iter(|| black_box(p.apply_a(black_box(&u))))
        });
    }
    group.finish();
}

fn solves(c: &mut Criterion) {
    let tol = Tolerances::default();
    let mut group = c.benchmark_group("solve");
    group.sample_size(10);

    let p = pentagon(128);
    group.bench_function("unconstrained/pentagon-128", |b| {
        b.iter(|| solve_unconstrained(&p, UnconstrainedMethod::ReducedPcg, None, &tol).unwrap())
    });
    group.bench_function("kkt-direct/pentagon-128", |b| {
        b.iter(|| solve_unconstrained(&p, UnconstrainedMethod::KktDirect, None, &tol).unwrap())
    });

    let p = pentagon(64);
    let lo = vec![f64::NEG_INFINITY; p.n_boundary()];
    let hi = vec![0.16; p.n_boundary()];
    group.bench_function("control/pentagon-64", |b| {
        b.iter(|| solve_control_constrained(&p, (&lo, &hi), None, None, 1.0, &tol).unwrap())
    });

    let state = StateData::constant(&p, 0.15);
    group.bench_function("penalized-1e4/pentagon-64", |b| {
        b.iter(|| solve_penalized(&p, 1e4, &state, None, None, 1.0, &tol).unwrap())
    });
    group.finish();
}

criterion_group!(benches, apply_a, solves);
criterion_main!(benches);
