use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use ellipt_core::fields::{holder_seminorm, mollify, PairStrategy, Samples};
use ellipt_core::solver::{direct_solve, evolve, perron_solve, resolvent_solve, PerronOptions};
use ellipt_core::{DomainSpec, EllipticOperator, GridFunction, ScalarField};

fn direct(c: &mut Criterion) {
    let l = EllipticOperator::laplacian(2);
    let f = ScalarField::parse("sin(pi*x1)*x2", 2).unwrap();
    let g = ScalarField::parse("x1*x2", 2).unwrap();
    let d = DomainSpec::unit_box(2);
    let mut group = c.benchmark_group("direct_solve");
    for n in [20usize, 40, 80] {
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, &n| {
            b.iter(|| direct_solve(&l, &f, &g, &d, 1.0 / n as f64).unwrap())
        });
    }
    group.finish();
}

fn perron(c: &mut Criterion) {
    let l = EllipticOperator::laplacian(2);
    let f = ScalarField::constant(1.0, 2);
    let g = ScalarField::parse("x1^2 - x2^2 + 0.5*x1", 2).unwrap();
    let d = DomainSpec::ball(vec![0.0, 0.0], 1.0).unwrap();
    let mut group = c.benchmark_group("perron");
    group.sample_size(10);
    group.bench_function("disk_h0.05", |b| {
        b.iter(|| perron_solve(&l, &f, &g, &d, 0.05, &PerronOptions::default()).unwrap())
    });
    group.finish();
}

fn resolvent_and_evolve(c: &mut Criterion) {
    let l = EllipticOperator::laplacian(1);
    let d = DomainSpec::unit_box(1);
    let one = ScalarField::constant(1.0, 1);
    c.bench_function("resolvent_1d_h1e-3", |b| {
        b.iter(|| resolvent_solve(&l, 1.0, &one, &d, 1e-3).unwrap())
    });
    let u0 = GridFunction::from_field(d.mesh(1e-2).unwrap(), &ScalarField::parse("x1*(1 - x1)", 1).unwrap())
        .unwrap();
    c.bench_function("evolve_1d_100_steps", |b| b.iter(|| evolve(&l, &u0, &d, 1e-2, 1.0).unwrap()));
}

fn smoothing(c: &mut Criterion) {
    let mesh = DomainSpec::cuboid(vec![-0.3], vec![1.3]).unwrap().mesh(1.0 / 512.0).unwrap();
    let u = GridFunction::from_field(mesh, &ScalarField::parse("sqrt(abs(x1 - 0.4))", 1).unwrap()).unwrap();
    let inner = DomainSpec::unit_box(1);
    let mut group = c.benchmark_group("mollify");
    for k in [4u32, 16, 64] {
        group.bench_with_input(BenchmarkId::from_parameter(k), &k, |b, &k| {
            b.iter(|| mollify(black_box(&u), k, &inner).unwrap())
        });
    }
    group.finish();
    let s = Samples::from_grid(&u, None);
    c.bench_function("holder_all_pairs_820", |b| {
        b.iter(|| holder_seminorm(&s, 0.5, PairStrategy::AllPairs).unwrap())
    });
}

criterion_group!(benches, direct, perron, resolvent_and_evolve, smoothing);
criterion_main!(benches);
