use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use ellipt_core::extension::{
    build_partition, disk_test_function, extend_1d, extend_global, reflection_function,
    unit_disk_atlas,
};
use ellipt_core::transform::{build_flattening_map, pushforward_operator};
use ellipt_core::{EllipticOperator, ScalarField};

fn reflection(c: &mut Criterion) {
    c.bench_function("reflection_function", |b| {
        b.iter(|| reflection_function(black_box(2.0), black_box(1.5), black_box(-0.3)))
    });
    let u = ScalarField::parse("(x1 + 2.625*x1^2) * (1 - x1)^3", 1).unwrap();
    let e = extend_1d(&u, 2.0, 1.5, 1.0, 1.0).unwrap();
    c.bench_function("extension_1d_value", |b| b.iter(|| e.field.value(black_box(&[-0.2]))));
    c.bench_function("extension_1d_jet", |b| b.iter(|| e.field.jet(black_box(&[-0.2]))));
}

fn flattening(c: &mut Criterion) {
    let op = EllipticOperator::parse(
        &[
            vec!["2 + 0.2*sin(x1 + x2)", "0.4 + 0.3*sin(x1)*cos(x2)"],
            vec!["0.4 + 0.3*sin(x1)*cos(x2)", "2.5 + 0.2*cos(x1 - x2)"],
        ],
        &["1", "x1"],
        "-1",
        1.0,
        5.0,
    )
    .unwrap();
    c.bench_function("flatten_and_push_forward", |b| {
        b.iter(|| {
            let f = build_flattening_map(&op, 0.5).unwrap();
            pushforward_operator(&op, &f.map).unwrap()
        })
    });
}

fn global(c: &mut Criterion) {
    let l = EllipticOperator::laplacian(2);
    let atlas = unit_disk_atlas(&l, 12, 0.3).unwrap();
    let part = build_partition(&atlas.cover(), &atlas.omega).unwrap();
    let u = disk_test_function(2).unwrap();
    let mut g = c.benchmark_group("disk");
    g.sample_size(10);
    g.bench_function("extend_global", |b| b.iter(|| extend_global(&u, &l, &atlas, &part).unwrap()));
    let e = extend_global(&u, &l, &atlas, &part).unwrap();
    g.bench_function("extension_value", |b| b.iter(|| e.field.value(black_box(&[0.8, 0.75]))));
    g.finish();
}

criterion_group!(benches, reflection, flattening, global);
criterion_main!(benches);
