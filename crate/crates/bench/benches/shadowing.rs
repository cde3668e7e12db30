use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use lorenz_shadow::falsifier::{minimize_functional, SearchOptions};
use lorenz_shadow::model::{Case, ModelParams};
use lorenz_shadow::shadowing::{Mode, Reparam, Shadower};
use lorenz_shadow::PseudoOrbit;

fn bench_shadowing(c: &mut Criterion) {
    let p = ModelParams::for_case(Case::C);
    c.bench_function("build pseudo-orbit K=8", |b| {
        b.iter(|| black_box(PseudoOrbit::build(&p, 8).unwrap()))
    });

    let o = PseudoOrbit::build(&p, 8).unwrap();
    let y = *o.point(0).unwrap();
    let h = Reparam::identity();
    c.bench_function("segment integral", |b| {
        b.iter(|| {
            let s = Shadower::new(&o, y, h.clone()).unwrap();
            black_box(s.segment_integral(2).unwrap())
        })
    });
    c.bench_function("average functional n=32", |b| {
        b.iter(|| {
            let s = Shadower::new(&o, y, h.clone()).unwrap();
            black_box(s.functional(Mode::Average, 32).unwrap())
        })
    });

    let mut group = c.benchmark_group("search");
    group.sample_size(10);
    let opts = SearchOptions {
        budget: 4,
        threads: Some(1),
        ..SearchOptions::default()
    };
    group.bench_function("minimize_functional budget 4", |b| {
        b.iter(|| black_box(minimize_functional(&o, 0.1, &opts).unwrap()))
    });
    group.finish();
}

criterion_group!(benches, bench_shadowing);
criterion_main!(benches);
