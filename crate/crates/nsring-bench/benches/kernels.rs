use criterion::{criterion_group, criterion_main, Criterion};
use nsring::axisym::build_ring_operator;
use nsring::euler2d::{mode_operator, mode_spectrum, solve_stream_mode, Weight};
use nsring::numerics::{Mapping, PolarGrid, RadialGrid};
use nsring::profiles::{truncate, Family, VortexProfile};
use nsring::selfsim::{build_selfsim, Propagator};
use std::hint::black_box;

fn seed() -> VortexProfile {
    VortexProfile::new(Family::TailP2 { amp: 2.5, tail: 0.05, shield: 4.0, width: 1.0 }, 2).unwrap()
}

fn planar(c: &mut Criterion) {
    let p = seed();
    let grid = RadialGrid::new(96, 48.0, Mapping::Geometric).unwrap();
    let g = grid.sample(|r| r * r * (-r * r).exp());
    c.bench_function("stream_solve_n2_96", |b| b.iter(|| solve_stream_mode(&grid, 2, black_box(&g)).unwrap()));
    let op = mode_operator(&p, &grid, 2, Weight::Plain);
    c.bench_function("mode_spectrum_n2_96", |b| b.iter(|| mode_spectrum(black_box(&op)).unwrap()));
}

fn ring(c: &mut Criterion) {
    let base = PolarGrid::new(64, 6, 5.0, None).unwrap();
    let t = truncate(&seed(), 4.0, &base.radial).unwrap();
    let mut group = c.benchmark_group("ring");
    group.sample_size(10);
    group.bench_function("build_operator_ell32", |b| b.iter(|| build_ring_operator(&t, &base, Some(32.0)).unwrap()));
    let ss = build_selfsim(&t, &base, 32.0).unwrap();
    let prop = Propagator::new(ss.parts.l_vor(100.0).unwrap(), 1e-3).unwrap();
    let u0 = vec![1.0; prop.dim()];
    let u1 = prop.step(&u0, None, None);
    group.bench_function("bdf2_step_beta100", |b| b.iter(|| prop.step(black_box(&u1), Some(&u0), None)));
    group.finish();
}

criterion_group!(benches, planar, ring);
criterion_main!(benches);
