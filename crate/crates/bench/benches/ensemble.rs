use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use disorder_core::ensemble::{ensemble_cavity_greens, EnsembleConfig};
use disorder_core::{
    assemble_huckel, build_topology, ensemble_average, CavityParams, DisorderSpec, Elements,
    SpectralGrid, TopologyKind, Window,
};

fn sampling(c: &mut Criterion) {
    let grid = SpectralGrid::from_window(&Window::new(-3.0, 3.0, 201).unwrap(), 0.0).unwrap();
    let cfg = EnsembleConfig::new(2_000, 1, DisorderSpec::cauchy(0.1).unwrap(), 0.02).unwrap();

    let t = build_topology(TopologyKind::Star, 7, None).unwrap();
    let spec = assemble_huckel(&t, 0.0, 1.0, 0.1).unwrap();
    c.bench_function("ensemble_star7_diagonal_2k", |b| {
        b.iter(|| ensemble_average(black_box(&spec), &cfg, &grid, &Elements::Diagonal).unwrap())
    });

    let cavity = CavityParams::from_molecules(0.0, 0.0, 0.05, 200, 0.03).unwrap();
    c.bench_function("ensemble_cavity200_gcc_2k", |b| {
        b.iter(|| ensemble_cavity_greens(black_box(&cavity), &cfg, &grid).unwrap())
    });
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(10);
    targets = sampling
}
criterion_main!(benches);
