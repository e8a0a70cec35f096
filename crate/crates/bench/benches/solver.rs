//! Benchmarks for the solver hot paths: the full density sweep, the
//! probability table, the first-passage transform identity, and a Monte
//! Carlo batch. Sample sizes are small because a single solve already runs
//! for tens of milliseconds.

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use std::hint::black_box;

use parisian_core::{
    estimate_joint, ClaimDistribution, ClassicalRuinDensity, Mode, ModelParams, ParisianSolver,
    PassageLaw, SimConfig, SolverConfig, Tolerance,
};

fn model(u: f64, c: f64) -> ModelParams {
    ModelParams::new(u, c, 1.0, ClaimDistribution::exponential(1.0).unwrap(), 2.0).unwrap()
}

fn config(mode: Mode, n_max: usize, t_max: f64) -> SolverConfig {
    SolverConfig {
        mode,
        n_max,
        t_max: Some(t_max),
        step: None,
        tol: Tolerance::default(),
    }
}

fn bench_solve(c: &mut Criterion) {
    let mut group = c.benchmark_group("solve");
    group.sample_size(10);
    for &(mode, label) in &[(Mode::PaperFaithful, "coarse"), (Mode::Accurate, "fine")] {
        group.bench_function(format!("densities-n6-{label}"), |b| {
            let solver = ParisianSolver::new(&model(1.0, 2.0), config(mode, 6, 10.0)).unwrap();
            b.iter(|| black_box(solver.solve().unwrap()));
        });
    }
    group.bench_function("probability-table-n8", |b| {
        let solver =
            ParisianSolver::new(&model(1.0, 2.0), config(Mode::Accurate, 8, 12.0)).unwrap();
        b.iter(|| black_box(solver.probabilities().unwrap()));
    });
    group.bench_function("deficit-n4-x3", |b| {
        let solver = ParisianSolver::new(&model(0.0, 2.0), config(Mode::Accurate, 4, 8.0)).unwrap();
        b.iter(|| black_box(solver.solve_deficit(&[0.5, 1.0, 2.0]).unwrap()));
    });
    group.finish();
}

fn bench_classical(c: &mut Criterion) {
    c.bench_function("classical/partial-mass-k30", |b| {
        let density = ClassicalRuinDensity::new(model(1.0, 2.0));
        b.iter(|| black_box(density.ruin_mass_partial(black_box(1.0), 30).unwrap()));
    });
}

fn bench_passage(c: &mut Criterion) {
    let mut group = c.benchmark_group("passage");
    group.sample_size(10);
    group.bench_function("transform-identity", |b| {
        let law = PassageLaw::new(&model(0.0, 2.0), 1.0).unwrap();
        b.iter(|| black_box(law.transform_check(black_box(0.5), black_box(0.8)).unwrap()));
    });
    group.bench_function("branch-mass-k10", |b| {
        let law = PassageLaw::new(&model(0.0, 2.0), 1.0).unwrap();
        b.iter(|| black_box(law.branch_mass(black_box(10)).unwrap()));
    });
    group.finish();
}

fn bench_simulate(c: &mut Criterion) {
    let mut group = c.benchmark_group("simulate");
    group.sample_size(10);
    group.bench_function("paths-50k", |b| {
        b.iter_batched(
            || SimConfig::new(&model(1.0, 2.0), 50_000, 7),
            |cfg| black_box(estimate_joint(&cfg, 8, &[], &[]).unwrap()),
            BatchSize::PerIteration,
        );
    });
    group.finish();
}

criterion_group!(
    benches,
    bench_solve,
    bench_classical,
    bench_passage,
    bench_simulate
);
criterion_main!(benches);
