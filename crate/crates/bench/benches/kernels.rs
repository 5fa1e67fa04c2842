//! Per-step kernel throughput: CN band step, Poisson solve, dealiased
//! transport term, dense matrix exponential.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use num_complex::Complex64;
use poiseuille::field::{ModeField, PerturbationState};
use poiseuille::grid::Grid;
use poiseuille::nonlinear::{nonlinear_term, NonlinearState, XTransform};
use poiseuille::operators::poisson_solve;
use poiseuille::semigroup::{CnStepper, ModeOperator};
use std::hint::black_box;
use std::sync::Arc;

fn gaussian(grid: &Arc<Grid>, k: usize) -> ModeField {
    ModeField::from_fn(Arc::clone(grid), k, |y| {
        Complex64::new(0.5 * (-y * y).exp(), 0.1 * y * (-y * y).exp())
    })
}

fn bench_cn_step(c: &mut Criterion) {
    let mut group = c.benchmark_group("cn_step");
    for ny in [256usize, 1024] {
        let grid = Arc::new(Grid::new(6.0, ny, 4).unwrap());
        let op = ModeOperator::new(Arc::clone(&grid), 1, 1e-3).unwrap();
        let stepper = CnStepper::new(&op, 1e-3);
        let w = gaussian(&grid, 1);
        group.bench_with_input(BenchmarkId::from_parameter(ny), &ny, |b, _| {
            b.iter(|| black_box(stepper.step(black_box(&w)).unwrap()))
        });
    }
    group.finish();
}

fn bench_poisson(c: &mut Criterion) {
    let mut group = c.benchmark_group("poisson_solve");
    for ny in [256usize, 1024] {
        let grid = Arc::new(Grid::new(6.0, ny, 4).unwrap());
        let w = gaussian(&grid, 2);
        group.bench_with_input(BenchmarkId::from_parameter(ny), &ny, |b, _| {
            b.iter(|| black_box(poisson_solve(black_box(&w)).unwrap()))
        });
    }
    group.finish();
}

fn bench_nonlinear_term(c: &mut Criterion) {
    let mut group = c.benchmark_group("nonlinear_term");
    for kmax in [4usize, 16] {
        let grid = Arc::new(Grid::new(6.0, 512, kmax).unwrap());
        let mut omega = PerturbationState::zero(&grid);
        for k in 0..=kmax {
            omega.modes[k] = gaussian(&grid, k);
        }
        let state = NonlinearState::new(omega).unwrap();
        let transform = XTransform::new(4 * kmax, kmax).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(kmax), &kmax, |b, _| {
            b.iter(|| black_box(nonlinear_term(black_box(&state), &transform).unwrap()))
        });
    }
    group.finish();
}

fn bench_dense_expm(c: &mut Criterion) {
    let grid = Arc::new(Grid::new(6.0, 64, 2).unwrap());
    let op = ModeOperator::new(Arc::clone(&grid), 1, 1e-2).unwrap();
    c.bench_function("dense_expm_ny64", |b| {
        b.iter(|| black_box(op.dense_expm(black_box(1.0)).unwrap()))
    });
}

criterion_group!(
    benches,
    bench_cn_step,
    bench_poisson,
    bench_nonlinear_term,
    bench_dense_expm
);
criterion_main!(benches);
