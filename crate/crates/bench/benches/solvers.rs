use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use sparse_egm::cp_lasso::{build_gamma, solve_sca, CpLassoProblem, Formulation, ScaOptions};
use sparse_egm::lasso::{lambda_max, solve_lasso, LassoProblem};
use sparse_egm::spectral::{ssa_deflation, SsaParams};
use sparse_egm_bench::{activation_sequence, hermite_instance, RATE};

fn operator(c: &mut Criterion) {
    let (op, y) = hermite_instance(&[0, 2], &[0.02, 0.03, 0.04], 2.0, 1);
    let beta = op.adjoint(&y).unwrap();
    let mut out = vec![0.0; op.n_samples()];
    c.bench_function("apply 6 atoms, 2 s", |b| {
        b.iter(|| op.apply_into(black_box(&beta), &mut out))
    });
    let mut back = vec![0.0; op.len()];
    c.bench_function("adjoint 6 atoms, 2 s", |b| {
        b.iter(|| op.adjoint_into(black_box(&y), &mut back))
    });
}

fn lasso(c: &mut Criterion) {
    let (op, y) = hermite_instance(&[0, 2], &[0.02, 0.03, 0.04], 2.0, 2);
    let lambda = 0.05 * lambda_max(&op, &y).unwrap();
    let p = LassoProblem::new(&op, &y, lambda)
        .unwrap()
        .with_max_iter(2000);
    let mut group = c.benchmark_group("lasso");
    group.sample_size(10);
    group.bench_function("6 atoms, 2 s", |b| {
        b.iter(|| solve_lasso(black_box(&p), None).unwrap())
    });
    group.finish();
}

fn sca(c: &mut Criterion) {
    let (op, y) = hermite_instance(&[2], &[0.02], 1.0, 3);
    let lambda = 0.05 * lambda_max(&op, &y).unwrap();
    let mut group = c.benchmark_group("sca");
    group.sample_size(10);
    group.bench_function("1 atom, 1 s", |b| {
        b.iter(|| {
            let g = build_gamma(op.n_atoms(), op.n_positions(), 15, 1.0).unwrap();
            let p = CpLassoProblem::new(&op, &y, Formulation::Penalized { lambda }, g).unwrap();
            solve_sca(&p, &ScaOptions::default()).unwrap()
        })
    });
    group.finish();
}

fn spectral(c: &mut Criterion) {
    let seq = activation_sequence(&[4.0, 6.0, 7.0], 12.0, 4);
    let params = SsaParams::default();
    c.bench_function("ssa deflation, 3 foci, 12 s", |b| {
        b.iter(|| ssa_deflation(black_box(&seq), RATE, &params).unwrap())
    });
}

criterion_group!(benches, operator, lasso, sca, spectral);
criterion_main!(benches);
