use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rmt_lab_core::dbm::{dbm_integrate, DbmOptions, ParticleConfiguration};
use rmt_lab_core::ensemble::{sample_wigner, BetaClass, EnsembleSpec, EntryLaw, PotentialSpec};
use rmt_lab_core::freeconv::{law_at_time, solve_mfc, SolverOptions};
use rmt_lab_core::measure::{ComplexPoint, MeasureSpec, SpectralMeasure};
use rmt_lab_core::spectral::eigenvalues;
use std::hint::black_box;

fn spec(class: BetaClass, n: usize) -> EnsembleSpec {
    EnsembleSpec {
        seed: 7,
        ..EnsembleSpec::new(class, n, EntryLaw::Gaussian, PotentialSpec::Quantile { measure: MeasureSpec::two_point(0.5) })
    }
}

fn solver(c: &mut Criterion) {
    let nu = SpectralMeasure::two_point(0.5).unwrap();
    let opts = SolverOptions::default();
    let mut g = c.benchmark_group("solve_mfc");
    for eta in [1e-1, 1e-3, 1e-6] {
        let z = ComplexPoint::new(0.3, eta);
        g.bench_with_input(BenchmarkId::from_parameter(eta), &z, |b, z| b.iter(|| solve_mfc(&nu, 1.0, *z, &opts).unwrap()));
    }
    g.finish();
    c.bench_function("law_at_time/two_point", |b| b.iter(|| law_at_time(black_box(&nu), 0.0, 0.5).unwrap()));
}

fn eigen(c: &mut Criterion) {
    let mut g = c.benchmark_group("eigenvalues");
    g.sample_size(10);
    for (class, n) in [(BetaClass::RealSymmetric, 200), (BetaClass::RealSymmetric, 500), (BetaClass::ComplexHermitian, 200)] {
        let h = sample_wigner(&spec(class, n)).unwrap();
        g.bench_with_input(BenchmarkId::new(format!("{class:?}"), n), &h, |b, h| b.iter(|| eigenvalues(h).unwrap()));
    }
    g.finish();
}

fn dbm(c: &mut Criterion) {
    let mut g = c.benchmark_group("dbm_integrate");
    g.sample_size(10);
    for n in [10, 50] {
        let x: Vec<f64> = (0..n).map(|i| -2.0 + 4.0 * (i as f64 + 0.5) / n as f64).collect();
        let x0 = ParticleConfiguration::new(x, 0.0, BetaClass::RealSymmetric).unwrap();
        let opts = DbmOptions::default();
        g.bench_with_input(BenchmarkId::from_parameter(n), &x0, |b, x0| b.iter(|| dbm_integrate(x0, 0.05, &opts, 3).unwrap()));
    }
    g.finish();
}

criterion_group!(benches, solver, eigen, dbm);
criterion_main!(benches);
