//! Parallel vs sequential execution of a convergence grid and of the
//! modal reference solution.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use fracfk::harness::{build_example, run_convergence_study, Example, ExperimentConfig, Format};
use fracfk::par::Execution;
use fracfk::reference::modal_final_value;
use fracfk::spatial::SpectralOperator;
use fracfk::stepper::Scheme;

const MODES: [(&str, Execution); 2] = [("parallel", Execution::Parallel), ("sequential", Execution::Sequential)];

fn study(c: &mut Criterion) {
    let mut group = c.benchmark_group("convergence_grid");
    group.sample_size(10);
    for (name, exec) in MODES {
        let config = ExperimentConfig {
            example: Example::B,
            scheme: Scheme::Corrected,
            alpha: 1.7,
            gamma: 0.3,
            sigma: 0.5,
            t_final: 1.0,
            orders: vec![2, 3, 4, 5, 6],
            steps: vec![40, 80, 160],
            m_grid: 40,
            format: Format::Csv,
            exec,
        };
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| run_convergence_study(&config).unwrap())
        });
    }
    group.finish();
}

fn modal(c: &mut Criterion) {
    let mut group = c.benchmark_group("modal_reference");
    group.sample_size(10);
    let op = SpectralOperator::chebyshev(40, 1.3).unwrap();
    let problem = build_example(Example::C, &op, 0.7, 0.5, 1.0);
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| modal_final_value(&problem, &op, Scheme::Corrected, 2, 2048, 1.0, exec).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, study, modal);
criterion_main!(benches);
