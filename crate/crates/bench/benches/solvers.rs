use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use otflow_bench::{desk, instance};
use otflow_core::{adjoint_gradient, flow_map, solve_optimal_plan, ControlSchedule, PmpTrainer};

fn simplex(c: &mut Criterion) {
    let mut g = c.benchmark_group("solve_optimal_plan");
    g.sample_size(10);
    for (spacing, samples) in [(0.15, 100), (0.08, 400), (0.0569, 800)] {
        let inst = instance(spacing, samples);
        let id = format!("{}x{}", inst.mu.len(), inst.nu.len());
        g.bench_with_input(BenchmarkId::from_parameter(id), &inst, |b, inst| {
            b.iter(|| solve_optimal_plan(black_box(&inst.mu), black_box(&inst.nu)).unwrap())
        });
    }
    g.finish();
}

fn control(steps: usize) -> ControlSchedule {
    let values = (0..steps * 14).map(|i| 0.05 * ((i as f64) * 0.37).sin()).collect();
    ControlSchedule::from_flat(steps, 14, values).unwrap()
}

fn flow(c: &mut Criterion) {
    let inst = desk();
    let u = control(32);
    c.bench_function("flow_map desk", |b| {
        b.iter(|| flow_map(&inst.field, black_box(&u), inst.mu.atoms()).unwrap())
    });
    c.bench_function("adjoint_gradient desk", |b| {
        b.iter(|| adjoint_gradient(&inst.field, black_box(&u), &inst.mu, &inst.nu, &inst.plan, 5e-4).unwrap())
    });
}

fn pmp(c: &mut Criterion) {
    let inst = desk();
    c.bench_function("pmp iteration desk", |b| {
        b.iter_batched(
            || {
                PmpTrainer::new(&inst.field, &inst.mu, &inst.nu, &inst.plan, inst.config.trainer.clone(), None)
                    .unwrap()
            },
            |mut t| t.step().unwrap(),
            criterion::BatchSize::SmallInput,
        )
    });
}

criterion_group!(benches, simplex, flow, pmp);
criterion_main!(benches);
