use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use nlsg::control::{solve_control, ControlConfig, LagBuffer};
use nlsg::experiment::run_seed;
use nlsg::models::tanh_arx_model;
use nlsg::StepRule;
use nlsg_bench::paper_sim;

fn controller(c: &mut Criterion) {
    let model = tanh_arx_model(3, 2).unwrap();
    let theta = [0.2, 1.1, -0.4, 0.7, -0.25];
    let mut lags = LagBuffer::new(3, 2).unwrap();
    lags.push(0.3, 1.5);
    lags.push(-0.2, 0.4);
    let cfg = ControlConfig::default();
    c.bench_function("solve_control", |b| {
        b.iter(|| solve_control(&model, black_box(&theta), &lags, black_box(0.5), &cfg).unwrap())
    });
}

fn paper_run(c: &mut Criterion) {
    let cfg = paper_sim();
    let entry = cfg.catalog_entry().unwrap();
    let mut group = c.benchmark_group("paper_sim_5000_steps");
    group.sample_size(20);
    for rule in [StepRule::Modified, StepRule::Classical] {
        group.bench_function(rule.as_str(), |b| {
            b.iter(|| run_seed(&cfg, &entry, None, black_box(0), rule).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, controller, paper_run);
criterion_main!(benches);
