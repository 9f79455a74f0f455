use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use voltplan_bench::arbitrage_env;
use voltplan_core::optimizers::mpc_decide;
use voltplan_core::{act, solve_exact, solve_sa, train_q, MpcParams, QParams, SAParams};

fn exact_by_horizon(c: &mut Criterion) {
    let mut g = c.benchmark_group("exact");
    for granularity in [60, 30, 15] {
        let env = arbitrage_env(1, granularity, 0).unwrap();
        let n = env.episode_end();
        let model = env.horizon_model(n).unwrap();
        g.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, &n| b.iter(|| solve_exact(black_box(&model), n)));
    }
    g.finish();
}

fn sa_day(c: &mut Criterion) {
    let env = arbitrage_env(1, 60, 0).unwrap();
    let n = env.episode_end();
    let model = env.horizon_model(n).unwrap();
    let params = SAParams::default();
    let mut g = c.benchmark_group("sa");
    g.sample_size(20);
    g.bench_function("24", |b| b.iter(|| solve_sa(black_box(&model), n, &params)));
    g.finish();
}

fn mpc_step(c: &mut Criterion) {
    let env = arbitrage_env(1, 60, 0).unwrap();
    let params = MpcParams::default();
    c.bench_function("mpc/step", |b| b.iter(|| mpc_decide(black_box(&env), &params)));
}

fn q_act(c: &mut Criterion) {
    let env = arbitrage_env(1, 60, 0).unwrap();
    let policy = train_q(&mut env.clone(), &QParams::default()).unwrap();
    c.bench_function("q/act", |b| b.iter(|| act(black_box(&policy), &env)));
}

criterion_group!(benches, exact_by_horizon, sa_day, mpc_step, q_act);
criterion_main!(benches);
