use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use veq_bench::catch_fixture;
use veq_core::function_set::kmeans_aggregation;
use veq_core::mdp::{value_iteration, ModelView, ViConfig};
use veq_core::model::{
    fit_reward, init_model, mle_loss_and_grad, train, AdamConfig, Objective, TrainConfig, VeTargets,
};
use veq_core::planning::{plan_value_iteration, policy_iteration_lstd, LstdConfig};

fn losses(c: &mut Criterion) {
    let fx = catch_fixture(100_000, 10, 1).unwrap();
    let n = fx.env.n_states();
    let m = fx.env.mdp.n_actions();
    let targets = VeTargets::new(&fx.dataset, &fx.vset, false).unwrap();
    let mut group = c.benchmark_group("loss_and_grad");
    for rank in [10, 50, 250] {
        let model = init_model(n, m, rank, 0.99, 2).unwrap();
        group.bench_with_input(BenchmarkId::new("mle", rank), &model, |b, model| {
            b.iter(|| mle_loss_and_grad(black_box(model), &fx.dataset).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("ve", rank), &model, |b, model| {
            b.iter(|| targets.loss_and_grad(black_box(model)).unwrap())
        });
    }
    group.finish();
}

fn training(c: &mut Criterion) {
    let fx = catch_fixture(100_000, 10, 1).unwrap();
    let (n, m) = (fx.env.n_states(), fx.env.mdp.n_actions());
    let cfg = TrainConfig {
        adam: AdamConfig {
            lr: 0.02,
            ..AdamConfig::default()
        },
        max_steps: 20,
        grad_tol: 0.0,
        ..TrainConfig::default()
    };
    let mut group = c.benchmark_group("train_20_steps");
    group.sample_size(10);
    for (name, objective) in [
        ("mle", Objective::Mle),
        (
            "ve",
            Objective::Ve {
                vset: &fx.vset,
                weight_by_counts: false,
            },
        ),
    ] {
        group.bench_function(name, |b| {
            b.iter(|| {
                let mut model = init_model(n, m, 25, 0.99, 3).unwrap();
                model.set_reward(fit_reward(&fx.dataset)).unwrap();
                train(&mut model, &fx.dataset, objective, &cfg).unwrap()
            })
        });
    }
    group.finish();
}

fn planning(c: &mut Criterion) {
    let fx = catch_fixture(100_000, 10, 1).unwrap();
    let (n, m) = (fx.env.n_states(), fx.env.mdp.n_actions());
    let mut model = init_model(n, m, 25, 0.99, 4).unwrap();
    model.set_reward(fit_reward(&fx.dataset)).unwrap();
    let basis = kmeans_aggregation(&fx.env.coords, 50, 5).unwrap();
    let mut group = c.benchmark_group("planning");
    group.sample_size(10);
    group.bench_function("value_iteration_true_mdp", |b| {
        b.iter(|| value_iteration(black_box(&fx.env.mdp), ViConfig::default()).unwrap())
    });
    group.bench_function("value_iteration_model", |b| {
        b.iter(|| plan_value_iteration(black_box(&model)).unwrap())
    });
    let lstd = LstdConfig {
        n_iterations: 5,
        ..LstdConfig::default()
    };
    group.bench_function("lstd_pi_5_rounds", |b| {
        b.iter(|| policy_iteration_lstd(black_box(&model), &basis, &lstd, &fx.env.mdp).unwrap())
    });
    group.finish();
}

criterion_group!(benches, losses, training, planning);
criterion_main!(benches);
