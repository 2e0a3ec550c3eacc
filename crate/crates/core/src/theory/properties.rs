//! Set-level properties of value equivalence, checked on an enumerable
//! grid of toy-class models, and the span property of trained models.

use std::collections::BTreeSet;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng as _;

use super::one_dof::ToyOneDof;
use super::CheckReport;
use crate::env::{collect_dataset, TransitionDataset, TOY_GAMMA};
use crate::function_set::{span_probe, FunctionSet};
use crate::mdp::{random_policy, ModelView, TabularPolicy};
use crate::model::{
    fit_reward, init_model, train, AdamConfig, FactorizedModel, Objective, TrainConfig,
};
use crate::rng::{self, derive_seed};

pub const GRID_STEPS: usize = 100;
pub const MEMBERSHIP_TOL: f64 = 1e-9;

/// Grid point `i` of `[0, 1]` with spacing `1 / GRID_STEPS`.
pub fn grid_theta(i: usize) -> f64 {
    i as f64 / GRID_STEPS as f64
}

/// `r(s1, a) + gamma p_a . v` for the class row with parameter `theta`.
/// Rows of `s2` and `s3` are shared by every class member, so Bellman
/// residuals between members live entirely in this quantity.
fn s1_backup(theta: f64, v: &[f64; 3], gamma: f64) -> f64 {
    let p = ToyOneDof::row(theta);
    p[0] + gamma * (p[0] * v[0] + p[1] * v[1] + p[2] * v[2])
}

/// `max_{pi, v} |T_pi v - T~_pi v|` between two toy-class members, evaluated
/// at `s1` only.
pub fn grid_residual(
    truth: &[f64; 2],
    model: &[f64; 2],
    policies: &[TabularPolicy],
    values: &[[f64; 3]],
) -> f64 {
    let mut worst: f64 = 0.0;
    for v in values {
        let diff: [f64; 2] = std::array::from_fn(|a| {
            s1_backup(truth[a], v, TOY_GAMMA) - s1_backup(model[a], v, TOY_GAMMA)
        });
        for pi in policies {
            worst = worst.max((pi.prob(0, 0) * diff[0] + pi.prob(0, 1) * diff[1]).abs());
        }
    }
    worst
}

/// Grid indices `(i, j)` (step `stride`) of the members value equivalent to
/// `truth` on `(policies, values)`.
pub fn ve_set(
    truth: &[f64; 2],
    policies: &[TabularPolicy],
    values: &[[f64; 3]],
    stride: usize,
) -> BTreeSet<(usize, usize)> {
    let mut out = BTreeSet::new();
    for i in (0..=GRID_STEPS).step_by(stride) {
        for j in (0..=GRID_STEPS).step_by(stride) {
            if grid_residual(truth, &[grid_theta(i), grid_theta(j)], policies, values)
                < MEMBERSHIP_TOL
            {
                out.insert((i, j));
            }
        }
    }
    out
}

fn random_subset<T: Clone>(items: &[T], min: usize, rng: &mut crate::rng::Rng) -> Vec<T> {
    let len = rng.random_range(min..=items.len());
    let mut idx: Vec<usize> = (0..items.len()).collect();
    idx.shuffle(rng);
    idx.truncate(len);
    idx.sort_unstable();
    idx.into_iter().map(|i| items[i].clone()).collect()
}

/// Properties of the value-equivalent set on a grid of the toy class:
/// shrinking the class shrinks the set, enlarging `(Pi, V)` shrinks the
/// set, the true model is always in it, and action policies with the full
/// basis leave only the true model.
pub fn check_monotonicity_properties(draws: usize, seed: u64) -> CheckReport {
    let mut report = CheckReport::new("monotonicity_properties");
    let mut rng = rng::stream(seed, 41);
    let (ti, tj) = (30, 60);
    let truth = [grid_theta(ti), grid_theta(tj)];
    let mut policy_pool = crate::mdp::action_policies(3, 2);
    policy_pool.extend((0..4).map(|_| random_policy(3, 2, &mut rng)));
    let mut value_pool = vec![[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    for _ in 0..3 {
        value_pool.push(std::array::from_fn(|_| rng.random_range(-2.0..2.0)));
    }
    let all = (GRID_STEPS + 1) * (GRID_STEPS + 1);

    let vacuous = ve_set(&truth, &policy_pool, &[], 1);
    report.require(
        vacuous.len() == all,
        "empty V did not admit every grid model",
    );

    let (mut p1, mut p3, mut p4) = (0usize, 0usize, 0usize);
    for _ in 0..draws {
        let pi = random_subset(&policy_pool, 1, &mut rng);
        let pi_sub = random_subset(&pi, 0, &mut rng);
        let v = random_subset(&value_pool, 1, &mut rng);
        let v_sub = random_subset(&v, 0, &mut rng);
        let fine = ve_set(&truth, &pi, &v, 1);
        let coarse = ve_set(&truth, &pi, &v, 2);
        let coarse_expected: BTreeSet<_> = fine
            .iter()
            .filter(|(i, j)| i % 2 == 0 && j % 2 == 0)
            .copied()
            .collect();
        if !coarse.is_subset(&fine) || coarse != coarse_expected {
            p1 += 1;
        }
        if !fine.is_subset(&ve_set(&truth, &pi_sub, &v_sub, 1)) {
            p3 += 1;
        }
        if !fine.contains(&(ti, tj)) || !coarse.contains(&(ti, tj)) {
            p4 += 1;
        }
    }
    let actions = crate::mdp::action_policies(3, 2);
    let pinned = ve_set(&truth, &actions, &value_pool[..3], 1);
    let off_grid = ve_set(&[1.0 / 3.0, 0.555], &actions, &value_pool[..3], 1);
    report.metric("draws", draws as f64);
    report.metric("class_inclusion_failures", p1 as f64);
    report.metric("nesting_failures", p3 as f64);
    report.metric("truth_missing", p4 as f64);
    report.metric("full_basis_set_size", pinned.len() as f64);
    report.metric("off_grid_set_size", off_grid.len() as f64);
    report.require(p1 == 0, "coarser class was not a subset");
    report.require(p3 == 0, "adding constraints enlarged the set");
    report.require(p4 == 0, "true model missing from a set");
    report.require(
        pinned.len() == 1 && pinned.contains(&(ti, tj)),
        "full basis did not pin the true model",
    );
    report.require(
        off_grid.is_empty(),
        "off-grid truth admitted a grid model under the full basis",
    );
    report
}

/// `max |gamma (P_bar - P~) v|` over visited `(s, a)` cells. With the reward
/// fitted to the empirical means this is the value-equivalence residual.
pub fn transition_residual(
    model: &FactorizedModel,
    dataset: &TransitionDataset,
    v: &nalgebra::DVector<f64>,
) -> f64 {
    let gamma = model.gamma();
    let mut worst: f64 = 0.0;
    for a in 0..model.n_actions() {
        let pv = &model.transitions()[a] * v;
        for s in dataset.visited_states(a) {
            let emp: f64 = dataset
                .empirical_row(s, a)
                .expect("visited")
                .iter()
                .map(|&(t, p)| p * v[t])
                .sum();
            worst = worst.max((gamma * (emp - pv[s])).abs());
        }
    }
    worst
}

/// A model trained towards value equivalence on a basis has residual on
/// any span element bounded by the coefficient-weighted basis residuals.
pub fn check_span_property(seed: u64) -> CheckReport {
    let mut report = CheckReport::new("span_property");
    let (n, m, d) = (6, 2, 3);
    let mdp = crate::mdp::random_mdp(n, m, 0.9, derive_seed(seed, 51));
    let ds = collect_dataset(&mdp, 5_000, derive_seed(seed, 52)).expect("positive sample count");
    let mut r = rng::stream(seed, 53);
    let vset = FunctionSet::new(DMatrix::from_fn(n, d, |_, _| r.random_range(-1.0..1.0)))
        .expect("non-empty");
    let mut model = init_model(n, m, n, 0.9, derive_seed(seed, 54)).expect("valid dims");
    model.set_reward(fit_reward(&ds)).expect("shape");
    let cfg = TrainConfig {
        adam: AdamConfig {
            lr: 0.02,
            ..AdamConfig::default()
        },
        max_steps: 10_000,
        ..TrainConfig::default()
    };
    let objective = Objective::Ve {
        vset: &vset,
        weight_by_counts: false,
    };
    if let Err(e) = train(&mut model, &ds, objective, &cfg) {
        report.require(false, &e.to_string());
        return report;
    }
    let eps: Vec<f64> = (0..d)
        .map(|j| transition_residual(&model, &ds, &vset.basis().column(j).clone_owned()))
        .collect();
    let eps_max = eps.iter().cloned().fold(0.0, f64::max);
    let mut worst_ratio: f64 = 0.0;
    for el in span_probe(&vset, 20, derive_seed(seed, 55)) {
        let b: f64 = el.coeffs.iter().map(|c| c.abs()).sum();
        let res = transition_residual(&model, &ds, &el.value.0);
        let bound = b * eps_max;
        worst_ratio = worst_ratio.max(if bound > 0.0 { res / bound } else { 0.0 });
    }
    report.metric("basis_residual", eps_max);
    report.metric("worst_residual_over_bound", worst_ratio);
    report.require(
        eps_max < 1e-3,
        "training did not reach a small basis residual",
    );
    report.require(
        worst_ratio <= 10.0,
        "span residual exceeded ten times the bound",
    );
    report
}
