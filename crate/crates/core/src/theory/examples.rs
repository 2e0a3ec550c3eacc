//! The worked examples on the toy MDP and the chain counterexample for
//! maximum likelihood.

use nalgebra::DMatrix;
use rand::Rng as _;

use super::one_dof::{
    fit_chain_mle_gradient, fit_chain_ve_gradient, fit_toy_mle_gradient, fit_toy_ve_gradient,
    ChainOneDof, ToyOneDof,
};
use super::CheckReport;
use crate::env::{build_toy_mdp, build_toy_variant, collect_dataset, TOY_GAMMA};
use crate::linalg;
use crate::mdp::{
    action_policies, bellman_apply, bellman_optimality, evaluate_exact, random_policy,
    value_iteration, ModelView, TabularMdp, ValueFunction, ViConfig,
};
use crate::rng::{self, derive_seed, Rng};

fn random_row(rng: &mut Rng, max_first: f64) -> [f64; 3] {
    loop {
        let w: [f64; 3] = std::array::from_fn(|_| -(1.0 - rng.random::<f64>()).ln());
        let s: f64 = w.iter().sum();
        let row = [w[0] / s, w[1] / s, w[2] / s];
        if row[0] <= max_first {
            return row;
        }
    }
}

/// Largest `|T_a v - T~_a v|` over the action policies.
pub fn ve_residual<A: ModelView + ?Sized, B: ModelView + ?Sized>(
    truth: &A,
    model: &B,
    v: &ValueFunction,
) -> f64 {
    action_policies(truth.n_states(), truth.n_actions())
        .iter()
        .map(|pi| {
            let t = bellman_apply(truth, pi, v).expect("shapes agree");
            let m = bellman_apply(model, pi, v).expect("shapes agree");
            t.max_diff(&m)
        })
        .fold(0.0, f64::max)
}

/// Random Bellman updates on `[x, y, y]` vectors stay in that subspace and
/// follow the closed-form update.
pub fn check_toy_closure(n_updates: usize, seed: u64) -> CheckReport {
    let mut report = CheckReport::new("toy_closure");
    let mdp = build_toy_mdp();
    let g = mdp.gamma();
    let p11 = [mdp.transitions()[0][(0, 0)], mdp.transitions()[1][(0, 0)]];
    let mut rng = rng::stream(seed, 31);
    let mut starts = vec![vec![0.0, 0.0, 0.0], vec![1.0, 0.0, 0.0]];
    let y: f64 = rng.random_range(-5.0..5.0);
    starts.push(vec![rng.random_range(-5.0..5.0), y, y]);
    let (mut max_tie, mut max_form): (f64, f64) = (0.0, 0.0);
    for start in starts {
        let mut v = ValueFunction::from_vec(start);
        for _ in 0..n_updates {
            let pi = random_policy(3, 2, &mut rng);
            let out = bellman_apply(&mdp, &pi, &v).expect("toy shapes");
            let (a, b) = (v[0], v[1]);
            let stay: f64 = (0..2).map(|k| pi.prob(0, k) * p11[k]).sum();
            let closed = [
                stay + g * (a * stay + b * (1.0 - stay)),
                1.0 + g * a,
                1.0 + g * a,
            ];
            max_tie = max_tie.max((out[1] - out[2]).abs());
            max_form = max_form.max(
                (0..3)
                    .map(|i| (out[i] - closed[i]).abs())
                    .fold(0.0, f64::max),
            );
            v = out;
        }
    }
    report.metric("max_tie_gap", max_tie);
    report.metric("max_closed_form_err", max_form);
    report.require(max_tie < 1e-12, "update left the [x, y, y] subspace");
    report.require(max_form < 1e-12, "update differs from the closed form");
    report
}

/// Instances where every action returns to `s1` with probability at most
/// one half: the first is the documented `(0.4, 0.6, 0.0)` case, the rest
/// are random.
fn exact_instances(seed: u64, n: usize) -> Vec<Vec<[f64; 3]>> {
    let mut rng = rng::stream(seed, 32);
    let mut out = vec![vec![[0.4, 0.6, 0.0], random_row(&mut rng, 0.5)]];
    while out.len() < n {
        out.push(vec![random_row(&mut rng, 0.5), random_row(&mut rng, 0.5)]);
    }
    out
}

/// The value-equivalence fit on `V = {[1, 0, 0]}` is exact whenever every
/// `p_11 <= 1/2`, so it reproduces all policy values; the likelihood fit
/// does not.
pub fn check_exact_ve_example(seed: u64) -> CheckReport {
    let mut report = CheckReport::new("exact_ve_example");
    let g = TOY_GAMMA;
    let e1 = ValueFunction::from_vec(vec![1.0, 0.0, 0.0]);
    let mut rng = rng::stream(seed, 33);
    let (mut max_res, mut max_ve_err, mut max_mle_err, mut max_star_err, mut max_fit_gap): (
        f64,
        f64,
        f64,
        f64,
        f64,
    ) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for rows in exact_instances(seed, 6) {
        let truth = build_toy_variant(&rows, g).expect("valid rows");
        let ve_fit = ToyOneDof::fit_ve(&rows);
        let ve = ve_fit.to_mdp(g).expect("in class");
        let mle = ToyOneDof::fit_mle(&rows).to_mdp(g).expect("in class");
        max_res = max_res.max(ve_residual(&truth, &ve, &e1));
        for _ in 0..20 {
            let pi = random_policy(3, 2, &mut rng);
            let v = evaluate_exact(&truth, &pi).expect("solvable");
            max_ve_err = max_ve_err.max(evaluate_exact(&ve, &pi).expect("solvable").max_diff(&v));
            max_mle_err =
                max_mle_err.max(evaluate_exact(&mle, &pi).expect("solvable").max_diff(&v));
        }
        let (v_star, _) = value_iteration(&truth, ViConfig::default()).expect("converges");
        let (v_ve, _) = value_iteration(&ve, ViConfig::default()).expect("converges");
        max_star_err = max_star_err.max(v_star.max_diff(&v_ve));
        let grad = fit_toy_ve_gradient(&rows, &[[1.0, 0.0, 0.0]], g);
        max_fit_gap = max_fit_gap.max(linalg::max_abs(
            grad.theta
                .iter()
                .zip(&ve_fit.theta)
                .map(|(a, b)| a - b)
                .collect::<Vec<_>>()
                .iter(),
        ));
    }
    report.metric("ve_residual", max_res);
    report.metric("ve_value_err", max_ve_err);
    report.metric("ve_optimal_value_err", max_star_err);
    report.metric("mle_value_err", max_mle_err);
    report.metric("gradient_vs_closed_form", max_fit_gap);
    report.require(max_res < 1e-10, "value-equivalence residual not at zero");
    report.require(
        max_ve_err < 1e-8,
        "VE model values differ from the true values",
    );
    report.require(
        max_star_err < 1e-7,
        "VE optimal values differ from the true optimum",
    );
    report.require(
        max_mle_err > 1e-3,
        "MLE model happened to be value equivalent everywhere",
    );
    report.require(
        max_fit_gap < 0.02,
        "gradient fit disagrees with the closed form",
    );
    report
}

/// Greedy action at `s1` of a toy-class model.
fn greedy_at_s1(model: &TabularMdp) -> usize {
    value_iteration(model, ViConfig::default())
        .expect("converges")
        .1
        .greedy_actions()[0]
}

/// Outcome of the approximate example: closed forms on the exact rows and
/// gradient fits on sampled data.
#[derive(Debug, Clone)]
pub struct ApproxExample {
    pub mle_closed: Vec<[f64; 3]>,
    pub ve_closed: Vec<[f64; 3]>,
    /// Per seed: `(mle rows, ve rows, mle greedy at s1, ve greedy at s1)`.
    pub sampled: Vec<(Vec<[f64; 3]>, Vec<[f64; 3]>, usize, usize)>,
}

pub fn approx_ve_example(n_samples: usize, seeds: &[u64]) -> ApproxExample {
    let mdp = build_toy_mdp();
    let rows_of = |m: &TabularMdp| -> Vec<[f64; 3]> {
        (0..2)
            .map(|a| std::array::from_fn(|t| m.transitions()[a][(0, t)]))
            .collect()
    };
    let exact = rows_of(&mdp);
    let sampled = seeds
        .iter()
        .map(|&seed| {
            let ds = collect_dataset(&mdp, n_samples, derive_seed(seed, 34))
                .expect("positive sample count");
            let q: Vec<[f64; 3]> = (0..2)
                .map(|a| {
                    let mut row = [0.0; 3];
                    for (t, p) in ds.empirical_row(0, a).unwrap_or_default() {
                        row[t] = p;
                    }
                    row
                })
                .collect();
            let mle = fit_toy_mle_gradient(&q);
            let ve = fit_toy_ve_gradient(&q, &[[1.0, 0.0, 0.0]], mdp.gamma());
            let mle_pick = greedy_at_s1(&mle.to_mdp(mdp.gamma()).expect("in class"));
            let ve_pick = greedy_at_s1(&ve.to_mdp(mdp.gamma()).expect("in class"));
            (mle.rows(), ve.rows(), mle_pick, ve_pick)
        })
        .collect();
    ApproxExample {
        mle_closed: ToyOneDof::fit_mle(&exact).rows(),
        ve_closed: ToyOneDof::fit_ve(&exact).rows(),
        sampled,
    }
}

pub const TABLE_MLE: [[f64; 3]; 2] = [[0.3, 0.4, 0.3], [0.4, 0.2, 0.4]];
pub const TABLE_VE: [[f64; 3]; 2] = [[0.5, 0.0, 0.5], [0.4, 0.2, 0.4]];

/// No class member is exactly value equivalent on the toy MDP; the
/// clamped fit still picks the optimal action while likelihood does not.
pub fn check_approx_ve_example(n_samples: usize, seeds: &[u64]) -> CheckReport {
    let mut report = CheckReport::new("approx_ve_example");
    let ex = approx_ve_example(n_samples, seeds);
    let closed_err = (0..2)
        .flat_map(|a| (0..3).map(move |t| (a, t)))
        .map(|(a, t)| {
            (ex.mle_closed[a][t] - TABLE_MLE[a][t])
                .abs()
                .max((ex.ve_closed[a][t] - TABLE_VE[a][t]).abs())
        })
        .fold(0.0, f64::max);
    let mut sampled_err: f64 = 0.0;
    let mut wrong_picks = 0;
    for (mle, ve, mp, vp) in &ex.sampled {
        for a in 0..2 {
            for t in 0..3 {
                sampled_err = sampled_err.max((mle[a][t] - TABLE_MLE[a][t]).abs());
                sampled_err = sampled_err.max((ve[a][t] - TABLE_VE[a][t]).abs());
            }
        }
        if *mp != 1 || *vp != 0 {
            wrong_picks += 1;
        }
    }
    let truth_pick = greedy_at_s1(&build_toy_mdp());
    report.metric("closed_form_err", closed_err);
    report.metric("gradient_max_err", sampled_err);
    report.metric("seeds", ex.sampled.len() as f64);
    report.metric("wrong_greedy_seeds", wrong_picks as f64);
    report.require(closed_err < 1e-10, "closed-form fits differ from the table");
    report.require(
        sampled_err <= 0.02,
        "gradient fits off the table by more than 0.02",
    );
    report.require(
        wrong_picks == 0,
        "greedy action at s1 was not b (MLE) / a (VE)",
    );
    report.require(truth_pick == 0, "true MDP does not prefer action a");
    report
}

/// Value iteration from `v` in the `[x, y, y]` subspace produces the same
/// iterates on the exact value-equivalent model as on the true MDP.
pub fn check_planning_equivalence(steps: usize, seed: u64) -> CheckReport {
    let mut report = CheckReport::new("planning_equivalence");
    let rows = [[0.4, 0.6, 0.0], [0.3, 0.2, 0.5]];
    let truth = build_toy_variant(&rows, TOY_GAMMA).expect("valid rows");
    let model = ToyOneDof::fit_ve(&rows)
        .to_mdp(TOY_GAMMA)
        .expect("in class");
    let mut rng = rng::stream(seed, 35);
    let y = rng.random_range(-3.0..3.0);
    let mut v_true = ValueFunction::from_vec(vec![rng.random_range(-3.0..3.0), y, y]);
    let mut v_model = v_true.clone();
    let mut worst: f64 = 0.0;
    let mut action_mismatch = 0;
    for _ in 0..steps {
        let (nt, at) = bellman_optimality(&truth, &v_true);
        let (nm, am) = bellman_optimality(&model, &v_model);
        worst = worst.max(nt.max_diff(&nm));
        action_mismatch += usize::from(at != am);
        v_true = nt;
        v_model = nm;
    }
    report.metric("steps", steps as f64);
    report.metric("max_iterate_diff", worst);
    report.metric("greedy_mismatches", action_mismatch as f64);
    report.require(worst < 1e-9, "iterates diverged");
    report.require(action_mismatch == 0, "greedy actions differed");
    report
}

/// Random `n`-state chain with dense rows.
fn random_chain(n: usize, rng: &mut Rng) -> DMatrix<f64> {
    let mut p = DMatrix::from_fn(n, n, |_, _| -(1.0 - rng.random::<f64>()).ln());
    for mut row in p.row_iter_mut() {
        let s = row.sum();
        row /= s;
    }
    p
}

/// On random chains the one-parameter-per-row class contains an exact
/// value-equivalent model for `V = {e_i}` while the likelihood fit misses
/// it. Draws whose VE parameters leave `[0, 1]` are rejected and counted.
pub fn check_mle_counterexample(n_states: usize, instances: usize, seed: u64) -> CheckReport {
    let mut report = CheckReport::new("mle_counterexample");
    let mut rng = rng::stream(seed, 36);
    let (mut accepted, mut rejected) = (0usize, 0usize);
    let (mut max_ve, mut min_mle, mut max_gap): (f64, f64, f64) = (0.0, f64::INFINITY, 0.0);
    let target = 0;
    while accepted < instances && rejected < 1_000 * instances.max(1) {
        let p = random_chain(n_states, &mut rng);
        let ve = ChainOneDof::fit_ve(&p, target);
        if !ve.is_feasible() {
            rejected += 1;
            continue;
        }
        accepted += 1;
        let mle = ChainOneDof::fit_mle(&p);
        let col = |m: &DMatrix<f64>| m.column(target).clone_owned();
        let truth = col(&p);
        max_ve = max_ve.max((col(&ve.transition()) - &truth).amax());
        min_mle = min_mle.min((col(&mle.transition()) - &truth).amax());
        let g_mle = fit_chain_mle_gradient(&p);
        let g_ve = fit_chain_ve_gradient(&p, target);
        for j in 0..n_states {
            max_gap = max_gap.max((g_mle.theta[j] - mle.theta[j]).abs());
            max_gap = max_gap.max((g_ve.theta[j] - ve.theta[j]).abs());
        }
    }
    report.metric("accepted", accepted as f64);
    report.metric(
        "rejection_rate",
        rejected as f64 / (accepted + rejected).max(1) as f64,
    );
    report.metric("max_ve_residual", max_ve);
    report.metric("min_mle_residual", min_mle);
    report.metric("gradient_vs_closed_form", max_gap);
    report.require(accepted == instances, "too many infeasible draws");
    report.require(max_ve < 1e-12, "VE construction is not exact");
    report.require(min_mle > 1e-3, "MLE fit was value equivalent on some draw");
    report.require(
        max_gap < 0.02,
        "gradient fit disagrees with the closed form",
    );
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closure_examples() {
        let r = check_toy_closure(50, 1);
        assert!(r.passed, "{r}");
    }

    #[test]
    fn documented_exact_instance() {
        let rows = [[0.4, 0.6, 0.0], [0.4, 0.6, 0.0]];
        let ve = ToyOneDof::fit_ve(&rows);
        assert!((ve.theta[0] - 0.2).abs() < 1e-12);
        assert!((ToyOneDof::row(ve.theta[0])[0] - 0.4).abs() < 1e-12);
        let mle = ToyOneDof::fit_mle(&rows);
        assert!((ToyOneDof::row(mle.theta[0])[0] - 0.2).abs() < 1e-12);
    }

    #[test]
    fn fits_are_exact_exactly_when_expected() {
        let e1 = ValueFunction::from_vec(vec![1.0, 0.0, 0.0]);
        let residuals = |rows: [[f64; 3]; 2]| {
            let truth = build_toy_variant(&rows, TOY_GAMMA).unwrap();
            let ve = ToyOneDof::fit_ve(&rows).to_mdp(TOY_GAMMA).unwrap();
            let mle = ToyOneDof::fit_mle(&rows).to_mdp(TOY_GAMMA).unwrap();
            (
                ve_residual(&truth, &ve, &e1),
                ve_residual(&truth, &mle, &e1),
            )
        };
        // Rows inside the class: both fits recover them.
        let (ve, mle) = residuals([[0.25, 0.5, 0.25], [0.4, 0.2, 0.4]]);
        assert!(ve < 1e-12 && mle < 1e-12);
        // p_11 = 0.5 but p_11 != (1 - p_12) / 2: only the VE fit is exact.
        let (ve, mle) = residuals([[0.5, 0.25, 0.25], [0.5, 0.25, 0.25]]);
        assert!(ve < 1e-12);
        assert!(mle > 0.1);
    }

    #[test]
    fn worked_examples_pass() {
        for r in [
            check_exact_ve_example(3),
            check_planning_equivalence(200, 3),
            check_mle_counterexample(4, 10, 3),
            check_approx_ve_example(20_000, &[1, 2]),
        ] {
            assert!(r.passed, "{r}");
        }
    }
}
