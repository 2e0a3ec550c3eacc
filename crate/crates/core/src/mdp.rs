//! Exact tabular MDP machinery: Bellman operators, exact policy evaluation,
//! value iteration and policy sampling.

use std::ops::{Deref, DerefMut};

use nalgebra::{DMatrix, DVector};
use rand::Rng as _;

use crate::error::{Result, VeqError};
use crate::linalg;
use crate::rng::{self, Rng};

/// Tolerance on row sums of stochastic tables.
pub const STOCHASTIC_TOL: f64 = 1e-12;

/// One possible result of taking an action: probability, sampled reward and
/// next state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Outcome {
    pub prob: f64,
    pub reward: f64,
    pub next: usize,
}

/// Read-only access to the reward table and transition tensor of an MDP or
/// of a learned model.
pub trait ModelView {
    fn n_states(&self) -> usize;
    fn n_actions(&self) -> usize;
    fn gamma(&self) -> f64;
    /// Expected rewards, `n_states x n_actions`.
    fn rewards(&self) -> &DMatrix<f64>;
    /// Transition matrices, one `n_states x n_states` matrix per action.
    fn transitions(&self) -> &[DMatrix<f64>];
}

/// Ground-truth tabular MDP.
///
/// Besides the expected reward table and transition tensor it keeps the
/// per-(s, a) outcome lists used for sampling, since rewards of the grid
/// worlds depend on the realised transition, and a start distribution.
#[derive(Debug, Clone)]
pub struct TabularMdp {
    reward: DMatrix<f64>,
    transition: Vec<DMatrix<f64>>,
    gamma: f64,
    start: Vec<f64>,
    outcomes: Vec<Vec<Outcome>>,
}

impl TabularMdp {
    /// Builds an MDP whose reward is a deterministic function of `(s, a)`.
    /// The start distribution is uniform.
    pub fn new(reward: DMatrix<f64>, transition: Vec<DMatrix<f64>>, gamma: f64) -> Result<Self> {
        let (n_states, n_actions) = reward.shape();
        if transition.len() != n_actions {
            return Err(VeqError::dim(format!(
                "{} transition matrices for {} actions",
                transition.len(),
                n_actions
            )));
        }
        let mut outcomes = Vec::with_capacity(n_states * n_actions);
        for s in 0..n_states {
            for (a, p) in transition.iter().enumerate() {
                if p.shape() != (n_states, n_states) {
                    return Err(VeqError::dim(format!(
                        "transition for action {a} is {:?}, expected {n_states}x{n_states}",
                        p.shape()
                    )));
                }
                outcomes.push(
                    (0..n_states)
                        .filter(|&t| p[(s, t)] > 0.0)
                        .map(|t| Outcome {
                            prob: p[(s, t)],
                            reward: reward[(s, a)],
                            next: t,
                        })
                        .collect(),
                );
            }
        }
        let mdp = TabularMdp {
            reward,
            transition,
            gamma,
            start: vec![1.0 / n_states.max(1) as f64; n_states],
            outcomes,
        };
        mdp.validate()?;
        Ok(mdp)
    }

    /// Builds an MDP from explicit outcome lists, indexed `s * n_actions + a`.
    pub fn from_outcomes(
        n_states: usize,
        n_actions: usize,
        outcomes: Vec<Vec<Outcome>>,
        gamma: f64,
        start: Vec<f64>,
    ) -> Result<Self> {
        if outcomes.len() != n_states * n_actions {
            return Err(VeqError::dim(format!(
                "{} outcome lists for {n_states} states and {n_actions} actions",
                outcomes.len()
            )));
        }
        let mut reward = DMatrix::zeros(n_states, n_actions);
        let mut transition = vec![DMatrix::zeros(n_states, n_states); n_actions];
        for s in 0..n_states {
            for a in 0..n_actions {
                for o in &outcomes[s * n_actions + a] {
                    if o.next >= n_states {
                        return Err(VeqError::invalid(format!(
                            "outcome of ({s}, {a}) leads to state {} of {n_states}",
                            o.next
                        )));
                    }
                    reward[(s, a)] += o.prob * o.reward;
                    transition[a][(s, o.next)] += o.prob;
                }
            }
        }
        let mdp = TabularMdp {
            reward,
            transition,
            gamma,
            start,
            outcomes,
        };
        mdp.validate()?;
        Ok(mdp)
    }

    pub fn with_start(mut self, start: Vec<f64>) -> Result<Self> {
        self.start = start;
        self.validate()?;
        Ok(self)
    }

    fn validate(&self) -> Result<()> {
        let (n, m) = self.reward.shape();
        if n == 0 || m == 0 {
            return Err(VeqError::invalid(
                "MDP needs at least one state and one action",
            ));
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(VeqError::invalid(format!(
                "gamma {} outside [0, 1)",
                self.gamma
            )));
        }
        if self.reward.iter().any(|r| !r.is_finite()) {
            return Err(VeqError::invalid("reward table has non-finite entries"));
        }
        for (a, p) in self.transition.iter().enumerate() {
            check_stochastic(p).map_err(|e| VeqError::invalid(format!("action {a}: {e}")))?;
        }
        if self.start.len() != n {
            return Err(VeqError::dim("start distribution length"));
        }
        let total: f64 = self.start.iter().sum();
        if self.start.iter().any(|&p| p < 0.0) || (total - 1.0).abs() > STOCHASTIC_TOL {
            return Err(VeqError::invalid(
                "start distribution is not a distribution",
            ));
        }
        Ok(())
    }

    pub fn start(&self) -> &[f64] {
        &self.start
    }

    pub fn outcomes(&self, s: usize, a: usize) -> &[Outcome] {
        &self.outcomes[s * self.n_actions() + a]
    }

    pub fn sample_start(&self, rng: &mut Rng) -> usize {
        sample_index(&self.start, rng)
    }

    /// Samples `(reward, next_state)` for taking `a` in `s`.
    pub fn step(&self, s: usize, a: usize, rng: &mut Rng) -> (f64, usize) {
        let outs = self.outcomes(s, a);
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for o in outs {
            acc += o.prob;
            if u < acc {
                return (o.reward, o.next);
            }
        }
        // Round-off: fall back to the last outcome with positive mass.
        let o = outs.iter().rev().find(|o| o.prob > 0.0).unwrap_or(&outs[0]);
        (o.reward, o.next)
    }

    /// Replaces the discount factor.
    pub fn with_gamma(mut self, gamma: f64) -> Result<Self> {
        self.gamma = gamma;
        self.validate()?;
        Ok(self)
    }
}

impl ModelView for TabularMdp {
    fn n_states(&self) -> usize {
        self.reward.nrows()
    }
    fn n_actions(&self) -> usize {
        self.reward.ncols()
    }
    fn gamma(&self) -> f64 {
        self.gamma
    }
    fn rewards(&self) -> &DMatrix<f64> {
        &self.reward
    }
    fn transitions(&self) -> &[DMatrix<f64>] {
        &self.transition
    }
}

/// A plain reward table + transition tensor, used for hand-built models.
#[derive(Debug, Clone)]
pub struct TabularModel {
    pub reward: DMatrix<f64>,
    pub transition: Vec<DMatrix<f64>>,
    pub gamma: f64,
}

impl ModelView for TabularModel {
    fn n_states(&self) -> usize {
        self.reward.nrows()
    }
    fn n_actions(&self) -> usize {
        self.reward.ncols()
    }
    fn gamma(&self) -> f64 {
        self.gamma
    }
    fn rewards(&self) -> &DMatrix<f64> {
        &self.reward
    }
    fn transitions(&self) -> &[DMatrix<f64>] {
        &self.transition
    }
}

pub(crate) fn check_stochastic(p: &DMatrix<f64>) -> Result<()> {
    for (i, row) in p.row_iter().enumerate() {
        if row.iter().any(|&x| x < 0.0 || !x.is_finite()) {
            return Err(VeqError::invalid(format!(
                "row {i} has a negative or non-finite entry"
            )));
        }
        let sum: f64 = row.iter().sum();
        if (sum - 1.0).abs() > STOCHASTIC_TOL {
            return Err(VeqError::invalid(format!("row {i} sums to {sum}")));
        }
    }
    Ok(())
}

pub fn sample_index(probs: &[f64], rng: &mut Rng) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

/// Stochastic policy table `pi(a|s)`, `n_states x n_actions`.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularPolicy {
    probs: DMatrix<f64>,
}

impl TabularPolicy {
    pub fn new(probs: DMatrix<f64>) -> Result<Self> {
        if probs.nrows() == 0 || probs.ncols() == 0 {
            return Err(VeqError::invalid("empty policy table"));
        }
        check_stochastic(&probs)?;
        Ok(TabularPolicy { probs })
    }

    pub fn deterministic(actions: &[usize], n_actions: usize) -> Self {
        let mut probs = DMatrix::zeros(actions.len(), n_actions);
        for (s, &a) in actions.iter().enumerate() {
            probs[(s, a)] = 1.0;
        }
        TabularPolicy { probs }
    }

    pub fn uniform(n_states: usize, n_actions: usize) -> Self {
        TabularPolicy {
            probs: DMatrix::from_element(n_states, n_actions, 1.0 / n_actions as f64),
        }
    }

    pub fn n_states(&self) -> usize {
        self.probs.nrows()
    }

    pub fn n_actions(&self) -> usize {
        self.probs.ncols()
    }

    pub fn probs(&self) -> &DMatrix<f64> {
        &self.probs
    }

    pub fn prob(&self, s: usize, a: usize) -> f64 {
        self.probs[(s, a)]
    }

    /// Most probable action per state, ties to the lowest index.
    pub fn greedy_actions(&self) -> Vec<usize> {
        self.probs
            .row_iter()
            .map(|row| argmax(row.iter().copied()))
            .collect()
    }

    pub fn sample_action(&self, s: usize, rng: &mut Rng) -> usize {
        let row: Vec<f64> = self.probs.row(s).iter().copied().collect();
        sample_index(&row, rng)
    }
}

/// Index of the first maximal element.
pub fn argmax(values: impl IntoIterator<Item = f64>) -> usize {
    let mut best = f64::NEG_INFINITY;
    let mut idx = 0;
    for (i, v) in values.into_iter().enumerate() {
        if v > best {
            best = v;
            idx = i;
        }
    }
    idx
}

/// A value function over states.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueFunction(pub DVector<f64>);

impl ValueFunction {
    pub fn zeros(n: usize) -> Self {
        ValueFunction(DVector::zeros(n))
    }

    pub fn from_vec(v: Vec<f64>) -> Self {
        ValueFunction(DVector::from_vec(v))
    }

    pub fn mean(&self) -> f64 {
        self.0.mean()
    }

    /// `max_s |self(s) - other(s)|`.
    pub fn max_diff(&self, other: &ValueFunction) -> f64 {
        linalg::max_abs((&self.0 - &other.0).iter())
    }
}

impl Deref for ValueFunction {
    type Target = DVector<f64>;
    fn deref(&self) -> &DVector<f64> {
        &self.0
    }
}

impl DerefMut for ValueFunction {
    fn deref_mut(&mut self) -> &mut DVector<f64> {
        &mut self.0
    }
}

fn check_policy<M: ModelView + ?Sized>(view: &M, policy: &TabularPolicy) -> Result<()> {
    if policy.n_states() != view.n_states() || policy.n_actions() != view.n_actions() {
        return Err(VeqError::dim(format!(
            "policy is {}x{}, model has {} states and {} actions",
            policy.n_states(),
            policy.n_actions(),
            view.n_states(),
            view.n_actions()
        )));
    }
    Ok(())
}

/// `r_pi(s) = sum_a pi(a|s) r(s, a)`.
pub fn policy_reward<M: ModelView + ?Sized>(view: &M, policy: &TabularPolicy) -> DVector<f64> {
    view.rewards().component_mul(policy.probs()).column_sum()
}

/// `P_pi = sum_a diag(pi(a|.)) P^a`.
pub fn policy_transition<M: ModelView + ?Sized>(view: &M, policy: &TabularPolicy) -> DMatrix<f64> {
    let n = view.n_states();
    let mut p = DMatrix::zeros(n, n);
    for (a, pa) in view.transitions().iter().enumerate() {
        for s in 0..n {
            let w = policy.prob(s, a);
            if w != 0.0 {
                for t in 0..n {
                    p[(s, t)] += w * pa[(s, t)];
                }
            }
        }
    }
    p
}

/// Applies the Bellman operator `T_pi v = r_pi + gamma P_pi v`.
pub fn bellman_apply<M: ModelView + ?Sized>(
    view: &M,
    policy: &TabularPolicy,
    v: &ValueFunction,
) -> Result<ValueFunction> {
    check_policy(view, policy)?;
    if v.len() != view.n_states() {
        return Err(VeqError::dim(format!(
            "value function of length {} for {} states",
            v.len(),
            view.n_states()
        )));
    }
    let mut out = policy_reward(view, policy);
    for (a, pa) in view.transitions().iter().enumerate() {
        let next = pa * &v.0;
        for s in 0..out.len() {
            out[s] += view.gamma() * policy.prob(s, a) * next[s];
        }
    }
    Ok(ValueFunction(out))
}

/// Solves `(I - gamma P_pi) v = r_pi` directly.
pub fn evaluate_exact<M: ModelView + ?Sized>(
    view: &M,
    policy: &TabularPolicy,
) -> Result<ValueFunction> {
    check_policy(view, policy)?;
    let n = view.n_states();
    let a = DMatrix::identity(n, n) - policy_transition(view, policy) * view.gamma();
    let b = policy_reward(view, policy);
    Ok(ValueFunction(linalg::solve(a, &b)?))
}

/// `Q(s, a) = r(s, a) + gamma sum_s' p(s'|s, a) v(s')`.
pub fn q_values<M: ModelView + ?Sized>(view: &M, v: &ValueFunction) -> DMatrix<f64> {
    let mut q = view.rewards().clone();
    for (a, pa) in view.transitions().iter().enumerate() {
        let next = pa * &v.0;
        let mut col = q.column_mut(a);
        col.axpy(view.gamma(), &next, 1.0);
    }
    q
}

/// One application of the Bellman optimality operator, with the greedy
/// actions that attain the maximum (ties to the lowest action index).
pub fn bellman_optimality<M: ModelView + ?Sized>(
    view: &M,
    v: &ValueFunction,
) -> (ValueFunction, Vec<usize>) {
    let q = q_values(view, v);
    let actions: Vec<usize> = q
        .row_iter()
        .map(|row| argmax(row.iter().copied()))
        .collect();
    let values = actions
        .iter()
        .enumerate()
        .map(|(s, &a)| q[(s, a)])
        .collect();
    (ValueFunction::from_vec(values), actions)
}

/// Greedy deterministic policy with respect to `v`.
pub fn greedy_policy<M: ModelView + ?Sized>(view: &M, v: &ValueFunction) -> TabularPolicy {
    let (_, actions) = bellman_optimality(view, v);
    TabularPolicy::deterministic(&actions, view.n_actions())
}

#[derive(Debug, Clone, Copy)]
pub struct ViConfig {
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for ViConfig {
    fn default() -> Self {
        ViConfig {
            tol: 1e-8,
            max_iters: 100_000,
        }
    }
}

/// Value iteration from zero until `||T v - v||_inf < tol`; returns the
/// final iterate and its greedy policy.
pub fn value_iteration<M: ModelView + ?Sized>(
    view: &M,
    cfg: ViConfig,
) -> Result<(ValueFunction, TabularPolicy)> {
    if !(cfg.tol > 0.0) {
        return Err(VeqError::invalid(
            "value iteration tolerance must be positive",
        ));
    }
    let mut v = ValueFunction::zeros(view.n_states());
    let mut residual = f64::INFINITY;
    for _ in 0..cfg.max_iters {
        let (next, _) = bellman_optimality(view, &v);
        residual = next.max_diff(&v);
        v = next;
        if residual < cfg.tol {
            let policy = greedy_policy(view, &v);
            return Ok((v, policy));
        }
    }
    Err(VeqError::NoConvergence {
        iters: cfg.max_iters,
        residual,
    })
}

/// `n` deterministic policies, each choosing one action per state uniformly
/// and independently.
pub fn sample_deterministic_policies(
    n: usize,
    n_states: usize,
    n_actions: usize,
    seed: u64,
) -> Vec<TabularPolicy> {
    let mut rng = rng::seeded(seed);
    (0..n)
        .map(|_| {
            let actions: Vec<usize> = (0..n_states)
                .map(|_| rng.random_range(0..n_actions))
                .collect();
            TabularPolicy::deterministic(&actions, n_actions)
        })
        .collect()
}

/// The action policies `pi^a(a|s) = 1`, one per action.
pub fn action_policies(n_states: usize, n_actions: usize) -> Vec<TabularPolicy> {
    (0..n_actions)
        .map(|a| TabularPolicy::deterministic(&vec![a; n_states], n_actions))
        .collect()
}

/// Random MDP with dense rows of normalized exponential draws and rewards
/// uniform in `[-1, 1]`.
pub fn random_mdp(n: usize, m: usize, gamma: f64, seed: u64) -> TabularMdp {
    let mut rng = rng::seeded(seed);
    let reward = DMatrix::from_fn(n, m, |_, _| rng.random_range(-1.0..1.0));
    let transition = (0..m)
        .map(|_| {
            let mut p = DMatrix::from_fn(n, n, |_, _| -rng.random::<f64>().max(1e-12).ln());
            for mut row in p.row_iter_mut() {
                let s = row.sum();
                row /= s;
            }
            p
        })
        .collect();
    TabularMdp::new(reward, transition, gamma).expect("rows are normalized")
}

/// Random stochastic policy with every probability positive.
pub fn random_policy(n: usize, m: usize, rng: &mut Rng) -> TabularPolicy {
    let mut p = DMatrix::from_fn(n, m, |_, _| rng.random::<f64>() + 1e-3);
    for mut row in p.row_iter_mut() {
        let s = row.sum();
        row /= s;
    }
    TabularPolicy::new(p).expect("rows are normalized")
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::env::toy::build_toy_mdp;
    use proptest::prelude::*;

    fn single_state(gamma: f64) -> TabularMdp {
        TabularMdp::new(
            DMatrix::from_element(1, 1, 1.0),
            vec![DMatrix::from_element(1, 1, 1.0)],
            gamma,
        )
        .unwrap()
    }

    #[test]
    fn zero_discount_bellman_is_expected_reward() {
        let mdp = random_mdp(4, 3, 0.0, 1);
        let mut rng = rng::seeded(2);
        let pi = random_policy(4, 3, &mut rng);
        let v = ValueFunction::from_vec(vec![5.0, -3.0, 2.0, 9.0]);
        let out = bellman_apply(&mdp, &pi, &v).unwrap();
        let expected = policy_reward(&mdp, &pi);
        assert!((out.0 - expected).amax() < 1e-15);
    }

    #[test]
    fn bellman_rejects_bad_dimensions() {
        let mdp = random_mdp(4, 2, 0.9, 1);
        let pi = TabularPolicy::uniform(4, 2);
        assert!(matches!(
            bellman_apply(&mdp, &pi, &ValueFunction::zeros(3)),
            Err(VeqError::Dimension(_))
        ));
        assert!(bellman_apply(
            &mdp,
            &TabularPolicy::uniform(3, 2),
            &ValueFunction::zeros(4)
        )
        .is_err());
    }

    #[test]
    fn toy_bellman_preserves_tied_states() {
        let mdp = build_toy_mdp();
        let mut rng = rng::seeded(3);
        let pi = random_policy(3, 2, &mut rng);
        let v = ValueFunction::from_vec(vec![0.7, -1.3, -1.3]);
        let out = bellman_apply(&mdp, &pi, &v).unwrap();
        assert!((out[1] - out[2]).abs() < 1e-12);
    }

    #[test]
    fn single_state_geometric_series() {
        let v = evaluate_exact(&single_state(0.99), &TabularPolicy::uniform(1, 1)).unwrap();
        assert!((v[0] - 100.0).abs() < 1e-9);
    }

    #[test]
    fn toy_always_a_matches_hand_equations() {
        let mdp = build_toy_mdp();
        let g = mdp.gamma();
        let v = evaluate_exact(&mdp, &TabularPolicy::deterministic(&[0, 0, 0], 2)).unwrap();
        assert!((v[1] - (1.0 + g * v[0])).abs() < 1e-12);
        assert!((v[2] - (1.0 + g * v[0])).abs() < 1e-12);
        let rhs = 0.6 * (1.0 + g * v[0]) + 0.4 * g * (1.0 + g * v[0]);
        assert!((v[0] - rhs).abs() < 1e-10);
    }

    #[test]
    fn exact_evaluation_matches_power_iteration() {
        let mdp = random_mdp(4, 2, 0.9, 11);
        let mut rng = rng::seeded(12);
        let pi = random_policy(4, 2, &mut rng);
        let exact = evaluate_exact(&mdp, &pi).unwrap();
        let mut v = ValueFunction::zeros(4);
        for _ in 0..10_000 {
            v = bellman_apply(&mdp, &pi, &v).unwrap();
        }
        assert!(exact.max_diff(&v) < 1e-6);
        let fixed = bellman_apply(&mdp, &pi, &exact).unwrap();
        assert!(fixed.max_diff(&exact) < 1e-10);
    }

    #[test]
    fn value_iteration_zero_discount_is_reward_argmax() {
        let mdp = random_mdp(5, 3, 0.0, 4);
        let (v, pi) = value_iteration(&mdp, ViConfig::default()).unwrap();
        for s in 0..5 {
            let row: Vec<f64> = mdp.rewards().row(s).iter().copied().collect();
            let best = argmax(row.iter().copied());
            assert_eq!(pi.greedy_actions()[s], best);
            assert!((v[s] - row[best]).abs() < 1e-15);
        }
    }

    #[test]
    fn toy_optimal_action_is_a() {
        let (_, pi) = value_iteration(&build_toy_mdp(), ViConfig::default()).unwrap();
        assert_eq!(pi.greedy_actions()[0], 0);
    }

    #[test]
    fn toy_mle_table_prefers_b() {
        let toy = build_toy_mdp();
        let mut model = TabularModel {
            reward: toy.rewards().clone(),
            transition: toy.transitions().to_vec(),
            gamma: toy.gamma(),
        };
        for (a, row) in [(0, [0.3, 0.4, 0.3]), (1, [0.4, 0.2, 0.4])] {
            for (j, p) in row.iter().enumerate() {
                model.transition[a][(0, j)] = *p;
            }
            model.reward[(0, a)] = row[0];
        }
        let (_, pi) = value_iteration(&model, ViConfig::default()).unwrap();
        assert_eq!(pi.greedy_actions()[0], 1);
    }

    #[test]
    fn value_iteration_reports_non_convergence() {
        let err = value_iteration(
            &single_state(0.99),
            ViConfig {
                tol: 1e-8,
                max_iters: 5,
            },
        )
        .unwrap_err();
        assert!(matches!(err, VeqError::NoConvergence { iters: 5, .. }));
    }

    #[test]
    fn greedy_policy_value_close_to_vi_value() {
        let mdp = random_mdp(6, 3, 0.95, 21);
        let cfg = ViConfig::default();
        let (v, pi) = value_iteration(&mdp, cfg).unwrap();
        let vp = evaluate_exact(&mdp, &pi).unwrap();
        assert!(vp.max_diff(&v) <= cfg.tol / (1.0 - mdp.gamma()));
    }

    #[test]
    fn sampled_policies_are_seeded() {
        let a = sample_deterministic_policies(30, 68, 4, 1);
        let b = sample_deterministic_policies(30, 68, 4, 1);
        let c = sample_deterministic_policies(30, 68, 4, 2);
        assert_eq!(a, b);
        assert_ne!(a, c);
        let single = sample_deterministic_policies(3, 5, 1, 9);
        assert!(single.iter().all(|p| p.greedy_actions() == vec![0; 5]));
    }

    #[test]
    fn action_policies_decompose_any_policy() {
        let basis = action_policies(4, 2);
        assert_eq!(basis.len(), 2);
        let mut rng = rng::seeded(5);
        let pi = random_policy(4, 2, &mut rng);
        for s in 0..4 {
            for a in 0..2 {
                let recon: f64 = (0..2).map(|b| pi.prob(s, b) * basis[b].prob(s, a)).sum();
                assert_eq!(recon, pi.prob(s, a));
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn bellman_is_affine(seed in 0u64..1000, alpha in -3.0f64..3.0, beta in -3.0f64..3.0) {
            let mdp = random_mdp(5, 2, 0.9, seed);
            let mut rng = rng::seeded(seed + 1);
            let pi = random_policy(5, 2, &mut rng);
            let v1 = ValueFunction::from_vec((0..5).map(|_| rng.random_range(-5.0..5.0)).collect());
            let v2 = ValueFunction::from_vec((0..5).map(|_| rng.random_range(-5.0..5.0)).collect());
            let mix = ValueFunction(&v1.0 * alpha + &v2.0 * beta);
            let lhs = bellman_apply(&mdp, &pi, &mix).unwrap();
            let t1 = bellman_apply(&mdp, &pi, &v1).unwrap();
            let t2 = bellman_apply(&mdp, &pi, &v2).unwrap();
            let rhs = &t1.0 * alpha + &t2.0 * beta - policy_reward(&mdp, &pi) * (alpha + beta - 1.0);
            prop_assert!((lhs.0 - rhs).amax() < 1e-10);
        }

        #[test]
        fn bellman_is_a_contraction(seed in 0u64..1000) {
            let mdp = random_mdp(5, 3, 0.8, seed);
            let mut rng = rng::seeded(seed + 7);
            let pi = random_policy(5, 3, &mut rng);
            let v1 = ValueFunction::from_vec((0..5).map(|_| rng.random_range(-5.0..5.0)).collect());
            let v2 = ValueFunction::from_vec((0..5).map(|_| rng.random_range(-5.0..5.0)).collect());
            let d_in = v1.max_diff(&v2);
            let d_out = bellman_apply(&mdp, &pi, &v1).unwrap().max_diff(&bellman_apply(&mdp, &pi, &v2).unwrap());
            prop_assert!(d_out <= mdp.gamma() * d_in + 1e-12);
        }

        #[test]
        fn exact_evaluation_is_a_fixed_point(seed in 0u64..1000) {
            let mdp = random_mdp(6, 2, 0.99, seed);
            let mut rng = rng::seeded(seed + 3);
            let pi = random_policy(6, 2, &mut rng);
            let v = evaluate_exact(&mdp, &pi).unwrap();
            let t = bellman_apply(&mdp, &pi, &v).unwrap();
            prop_assert!(t.max_diff(&v) < 1e-9);
        }
    }
}
