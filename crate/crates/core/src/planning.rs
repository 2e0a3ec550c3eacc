//! Turning a learned model into a policy and scoring that policy on the
//! true MDP.

use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{Result, VeqError};
use crate::function_set::FunctionSet;
use crate::linalg;
use crate::mdp::{
    evaluate_exact, greedy_policy, sample_index, value_iteration, ModelView, TabularMdp,
    TabularPolicy, ValueFunction, ViConfig,
};
use crate::rng::{self, derive_seed};

/// Value iteration on the model, then the greedy policy of its fixed point.
pub fn plan_value_iteration<M: ModelView + ?Sized>(model: &M) -> Result<TabularPolicy> {
    Ok(value_iteration(model, ViConfig::default())?.1)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LstdConfig {
    pub samples_per_policy: usize,
    pub n_iterations: usize,
    pub ridge: f64,
    pub seed: u64,
    /// Use `sum_s' P(s'|s,a) phi(s')` instead of a sampled model next state.
    pub expected_next_state: bool,
}

impl Default for LstdConfig {
    fn default() -> Self {
        LstdConfig {
            samples_per_policy: 10_000,
            n_iterations: 40,
            ridge: 1e-6,
            seed: 0,
            expected_next_state: false,
        }
    }
}

impl LstdConfig {
    fn validate(&self) -> Result<()> {
        if self.samples_per_policy == 0 || self.n_iterations == 0 || !(self.ridge >= 0.0) {
            return Err(VeqError::invalid(
                "LSTD needs positive sample and iteration counts and a non-negative ridge",
            ));
        }
        Ok(())
    }
}

/// LSTD weights for `policy`.
///
/// States and actions come from one trajectory of `policy` in `true_mdp`;
/// each tuple's reward and next state are then replaced by the model's
/// prediction before solving
/// `(sum phi(s) (phi(s) - gamma phi(s'))^T + ridge I) w = sum phi(s) r`.
pub fn lstd_evaluate<M: ModelView + ?Sized>(
    model: &M,
    policy: &TabularPolicy,
    features: &FunctionSet,
    cfg: &LstdConfig,
    true_mdp: &TabularMdp,
) -> Result<DVector<f64>> {
    cfg.validate()?;
    let n = model.n_states();
    if true_mdp.n_states() != n
        || true_mdp.n_actions() != model.n_actions()
        || features.n_states() != n
    {
        return Err(VeqError::dim(
            "model, true MDP and features disagree on the state space",
        ));
    }
    if policy.n_states() != n || policy.n_actions() != model.n_actions() {
        return Err(VeqError::dim("policy shape does not match the model"));
    }
    let transitions = model.transitions();
    let rewards = model.rewards();
    let mut env_rng = rng::stream(cfg.seed, 0);
    let mut model_rng = rng::stream(cfg.seed, 1);

    // Sufficient statistics: state visits, model next-state mass, reward sums.
    let mut visits = DVector::<f64>::zeros(n);
    let mut next_mass = DMatrix::<f64>::zeros(n, n);
    let mut reward_sum = DVector::<f64>::zeros(n);
    let mut s = true_mdp.sample_start(&mut env_rng);
    for _ in 0..cfg.samples_per_policy {
        let a = policy.sample_action(s, &mut env_rng);
        visits[s] += 1.0;
        reward_sum[s] += rewards[(s, a)];
        let row = transitions[a].row(s);
        if cfg.expected_next_state {
            for (t, &p) in row.iter().enumerate() {
                next_mass[(s, t)] += p;
            }
        } else {
            let probs: Vec<f64> = row.iter().copied().collect();
            next_mass[(s, sample_index(&probs, &mut model_rng))] += 1.0;
        }
        s = true_mdp.step(s, a, &mut env_rng).1;
    }

    let phi = features.basis();
    let d = phi.ncols();
    let weighted = DMatrix::from_fn(n, d, |i, j| visits[i] * phi[(i, j)]);
    let a_mat = phi.transpose() * weighted - (phi.transpose() * &next_mass * phi) * model.gamma()
        + DMatrix::identity(d, d) * cfg.ridge;
    let b = phi.transpose() * reward_sum;
    linalg::solve(a_mat, &b)
}

/// Approximate policy iteration: LSTD evaluation on model-replaced tuples,
/// then greedy improvement through the model, `n_iterations` times from the
/// uniform policy. Ties go to the lowest action index.
pub fn policy_iteration_lstd<M: ModelView + ?Sized>(
    model: &M,
    features: &FunctionSet,
    cfg: &LstdConfig,
    true_mdp: &TabularMdp,
) -> Result<TabularPolicy> {
    cfg.validate()?;
    let mut policy = TabularPolicy::uniform(model.n_states(), model.n_actions());
    for it in 0..cfg.n_iterations {
        let round = LstdConfig {
            seed: derive_seed(cfg.seed, it as u64),
            ..*cfg
        };
        let w = lstd_evaluate(model, &policy, features, &round, true_mdp)?;
        let v = ValueFunction(features.basis() * w);
        policy = greedy_policy(model, &v);
    }
    Ok(policy)
}

/// Mean over states of the exact value of `policy` on `mdp`.
pub fn evaluate_policy_mean<M: ModelView + ?Sized>(mdp: &M, policy: &TabularPolicy) -> Result<f64> {
    Ok(evaluate_exact(mdp, policy)?.mean())
}

/// Writes the greedy action of every state as `s,action` rows.
pub fn write_policy_csv(policy: &TabularPolicy, path: &Path) -> Result<()> {
    let mut out = String::from("s,action\n");
    for (s, a) in policy.greedy_actions().into_iter().enumerate() {
        out.push_str(&format!("{s},{a}\n"));
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Reads a deterministic policy written by [`write_policy_csv`]. Every
/// state must appear exactly once.
pub fn read_policy_csv(path: &Path, n_states: usize, n_actions: usize) -> Result<TabularPolicy> {
    let text = std::fs::read_to_string(path)?;
    let err = |line: usize, msg: String| VeqError::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    };
    let mut lines = text.lines().enumerate();
    if lines.next().map(|(_, h)| h.trim()) != Some("s,action") {
        return Err(err(1, "expected header 's,action'".into()));
    }
    let mut actions: Vec<Option<usize>> = vec![None; n_states];
    for (i, line) in lines {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let (s, a) = line
            .split_once(',')
            .ok_or_else(|| err(i + 1, "expected s,action".into()))?;
        let s: usize = s
            .trim()
            .parse()
            .map_err(|_| err(i + 1, format!("bad state '{s}'")))?;
        let a: usize = a
            .trim()
            .parse()
            .map_err(|_| err(i + 1, format!("bad action '{a}'")))?;
        if s >= n_states || a >= n_actions {
            return Err(err(i + 1, format!("state {s} or action {a} out of range")));
        }
        if actions[s].replace(a).is_some() {
            return Err(err(i + 1, format!("state {s} listed twice")));
        }
    }
    let actions = actions
        .into_iter()
        .enumerate()
        .map(|(s, a)| a.ok_or_else(|| err(0, format!("state {s} missing"))))
        .collect::<Result<Vec<_>>>()?;
    Ok(TabularPolicy::deterministic(&actions, n_actions))
}
