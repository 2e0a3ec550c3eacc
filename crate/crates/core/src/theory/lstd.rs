//! LSTD policy iteration against exact dynamic programming when the
//! "learned" model is the true MDP and the features are one-hot.

use nalgebra::DMatrix;

use super::CheckReport;
use crate::function_set::FunctionSet;
use crate::mdp::{evaluate_exact, random_mdp, random_policy, value_iteration, ViConfig};
use crate::planning::{lstd_evaluate, policy_iteration_lstd, LstdConfig};
use crate::rng::{self, derive_seed};

/// On `n_mdps` random 6-state, 3-action MDPs: policy iteration recovers the
/// optimal policy, and LSTD evaluation of a random policy with `samples`
/// sampled transitions is within 0.05 of the exact values.
///
/// Policy iteration uses expected model next states, which makes each
/// evaluation exact on visited states, so any miss is a logic error rather
/// than sampling noise on a near tie.
pub fn check_lstd_oracle(n_mdps: usize, samples: usize, seed: u64) -> CheckReport {
    let mut report = CheckReport::new("lstd_oracle");
    let (n, m) = (6, 3);
    let features = FunctionSet::new(DMatrix::identity(n, n)).expect("non-empty");
    let mut rng = rng::stream(seed, 61);
    let (mut wrong_policies, mut worst_eval): (usize, f64) = (0, 0.0);
    for i in 0..n_mdps as u64 {
        let mdp = random_mdp(n, m, 0.9, derive_seed(seed, 62 + i));
        let cfg = LstdConfig {
            samples_per_policy: samples,
            n_iterations: 10,
            seed: derive_seed(seed, 1_000 + i),
            ..LstdConfig::default()
        };
        let pi_cfg = LstdConfig {
            samples_per_policy: 2_000,
            expected_next_state: true,
            ..cfg
        };
        let mut run = || -> crate::Result<(bool, f64)> {
            let (_, optimal) = value_iteration(&mdp, ViConfig::default())?;
            let pi = policy_iteration_lstd(&mdp, &features, &pi_cfg, &mdp)?;
            let probe = random_policy(n, m, &mut rng);
            let w = lstd_evaluate(&mdp, &probe, &features, &cfg, &mdp)?;
            let exact = evaluate_exact(&mdp, &probe)?;
            Ok((
                pi.greedy_actions() == optimal.greedy_actions(),
                (w - &exact.0).amax(),
            ))
        };
        match run() {
            Ok((same, err)) => {
                wrong_policies += usize::from(!same);
                worst_eval = worst_eval.max(err);
            }
            Err(e) => report.require(false, &e.to_string()),
        }
    }
    report.metric("mdps", n_mdps as f64);
    report.metric("non_optimal_policies", wrong_policies as f64);
    report.metric("max_eval_err", worst_eval);
    report.require(
        wrong_policies == 0,
        "policy iteration missed the optimal policy",
    );
    report.require(
        worst_eval < 0.05,
        "LSTD values off the exact values by 0.05 or more",
    );
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_oracle_run_passes() {
        let r = check_lstd_oracle(3, 200_000, 9);
        assert!(r.passed, "{r}");
    }
}
