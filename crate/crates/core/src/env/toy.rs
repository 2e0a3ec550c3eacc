//! The 3-state, 2-action example MDP.
//!
//! Every transition into `s1` (index 0) pays 1. From `s2` and `s3` every
//! action returns to `s1`; from `s1`, action `a` (index 0) and `b` (index 1)
//! move according to their own next-state distributions.

use crate::error::Result;
use crate::mdp::{Outcome, TabularMdp};

pub const TOY_GAMMA: f64 = 0.9;
pub const TOY_P_A: [f64; 3] = [0.6, 0.4, 0.0];
pub const TOY_P_B: [f64; 3] = [0.4, 0.2, 0.4];

/// Toy MDP with `p^a = (0.6, 0.4, 0.0)` and `p^b = (0.4, 0.2, 0.4)`.
pub fn build_toy_mdp() -> TabularMdp {
    build_toy_variant(&[TOY_P_A, TOY_P_B], TOY_GAMMA).expect("toy MDP is valid")
}

/// Toy MDP with arbitrary `s1` rows, one per action.
pub fn build_toy_variant(rows: &[[f64; 3]], gamma: f64) -> Result<TabularMdp> {
    let n_actions = rows.len();
    let mut outcomes = Vec::with_capacity(3 * n_actions);
    for row in rows {
        outcomes.push(
            row.iter()
                .enumerate()
                .filter(|(_, &p)| p > 0.0)
                .map(|(t, &p)| Outcome {
                    prob: p,
                    reward: if t == 0 { 1.0 } else { 0.0 },
                    next: t,
                })
                .collect(),
        );
    }
    for _ in 1..3 {
        for _ in 0..n_actions {
            outcomes.push(vec![Outcome {
                prob: 1.0,
                reward: 1.0,
                next: 0,
            }]);
        }
    }
    TabularMdp::from_outcomes(3, n_actions, outcomes, gamma, vec![1.0 / 3.0; 3])
}
