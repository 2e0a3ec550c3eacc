//! Model classes with one free parameter per row, and their fits.

use nalgebra::DMatrix;

use crate::env::build_toy_variant;
use crate::error::{Result, VeqError};
use crate::mdp::TabularMdp;
use crate::model::{AdamConfig, AdamState};

/// Toy-MDP class: from `s1`, action `a` moves with
/// `((1 - theta_a) / 2, theta_a, (1 - theta_a) / 2)`; the other rows and the
/// reward rule (1 on entering `s1`) are those of the toy MDP.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyOneDof {
    pub theta: Vec<f64>,
}

impl ToyOneDof {
    pub fn row(theta: f64) -> [f64; 3] {
        [(1.0 - theta) / 2.0, theta, (1.0 - theta) / 2.0]
    }

    pub fn rows(&self) -> Vec<[f64; 3]> {
        self.theta.iter().map(|&t| Self::row(t)).collect()
    }

    pub fn to_mdp(&self, gamma: f64) -> Result<TabularMdp> {
        if self.theta.iter().any(|t| !(0.0..=1.0).contains(t)) {
            return Err(VeqError::invalid("toy class parameters must lie in [0, 1]"));
        }
        build_toy_variant(&self.rows(), gamma)
    }

    /// Likelihood maximizer for observed `s1` next-state frequencies `q`.
    pub fn fit_mle(rows: &[[f64; 3]]) -> Self {
        ToyOneDof {
            theta: rows.iter().map(|q| q[1]).collect(),
        }
    }

    /// Value-equivalence fit for `V = {[1, 0, 0]}`: match the probability of
    /// returning to `s1`, clamped to the class.
    pub fn fit_ve(rows: &[[f64; 3]]) -> Self {
        ToyOneDof {
            theta: rows
                .iter()
                .map(|q| (1.0 - 2.0 * q[0]).clamp(0.0, 1.0))
                .collect(),
        }
    }
}

/// Negative log-likelihood of frequencies `q` under `row(theta)`, and its
/// derivative.
pub fn toy_mle_loss(theta: f64, q: &[f64; 3]) -> (f64, f64) {
    let side = (1.0 - theta) / 2.0;
    let loss = -(q[0] + q[2]) * side.ln() - q[1] * theta.ln();
    let grad = (q[0] + q[2]) / (1.0 - theta) - q[1] / theta;
    (loss, grad)
}

/// Squared Bellman residual at `s1` for the action policy, summed over
/// `values`. The model reward follows the class (`p_11` of the model), the
/// target reward is the observed `q[0]`.
pub fn toy_ve_loss(theta: f64, q: &[f64; 3], values: &[[f64; 3]], gamma: f64) -> (f64, f64) {
    let p = ToyOneDof::row(theta);
    let dp = [-0.5, 1.0, -0.5];
    let mut loss = 0.0;
    let mut grad = 0.0;
    for v in values {
        let target: f64 = q[0] + gamma * (0..3).map(|i| q[i] * v[i]).sum::<f64>();
        let model: f64 = p[0] + gamma * (0..3).map(|i| p[i] * v[i]).sum::<f64>();
        let d_model: f64 = dp[0] + gamma * (0..3).map(|i| dp[i] * v[i]).sum::<f64>();
        let e = target - model;
        loss += e * e;
        grad -= 2.0 * e * d_model;
    }
    (loss, grad)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectedAdam {
    pub lr: f64,
    pub steps: usize,
    pub lo: f64,
    pub hi: f64,
}

impl Default for ProjectedAdam {
    fn default() -> Self {
        ProjectedAdam {
            lr: 2e-3,
            steps: 5_000,
            lo: 0.0,
            hi: 1.0,
        }
    }
}

/// Adam on `theta`, clamping every coordinate to `[lo, hi]` after each step.
pub fn fit_projected<F>(mut theta: Vec<f64>, loss: F, cfg: &ProjectedAdam) -> Vec<f64>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let mut adam = AdamState::new(AdamConfig {
        lr: cfg.lr,
        ..AdamConfig::default()
    });
    for t in theta.iter_mut() {
        *t = t.clamp(cfg.lo, cfg.hi);
    }
    for _ in 0..cfg.steps {
        let grad = loss(&theta);
        adam.update(&mut [theta.as_mut_slice()], &[grad.as_slice()]);
        for t in theta.iter_mut() {
            *t = t.clamp(cfg.lo, cfg.hi);
        }
    }
    theta
}

/// Gradient fits of the toy class, one parameter per action, from `0.5`.
pub fn fit_toy_mle_gradient(rows: &[[f64; 3]]) -> ToyOneDof {
    let cfg = ProjectedAdam {
        lo: 1e-9,
        hi: 1.0 - 1e-9,
        ..ProjectedAdam::default()
    };
    let theta = fit_projected(
        vec![0.5; rows.len()],
        |th| {
            th.iter()
                .zip(rows)
                .map(|(&t, q)| toy_mle_loss(t, q).1)
                .collect()
        },
        &cfg,
    );
    ToyOneDof { theta }
}

pub fn fit_toy_ve_gradient(rows: &[[f64; 3]], values: &[[f64; 3]], gamma: f64) -> ToyOneDof {
    let theta = fit_projected(
        vec![0.5; rows.len()],
        |th| {
            th.iter()
                .zip(rows)
                .map(|(&t, q)| toy_ve_loss(t, q, values, gamma).1)
                .collect()
        },
        &ProjectedAdam::default(),
    );
    ToyOneDof { theta }
}

/// Single-action `n`-state class: row `i` stays with probability `theta_i`
/// and moves to each other state with `(1 - theta_i) / (n - 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainOneDof {
    pub theta: Vec<f64>,
}

impl ChainOneDof {
    pub fn transition(&self) -> DMatrix<f64> {
        let n = self.theta.len();
        DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                self.theta[i]
            } else {
                (1.0 - self.theta[i]) / (n - 1) as f64
            }
        })
    }

    /// Expected-likelihood maximizer: `theta_i = p_ii`.
    pub fn fit_mle(p: &DMatrix<f64>) -> Self {
        ChainOneDof {
            theta: (0..p.nrows()).map(|i| p[(i, i)]).collect(),
        }
    }

    /// Parameters making the model agree with `p` on the column `e_i`:
    /// `theta_i = p_ii` and `theta_j = 1 - (n - 1) p_ji`. May leave `[0, 1]`.
    pub fn fit_ve(p: &DMatrix<f64>, i: usize) -> Self {
        let n = p.nrows();
        ChainOneDof {
            theta: (0..n)
                .map(|j| {
                    if j == i {
                        p[(i, i)]
                    } else {
                        1.0 - (n - 1) as f64 * p[(j, i)]
                    }
                })
                .collect(),
        }
    }

    pub fn is_feasible(&self) -> bool {
        self.theta.iter().all(|t| (0.0..=1.0).contains(t))
    }
}

/// Gradient fits of the chain class for cross-checking the closed forms.
pub fn fit_chain_mle_gradient(p: &DMatrix<f64>) -> ChainOneDof {
    let n = p.nrows();
    let cfg = ProjectedAdam {
        lo: 1e-9,
        hi: 1.0 - 1e-9,
        ..ProjectedAdam::default()
    };
    let theta = fit_projected(
        vec![0.5; n],
        |th| {
            (0..n)
                .map(|i| -p[(i, i)] / th[i] + (1.0 - p[(i, i)]) / (1.0 - th[i]))
                .collect()
        },
        &cfg,
    );
    ChainOneDof { theta }
}

pub fn fit_chain_ve_gradient(p: &DMatrix<f64>, i: usize) -> ChainOneDof {
    let n = p.nrows();
    let m = (n - 1) as f64;
    let theta = fit_projected(
        vec![0.5; n],
        |th| {
            (0..n)
                .map(|j| {
                    if j == i {
                        2.0 * (th[j] - p[(i, i)])
                    } else {
                        -2.0 / m * ((1.0 - th[j]) / m - p[(j, i)])
                    }
                })
                .collect()
        },
        &ProjectedAdam::default(),
    );
    ChainOneDof { theta }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{TOY_P_A, TOY_P_B};

    #[test]
    fn toy_closed_forms_match_the_table() {
        let rows = [TOY_P_A, TOY_P_B];
        let mle = ToyOneDof::fit_mle(&rows).rows();
        let ve = ToyOneDof::fit_ve(&rows).rows();
        let close = |a: [f64; 3], b: [f64; 3]| a.iter().zip(&b).all(|(x, y)| (x - y).abs() < 1e-12);
        assert!(close(mle[0], [0.3, 0.4, 0.3]));
        assert!(close(mle[1], [0.4, 0.2, 0.4]));
        assert!(close(ve[0], [0.5, 0.0, 0.5]));
        assert!(close(ve[1], [0.4, 0.2, 0.4]));
    }

    #[test]
    fn scalar_loss_derivatives_match_differences() {
        let q = [0.5, 0.3, 0.2];
        let vals = [[1.0, 0.0, 0.0], [0.2, -1.0, 3.0]];
        let h = 1e-6;
        for &t in &[0.2, 0.5, 0.8] {
            let num = (toy_mle_loss(t + h, &q).0 - toy_mle_loss(t - h, &q).0) / (2.0 * h);
            assert!((num - toy_mle_loss(t, &q).1).abs() < 1e-6);
            let num = (toy_ve_loss(t + h, &q, &vals, 0.9).0 - toy_ve_loss(t - h, &q, &vals, 0.9).0)
                / (2.0 * h);
            assert!((num - toy_ve_loss(t, &q, &vals, 0.9).1).abs() < 1e-6);
        }
    }

    #[test]
    fn gradient_fits_agree_with_closed_forms() {
        let rows = [TOY_P_A, TOY_P_B];
        let g = fit_toy_mle_gradient(&rows);
        assert!(
            (g.theta[0] - 0.4).abs() < 0.02 && (g.theta[1] - 0.2).abs() < 0.02,
            "{g:?}"
        );
        let g = fit_toy_ve_gradient(&rows, &[[1.0, 0.0, 0.0]], 0.9);
        assert!(
            g.theta[0].abs() < 0.02 && (g.theta[1] - 0.2).abs() < 0.02,
            "{g:?}"
        );
    }

    #[test]
    fn uniform_chain_makes_both_fits_exact() {
        let p = DMatrix::from_element(3, 3, 1.0 / 3.0);
        let mle = ChainOneDof::fit_mle(&p).transition();
        let ve = ChainOneDof::fit_ve(&p, 0).transition();
        assert!((mle - &p).amax() < 1e-15);
        assert!((ve - &p).amax() < 1e-15);
    }
}
