use std::sync::OnceLock;

use nalgebra::DMatrix;
use rand::Rng as _;

use crate::env::TransitionDataset;
use crate::error::{Result, VeqError};
use crate::mdp::ModelView;
use crate::rng;

/// Row-wise softmax with temperature 1.
pub fn row_softmax(logits: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = logits.clone();
    for mut row in out.row_iter_mut() {
        let max = row.max();
        row.apply(|x| *x = (*x - max).exp());
        let sum = row.sum();
        row /= sum;
    }
    out
}

/// Backpropagates `grad` (w.r.t. the softmax output `probs`) to the logits:
/// `g_F = p * (g - <p, g>)` row by row.
pub(crate) fn row_softmax_backward(probs: &DMatrix<f64>, grad: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(probs.nrows(), probs.ncols());
    for i in 0..probs.nrows() {
        let dot: f64 = (0..probs.ncols())
            .map(|j| probs[(i, j)] * grad[(i, j)])
            .sum();
        for j in 0..probs.ncols() {
            out[(i, j)] = probs[(i, j)] * (grad[(i, j)] - dot);
        }
    }
    out
}

/// Learnable model with transitions `P^a = softmax(F_D^a) softmax(F_K^a)`,
/// so every `P^a` is row-stochastic, strictly positive and of rank at most
/// `rank`. The reward table is stored separately and is not a logit.
#[derive(Debug, Clone)]
pub struct FactorizedModel {
    n_states: usize,
    n_actions: usize,
    rank: usize,
    gamma: f64,
    /// Per action, `n_states x rank` logits of `D`.
    pub(crate) fd: Vec<DMatrix<f64>>,
    /// Per action, `rank x n_states` logits of `K`.
    pub(crate) fk: Vec<DMatrix<f64>>,
    reward: DMatrix<f64>,
    cache: OnceLock<Vec<DMatrix<f64>>>,
}

/// Gradients with the same layout as the model logits.
#[derive(Debug, Clone)]
pub struct ModelGrads {
    pub fd: Vec<DMatrix<f64>>,
    pub fk: Vec<DMatrix<f64>>,
}

impl ModelGrads {
    pub(crate) fn zeros_like(model: &FactorizedModel) -> Self {
        ModelGrads {
            fd: model
                .fd
                .iter()
                .map(|m| DMatrix::zeros(m.nrows(), m.ncols()))
                .collect(),
            fk: model
                .fk
                .iter()
                .map(|m| DMatrix::zeros(m.nrows(), m.ncols()))
                .collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.fd
            .iter()
            .chain(&self.fk)
            .map(|m| m.amax())
            .fold(0.0, f64::max)
    }

    /// Flat view in the order of [`FactorizedModel::params_mut`].
    pub fn slices(&self) -> Vec<&[f64]> {
        self.fd
            .iter()
            .chain(&self.fk)
            .map(|m| m.as_slice())
            .collect()
    }
}

impl FactorizedModel {
    /// Model with every logit zero: all rows of `D`, `K` and `P` uniform.
    pub fn zeros(n_states: usize, n_actions: usize, rank: usize, gamma: f64) -> Result<Self> {
        if rank == 0 || n_states == 0 || n_actions == 0 {
            return Err(VeqError::invalid(
                "model dimensions and rank must be positive",
            ));
        }
        Ok(FactorizedModel {
            n_states,
            n_actions,
            rank,
            gamma,
            fd: vec![DMatrix::zeros(n_states, rank); n_actions],
            fk: vec![DMatrix::zeros(rank, n_states); n_actions],
            reward: DMatrix::zeros(n_states, n_actions),
            cache: OnceLock::new(),
        })
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn d_factor(&self, a: usize) -> DMatrix<f64> {
        row_softmax(&self.fd[a])
    }

    pub fn k_factor(&self, a: usize) -> DMatrix<f64> {
        row_softmax(&self.fk[a])
    }

    pub fn d_logits(&self, a: usize) -> &DMatrix<f64> {
        &self.fd[a]
    }

    pub fn k_logits(&self, a: usize) -> &DMatrix<f64> {
        &self.fk[a]
    }

    pub fn set_logits(&mut self, fd: Vec<DMatrix<f64>>, fk: Vec<DMatrix<f64>>) -> Result<()> {
        let ok = fd.len() == self.n_actions
            && fk.len() == self.n_actions
            && fd.iter().all(|m| m.shape() == (self.n_states, self.rank))
            && fk.iter().all(|m| m.shape() == (self.rank, self.n_states));
        if !ok {
            return Err(VeqError::dim("logit shapes do not match the model"));
        }
        self.fd = fd;
        self.fk = fk;
        self.cache = OnceLock::new();
        Ok(())
    }

    pub fn set_reward(&mut self, reward: DMatrix<f64>) -> Result<()> {
        if reward.shape() != (self.n_states, self.n_actions) {
            return Err(VeqError::dim("reward table shape"));
        }
        self.reward = reward;
        Ok(())
    }

    /// Mutable flat views of all logits: every `F_D^a`, then every `F_K^a`.
    pub fn params_mut(&mut self) -> Vec<&mut [f64]> {
        self.cache = OnceLock::new();
        self.fd
            .iter_mut()
            .chain(self.fk.iter_mut())
            .map(|m| m.as_mut_slice())
            .collect()
    }

    pub fn n_params(&self) -> usize {
        self.fd.iter().chain(&self.fk).map(|m| m.len()).sum()
    }

    pub(crate) fn invalidate(&mut self) {
        self.cache = OnceLock::new();
    }

    /// Checks that `D`, `K` and `P` rows sum to one within `tol` and are positive.
    pub fn check_stochastic(&self, tol: f64) -> Result<()> {
        for a in 0..self.n_actions {
            let mats = [
                self.d_factor(a),
                self.k_factor(a),
                self.transitions()[a].clone(),
            ];
            for (name, m) in ["D", "K", "P"].iter().zip(mats.iter()) {
                for (i, row) in m.row_iter().enumerate() {
                    if (row.sum() - 1.0).abs() > tol || row.iter().any(|&x| !(x > 0.0)) {
                        return Err(VeqError::invalid(format!(
                            "{name}^{a} row {i} is not a strictly positive distribution"
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

impl ModelView for FactorizedModel {
    fn n_states(&self) -> usize {
        self.n_states
    }
    fn n_actions(&self) -> usize {
        self.n_actions
    }
    fn gamma(&self) -> f64 {
        self.gamma
    }
    fn rewards(&self) -> &DMatrix<f64> {
        &self.reward
    }
    fn transitions(&self) -> &[DMatrix<f64>] {
        self.cache.get_or_init(|| {
            (0..self.n_actions)
                .map(|a| self.d_factor(a) * self.k_factor(a))
                .collect()
        })
    }
}

/// Model with logits drawn uniformly from `[-1, 1]` and a zero reward table.
pub fn init_model(
    n_states: usize,
    n_actions: usize,
    rank: usize,
    gamma: f64,
    seed: u64,
) -> Result<FactorizedModel> {
    let mut model = FactorizedModel::zeros(n_states, n_actions, rank, gamma)?;
    let mut rng = rng::seeded(seed);
    for m in model.fd.iter_mut().chain(model.fk.iter_mut()) {
        m.apply(|x| *x = rng.random_range(-1.0..=1.0));
    }
    model.invalidate();
    Ok(model)
}

/// Empirical mean reward per `(s, a)`; unvisited cells get 0.
pub fn fit_reward(dataset: &TransitionDataset) -> DMatrix<f64> {
    DMatrix::from_fn(dataset.n_states(), dataset.n_actions(), |s, a| {
        dataset.mean_reward(s, a).unwrap_or(0.0)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{build_toy_mdp, collect_dataset, Transition};

    #[test]
    fn zero_logits_give_uniform_rows() {
        let m = FactorizedModel::zeros(4, 2, 3, 0.9).unwrap();
        for a in 0..2 {
            assert!(m.d_factor(a).iter().all(|&x| (x - 1.0 / 3.0).abs() < 1e-15));
            assert!(m.transitions()[a].iter().all(|&x| (x - 0.25).abs() < 1e-15));
        }
    }

    #[test]
    fn init_is_seeded_and_bounded() {
        let a = init_model(6, 3, 2, 0.9, 7).unwrap();
        let b = init_model(6, 3, 2, 0.9, 7).unwrap();
        assert_eq!(a.fd, b.fd);
        assert_eq!(a.fk, b.fk);
        assert!(a
            .fd
            .iter()
            .chain(&a.fk)
            .all(|m| m.iter().all(|x| x.abs() <= 1.0)));
        a.check_stochastic(1e-10).unwrap();
        assert_ne!(a.fd, init_model(6, 3, 2, 0.9, 8).unwrap().fd);
    }

    #[test]
    fn transitions_have_bounded_rank() {
        let m = init_model(8, 2, 3, 0.9, 1).unwrap();
        for p in m.transitions() {
            assert!(crate::linalg::rank(p) <= 3);
        }
    }

    #[test]
    fn reward_fit_is_the_empirical_mean() {
        let ds = TransitionDataset::from_tuples(
            2,
            1,
            vec![
                Transition {
                    s: 0,
                    a: 0,
                    r: 1.0,
                    next: 1,
                },
                Transition {
                    s: 0,
                    a: 0,
                    r: 3.0,
                    next: 0,
                },
            ],
        )
        .unwrap();
        let r = fit_reward(&ds);
        assert_eq!(r[(0, 0)], 2.0);
        assert_eq!(r[(1, 0)], 0.0);

        let toy = collect_dataset(&build_toy_mdp(), 50_000, 2).unwrap();
        let r = fit_reward(&toy);
        assert!((r[(1, 0)] - 1.0).abs() < 0.01);
        assert!((r[(2, 1)] - 1.0).abs() < 0.01);
    }

    #[test]
    fn softmax_backward_matches_finite_differences() {
        let f = DMatrix::from_row_slice(2, 3, &[0.1, -0.4, 0.9, 1.0, 0.0, -1.0]);
        let w = DMatrix::from_row_slice(2, 3, &[0.3, 1.2, -0.7, 2.0, 0.5, 0.1]);
        let obj = |f: &DMatrix<f64>| row_softmax(f).component_mul(&w).sum();
        let g = row_softmax_backward(&row_softmax(&f), &w);
        let h = 1e-6;
        for i in 0..2 {
            for j in 0..3 {
                let mut fp = f.clone();
                fp[(i, j)] += h;
                let mut fm = f.clone();
                fm[(i, j)] -= h;
                let num = (obj(&fp) - obj(&fm)) / (2.0 * h);
                assert!((num - g[(i, j)]).abs() < 1e-8);
            }
        }
    }
}
