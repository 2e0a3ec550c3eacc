use nalgebra::DMatrix;

use super::factorized::{row_softmax, row_softmax_backward, FactorizedModel, ModelGrads};
use crate::env::TransitionDataset;
use crate::error::{Result, VeqError};
use crate::function_set::FunctionSet;
use crate::mdp::ModelView;

/// Training objective.
#[derive(Debug, Clone, Copy)]
pub enum Objective<'a> {
    /// Negative log-likelihood of the observed transitions.
    Mle,
    /// Squared value-equivalence residual over the action policies and the
    /// functions of `vset`. With `weight_by_counts` each `(s, a)` term is
    /// weighted by its visit count instead of counting once.
    Ve {
        vset: &'a FunctionSet,
        weight_by_counts: bool,
    },
}

impl Objective<'_> {
    pub fn name(&self) -> &'static str {
        match self {
            Objective::Mle => "mle",
            Objective::Ve { .. } => "ve",
        }
    }
}

fn check_dims(model: &FactorizedModel, dataset: &TransitionDataset) -> Result<()> {
    if model.n_states() != dataset.n_states() || model.n_actions() != dataset.n_actions() {
        return Err(VeqError::dim(format!(
            "model is {}x{}, dataset is {}x{}",
            model.n_states(),
            model.n_actions(),
            dataset.n_states(),
            dataset.n_actions()
        )));
    }
    Ok(())
}

/// `-sum_{s,a,s'} N(s,a,s') log P^a(s, s')` and its gradient w.r.t. the logits.
///
/// Only observed `(s, s')` pairs enter the loss, so it is evaluated from the
/// sparse counts without forming `P`.
pub fn mle_loss_and_grad(
    model: &FactorizedModel,
    dataset: &TransitionDataset,
) -> Result<(f64, ModelGrads)> {
    check_dims(model, dataset)?;
    if dataset.is_empty() {
        return Err(VeqError::invalid("MLE loss needs a non-empty dataset"));
    }
    let n = model.n_states();
    let k = model.rank();
    let mut grads = ModelGrads::zeros_like(model);
    let mut loss = 0.0;
    for a in 0..model.n_actions() {
        let d = row_softmax(model.d_logits(a));
        let kf = row_softmax(model.k_logits(a));
        // Column-major storage: columns of D^T and K are contiguous.
        let dt = d.transpose();
        let mut g_dt = DMatrix::<f64>::zeros(k, n);
        let mut g_k = DMatrix::<f64>::zeros(k, n);
        for s in 0..n {
            for &(t, c) in dataset.next_counts(s, a) {
                let ds = dt.column(s);
                let kt = kf.column(t);
                let p = ds.dot(&kt);
                let c = c as f64;
                loss -= c * p.ln();
                let g = -c / p;
                g_dt.column_mut(s).axpy(g, &kt, 1.0);
                g_k.column_mut(t).axpy(g, &ds, 1.0);
            }
        }
        grads.fd[a] = row_softmax_backward(&d, &g_dt.transpose());
        grads.fk[a] = row_softmax_backward(&kf, &g_k);
    }
    Ok((loss, grads))
}

/// Empirical targets of the value-equivalence loss, fixed for a dataset and
/// function set.
#[derive(Debug, Clone)]
pub struct VeTargets {
    basis: DMatrix<f64>,
    actions: Vec<ActionTargets>,
}

#[derive(Debug, Clone)]
struct ActionTargets {
    states: Vec<usize>,
    /// `P_bar^a V` restricted to visited states, `|states| x d`.
    next_values: DMatrix<f64>,
    mean_reward: Vec<f64>,
    weight: Vec<f64>,
}

impl VeTargets {
    pub fn new(
        dataset: &TransitionDataset,
        vset: &FunctionSet,
        weight_by_counts: bool,
    ) -> Result<Self> {
        if vset.dim() == 0 {
            return Err(VeqError::invalid(
                "value-equivalence loss needs a non-empty function set",
            ));
        }
        if vset.n_states() != dataset.n_states() {
            return Err(VeqError::dim(format!(
                "function set over {} states, dataset over {}",
                vset.n_states(),
                dataset.n_states()
            )));
        }
        let basis = vset.basis().clone();
        let d = basis.ncols();
        let actions = (0..dataset.n_actions())
            .map(|a| {
                let states = dataset.visited_states(a);
                let mut next_values = DMatrix::zeros(states.len(), d);
                let mut mean_reward = Vec::with_capacity(states.len());
                let mut weight = Vec::with_capacity(states.len());
                for (i, &s) in states.iter().enumerate() {
                    for (t, p) in dataset.empirical_row(s, a).expect("visited") {
                        for j in 0..d {
                            next_values[(i, j)] += p * basis[(t, j)];
                        }
                    }
                    mean_reward.push(dataset.mean_reward(s, a).expect("visited"));
                    weight.push(if weight_by_counts {
                        dataset.visits(s, a) as f64
                    } else {
                        1.0
                    });
                }
                ActionTargets {
                    states,
                    next_values,
                    mean_reward,
                    weight,
                }
            })
            .collect();
        Ok(VeTargets { basis, actions })
    }

    /// Loss and gradient for `model`.
    ///
    /// For every visited `(s, a)` and column `v`:
    /// `e = (R_bar(s,a) - R(s,a)) + gamma (P_bar^a_s v - P^a_s v)`, and the
    /// loss is `sum w_{s,a} e^2`.
    pub fn loss_and_grad(&self, model: &FactorizedModel) -> Result<(f64, ModelGrads)> {
        if model.n_states() != self.basis.nrows() || model.n_actions() != self.actions.len() {
            return Err(VeqError::dim(
                "model does not match the value-equivalence targets",
            ));
        }
        let gamma = model.gamma();
        let mut grads = ModelGrads::zeros_like(model);
        let mut loss = 0.0;
        for (a, tg) in self.actions.iter().enumerate() {
            if tg.states.is_empty() {
                continue;
            }
            let d = row_softmax(model.d_logits(a));
            let kf = row_softmax(model.k_logits(a));
            let kv = &kf * &self.basis;
            let d_u = d.select_rows(&tg.states);
            let pred = &d_u * &kv;
            let mut g = DMatrix::<f64>::zeros(pred.nrows(), pred.ncols());
            for (i, &s) in tg.states.iter().enumerate() {
                let r_err = tg.mean_reward[i] - model.rewards()[(s, a)];
                let w = tg.weight[i];
                for j in 0..pred.ncols() {
                    let e = r_err + gamma * (tg.next_values[(i, j)] - pred[(i, j)]);
                    loss += w * e * e;
                    g[(i, j)] = -2.0 * w * gamma * e;
                }
            }
            let g_du = &g * kv.transpose();
            let mut g_d = DMatrix::<f64>::zeros(d.nrows(), d.ncols());
            for (i, &s) in tg.states.iter().enumerate() {
                g_d.row_mut(s).copy_from(&g_du.row(i));
            }
            let g_k = (d_u.transpose() * &g) * self.basis.transpose();
            grads.fd[a] = row_softmax_backward(&d, &g_d);
            grads.fk[a] = row_softmax_backward(&kf, &g_k);
        }
        Ok((loss, grads))
    }
}

/// Value-equivalence loss for the action policies and the columns of `vset`.
pub fn ve_loss_and_grad(
    model: &FactorizedModel,
    dataset: &TransitionDataset,
    vset: &FunctionSet,
) -> Result<(f64, ModelGrads)> {
    check_dims(model, dataset)?;
    VeTargets::new(dataset, vset, false)?.loss_and_grad(model)
}
