use std::time::{Duration, Instant};

use super::adam::{AdamConfig, AdamState};
use super::factorized::FactorizedModel;
use super::loss::{mle_loss_and_grad, Objective, VeTargets};
use crate::env::TransitionDataset;
use crate::error::{Result, VeqError};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub adam: AdamConfig,
    pub max_steps: usize,
    /// Stop once the largest gradient entry falls below this.
    pub grad_tol: f64,
    /// Loss is recorded every `log_every` steps.
    pub log_every: usize,
    /// Row-stochasticity is re-checked every `check_every` steps.
    pub check_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            adam: AdamConfig::default(),
            max_steps: 50_000,
            grad_tol: 1e-7,
            log_every: 100,
            check_every: 1_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub initial_loss: f64,
    pub final_loss: f64,
    /// Infinity norm of the gradient at the returned parameters.
    pub grad_norm: f64,
    pub steps: usize,
    pub converged: bool,
    /// `(step, loss)` pairs, always including step 0 and the final step.
    pub losses: Vec<(usize, f64)>,
    pub wall_time: Duration,
}

/// Full-batch Adam on the chosen objective. The model reward table is left
/// untouched; fit it beforehand with [`fit_reward`](super::fit_reward).
pub fn train(
    model: &mut FactorizedModel,
    dataset: &TransitionDataset,
    objective: Objective<'_>,
    cfg: &TrainConfig,
) -> Result<TrainReport> {
    if cfg.max_steps == 0 {
        return Err(VeqError::invalid("max_steps must be at least 1"));
    }
    let started = Instant::now();
    let targets = match objective {
        Objective::Mle => None,
        Objective::Ve {
            vset,
            weight_by_counts,
        } => Some(VeTargets::new(dataset, vset, weight_by_counts)?),
    };
    let eval = |m: &FactorizedModel| match &targets {
        None => mle_loss_and_grad(m, dataset),
        Some(t) => t.loss_and_grad(m),
    };
    let mut adam = AdamState::new(cfg.adam);
    let log_every = cfg.log_every.max(1);
    let check_every = cfg.check_every.max(1);
    let mut losses = Vec::new();
    let mut steps = 0;
    let (mut loss, mut grads) = eval(model)?;
    let initial_loss = loss;
    let mut converged = false;
    loop {
        if !loss.is_finite() {
            return Err(VeqError::NonFinite { step: steps, loss });
        }
        if steps % log_every == 0 {
            losses.push((steps, loss));
        }
        if grads.max_abs() < cfg.grad_tol {
            converged = true;
            break;
        }
        if steps == cfg.max_steps {
            break;
        }
        adam.update(&mut model.params_mut(), &grads.slices());
        steps += 1;
        if steps % check_every == 0 {
            model.check_stochastic(1e-10)?;
        }
        (loss, grads) = eval(model)?;
    }
    if losses.last().map(|l| l.0) != Some(steps) {
        losses.push((steps, loss));
    }
    Ok(TrainReport {
        initial_loss,
        final_loss: loss,
        grad_norm: grads.max_abs(),
        steps,
        converged,
        losses,
        wall_time: started.elapsed(),
    })
}
