//! Central finite-difference checks of the analytic loss gradients.

use super::factorized::{fit_reward, init_model, FactorizedModel, ModelGrads};
use super::loss::{mle_loss_and_grad, ve_loss_and_grad};
use crate::env::collect_dataset;
use crate::error::Result;
use crate::function_set::FunctionSet;
use crate::mdp::random_mdp;
use crate::rng::{self, derive_seed};

pub const FD_STEP: f64 = 1e-5;

/// Entries whose magnitude is below this fraction of the largest gradient
/// entry are compared against that floor instead of their own size, so that
/// round-off on near-zero components does not dominate the ratio.
pub const REL_FLOOR: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheck {
    pub max_rel_err: f64,
    pub n_params: usize,
}

/// Compares the gradient returned by `loss_fn` with central differences of
/// step `h` over every logit of `model`.
///
/// `fault` perturbs the analytic gradient before comparison; it exists so
/// callers can confirm the check actually fails on a wrong gradient.
pub fn check_gradient<F>(
    model: &FactorizedModel,
    loss_fn: F,
    h: f64,
    fault: bool,
) -> Result<GradCheck>
where
    F: Fn(&FactorizedModel) -> Result<(f64, ModelGrads)>,
{
    let (_, mut grads) = loss_fn(model)?;
    if fault {
        grads.fd[0][(0, 0)] = grads.fd[0][(0, 0)] * 1.5 + 1.0;
    }
    let scale = grads.max_abs().max(f64::MIN_POSITIVE);
    let mut probe = model.clone();
    let mut max_rel: f64 = 0.0;
    let n_actions = model.fd.len();
    for a in 0..n_actions {
        for which in 0..2 {
            let len = if which == 0 {
                model.fd[a].len()
            } else {
                model.fk[a].len()
            };
            for i in 0..len {
                let shift = |m: &mut FactorizedModel, delta: f64| {
                    let t = if which == 0 {
                        &mut m.fd[a]
                    } else {
                        &mut m.fk[a]
                    };
                    t.as_mut_slice()[i] += delta;
                    m.invalidate();
                };
                let orig = probe.clone();
                shift(&mut probe, h);
                let up = loss_fn(&probe)?.0;
                probe = orig.clone();
                shift(&mut probe, -h);
                let down = loss_fn(&probe)?.0;
                probe = orig;
                let numeric = (up - down) / (2.0 * h);
                let analytic = if which == 0 {
                    grads.fd[a].as_slice()[i]
                } else {
                    grads.fk[a].as_slice()[i]
                };
                let denom = analytic.abs().max(numeric.abs()).max(REL_FLOOR * scale);
                max_rel = max_rel.max((analytic - numeric).abs() / denom);
            }
        }
    }
    Ok(GradCheck {
        max_rel_err: max_rel,
        n_params: model.n_params(),
    })
}

/// Worst relative error of each loss over several random parameter points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradSuite {
    pub mle_max_rel_err: f64,
    pub ve_max_rel_err: f64,
    pub points: usize,
}

/// Runs [`check_gradient`] for both losses at `points` random logit draws on
/// a random 5-state, 2-action MDP with a small dataset and a random
/// three-column function set.
pub fn gradient_suite(seed: u64, points: usize, fault: bool) -> Result<GradSuite> {
    let (n, m, k) = (5, 2, 3);
    let mdp = random_mdp(n, m, 0.9, derive_seed(seed, 11));
    let ds = collect_dataset(&mdp, 400, derive_seed(seed, 12))?;
    let mut r = rng::seeded(derive_seed(seed, 13));
    let basis = nalgebra::DMatrix::from_fn(n, 3, |_, _| rand::Rng::random_range(&mut r, -2.0..2.0));
    let vset = FunctionSet::new(basis)?;
    let reward = fit_reward(&ds);
    let mut suite = GradSuite {
        mle_max_rel_err: 0.0,
        ve_max_rel_err: 0.0,
        points,
    };
    for p in 0..points {
        let mut model = init_model(n, m, k, 0.9, derive_seed(seed, 100 + p as u64))?;
        // Rewards off the empirical means so the reward term is non-zero.
        model.set_reward(reward.map(|x| x + 0.25))?;
        let mle = check_gradient(&model, |md| mle_loss_and_grad(md, &ds), FD_STEP, fault)?;
        let ve = check_gradient(
            &model,
            |md| ve_loss_and_grad(md, &ds, &vset),
            FD_STEP,
            fault,
        )?;
        suite.mle_max_rel_err = suite.mle_max_rel_err.max(mle.max_rel_err);
        suite.ve_max_rel_err = suite.ve_max_rel_err.max(ve.max_rel_err);
    }
    Ok(suite)
}
