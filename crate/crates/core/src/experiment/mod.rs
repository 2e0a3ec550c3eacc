//! The collect / train / plan / evaluate pipeline and sweeps over it.

mod config;
mod sweep;

use std::fmt;
use std::str::FromStr;

pub use config::{ExperimentConfig, Planner, DEFAULT_LR, DEFAULT_MAX_STEPS};
pub use sweep::{
    deterministic_mode, format_sig, plot_rows, results_csv, run_sweep, summarize, sweep_keys,
    write_plot_csvs, write_results_csv, write_summary_csv, write_sweep_outputs, PlotRow, Slice,
    SummaryRow, SweepOutcome, SweepRow, PLOT_HEADER, RESULTS_HEADER, SUMMARY_HEADER,
};

use crate::env::{collect_dataset, Environment, TransitionDataset};
use crate::error::{Result, VeqError};
use crate::function_set::{kmeans_aggregation, value_polytope_set, FunctionSet};
use crate::mdp::{ModelView, TabularPolicy};
use crate::model::{
    fit_reward, init_model, train, FactorizedModel, Objective, TrainConfig, TrainReport,
};
use crate::planning::{
    evaluate_policy_mean, plan_value_iteration, policy_iteration_lstd, LstdConfig,
};
use crate::rng::{derive_seed, stage};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Mle,
    Ve,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Mle => "mle",
            Method::Ve => "ve",
        })
    }
}

impl FromStr for Method {
    type Err = VeqError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mle" => Ok(Method::Mle),
            "ve" => Ok(Method::Ve),
            _ => Err(VeqError::invalid(format!(
                "unknown method '{s}' (expected mle or ve)"
            ))),
        }
    }
}

/// How the function set `V` is built.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Strategy {
    /// k-means state aggregation on state coordinates.
    Basis,
    /// Values of random deterministic policies.
    ValuePolytope,
    /// No function set (MLE with value iteration only).
    None,
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Strategy::Basis => "basis",
            Strategy::ValuePolytope => "value_polytope",
            Strategy::None => "none",
        })
    }
}

impl FromStr for Strategy {
    type Err = VeqError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "basis" => Ok(Strategy::Basis),
            "value_polytope" | "polytope" => Ok(Strategy::ValuePolytope),
            "none" => Ok(Strategy::None),
            _ => Err(VeqError::invalid(format!("unknown strategy '{s}'"))),
        }
    }
}

/// One cell of a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RunKey {
    pub method: Method,
    pub rank: usize,
    pub dim_v: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub env: String,
    pub method: Method,
    pub strategy: Strategy,
    pub rank: usize,
    pub dim_v: usize,
    pub seed: u64,
    pub mean_value: f64,
    pub final_loss: f64,
    pub steps: usize,
}

impl ExperimentResult {
    /// The results CSV row, without a trailing newline.
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.env,
            self.method,
            self.strategy,
            self.rank,
            self.dim_v,
            self.seed,
            format_sig(self.mean_value),
            format_sig(self.final_loss),
            self.steps
        )
    }
}

/// Intermediate products of a run, for callers that want more than the row.
#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub dataset: TransitionDataset,
    pub vset: Option<FunctionSet>,
    pub model: FactorizedModel,
    pub report: TrainReport,
    pub policy: TabularPolicy,
    pub result: ExperimentResult,
}

/// Function set for `strategy`, seeded from the run seed.
pub fn build_function_set(
    env: &Environment,
    strategy: Strategy,
    dim_v: usize,
    seed: u64,
) -> Result<Option<FunctionSet>> {
    let s = derive_seed(seed, stage::FUNCTION_SET);
    match strategy {
        Strategy::Basis => kmeans_aggregation(&env.coords, dim_v, s).map(Some),
        Strategy::ValuePolytope => value_polytope_set(&env.mdp, dim_v, s).map(Some),
        Strategy::None => Ok(None),
    }
}

/// Trains a model on an existing dataset. The reward table is fitted to the
/// empirical means first.
pub fn train_model(
    dataset: &TransitionDataset,
    method: Method,
    vset: Option<&FunctionSet>,
    rank: usize,
    gamma: f64,
    seed: u64,
    cfg: &TrainConfig,
    weight_by_counts: bool,
) -> Result<(FactorizedModel, TrainReport)> {
    let mut model = init_model(
        dataset.n_states(),
        dataset.n_actions(),
        rank,
        gamma,
        derive_seed(seed, stage::INIT),
    )?;
    model.set_reward(fit_reward(dataset))?;
    let objective = match (method, vset) {
        (Method::Mle, _) => Objective::Mle,
        (Method::Ve, Some(vset)) => Objective::Ve {
            vset,
            weight_by_counts,
        },
        (Method::Ve, None) => {
            return Err(VeqError::invalid(
                "value-equivalence training needs a function set",
            ))
        }
    };
    let report = train(&mut model, dataset, objective, cfg)?;
    Ok((model, report))
}

/// Plans on `model` with the configured planner; LSTD policy iteration uses
/// `vset` as its features.
pub fn plan(
    model: &FactorizedModel,
    env: &Environment,
    planner: Planner,
    strategy: Strategy,
    vset: Option<&FunctionSet>,
    lstd: &LstdConfig,
    seed: u64,
) -> Result<TabularPolicy> {
    match planner.resolve(strategy) {
        Planner::LstdPi => {
            let features = vset
                .ok_or_else(|| VeqError::invalid("LSTD policy iteration needs a function set"))?;
            let cfg = LstdConfig {
                seed: derive_seed(seed, stage::LSTD),
                ..*lstd
            };
            policy_iteration_lstd(model, features, &cfg, &env.mdp)
        }
        _ => plan_value_iteration(model),
    }
}

/// Full pipeline for one `(method, rank, dim_v, seed)` cell. Errors carry
/// the name of the failing stage.
pub fn run_single_detailed(
    cfg: &ExperimentConfig,
    env: &Environment,
    key: RunKey,
) -> Result<RunArtifacts> {
    let dataset = collect_dataset(&env.mdp, cfg.n_samples, derive_seed(key.seed, stage::DATA))
        .map_err(|e| e.in_stage("collect"))?;
    let vset = build_function_set(env, cfg.strategy, key.dim_v, key.seed)
        .map_err(|e| e.in_stage("function_set"))?;
    let (model, report) = train_model(
        &dataset,
        key.method,
        vset.as_ref(),
        key.rank,
        env.mdp.gamma(),
        key.seed,
        &cfg.train_config(),
        cfg.weight_by_counts,
    )
    .map_err(|e| e.in_stage("train"))?;
    let policy = plan(
        &model,
        env,
        cfg.planner,
        cfg.strategy,
        vset.as_ref(),
        &cfg.lstd,
        key.seed,
    )
    .map_err(|e| e.in_stage("plan"))?;
    let mean_value = evaluate_policy_mean(&env.mdp, &policy).map_err(|e| e.in_stage("evaluate"))?;
    let result = ExperimentResult {
        env: env.spec.kind.to_string(),
        method: key.method,
        strategy: cfg.strategy,
        rank: key.rank,
        dim_v: if cfg.strategy == Strategy::None {
            0
        } else {
            key.dim_v
        },
        seed: key.seed,
        mean_value,
        final_loss: report.final_loss,
        steps: report.steps,
    };
    Ok(RunArtifacts {
        dataset,
        vset,
        model,
        report,
        policy,
        result,
    })
}

pub fn run_single(
    cfg: &ExperimentConfig,
    env: &Environment,
    key: RunKey,
) -> Result<ExperimentResult> {
    Ok(run_single_detailed(cfg, env, key)?.result)
}
