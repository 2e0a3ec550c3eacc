//! Shared fixtures for the criterion benchmarks.

use veq_core::env::{collect_dataset, Environment, GridSpec, TransitionDataset};
use veq_core::function_set::{value_polytope_set, FunctionSet};
use veq_core::Result;

/// Catch at its default size with a uniform-policy dataset and a
/// value-polytope function set.
pub struct Fixture {
    pub env: Environment,
    pub dataset: TransitionDataset,
    pub vset: FunctionSet,
}

pub fn catch_fixture(samples: usize, dim_v: usize, seed: u64) -> Result<Fixture> {
    let env = Environment::build(&GridSpec::catch())?;
    let dataset = collect_dataset(&env.mdp, samples, seed)?;
    let vset = value_polytope_set(&env.mdp, dim_v, seed)?;
    Ok(Fixture { env, dataset, vset })
}
