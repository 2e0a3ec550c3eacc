//! Numerical checks of the structural results on value equivalence.
//!
//! Every check returns a [`CheckReport`] with the measured quantities and a
//! pass flag, so the CLI can print a table and tests can assert on it.

mod examples;
mod linear;
mod lstd;
mod one_dof;
mod properties;

use std::fmt;

pub use examples::{
    approx_ve_example, check_approx_ve_example, check_exact_ve_example, check_mle_counterexample,
    check_planning_equivalence, check_toy_closure, ve_residual, ApproxExample, TABLE_MLE, TABLE_VE,
};
pub use linear::{
    check_dimension_bound, check_rank_identity, independent_policies, stack_policies,
    stack_transitions, LinearVeSystem,
};
pub use lstd::check_lstd_oracle;
pub use one_dof::{
    fit_chain_mle_gradient, fit_chain_ve_gradient, fit_projected, fit_toy_mle_gradient,
    fit_toy_ve_gradient, toy_mle_loss, toy_ve_loss, ChainOneDof, ProjectedAdam, ToyOneDof,
};
pub use properties::{
    check_monotonicity_properties, check_span_property, grid_residual, grid_theta,
    transition_residual, ve_set, GRID_STEPS, MEMBERSHIP_TOL,
};

use crate::model::gradcheck::gradient_suite;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckReport {
    pub name: &'static str,
    pub passed: bool,
    pub metrics: Vec<(String, f64)>,
    pub failures: Vec<String>,
}

impl CheckReport {
    pub fn new(name: &'static str) -> Self {
        CheckReport {
            name,
            passed: true,
            metrics: Vec::new(),
            failures: Vec::new(),
        }
    }

    pub fn metric(&mut self, key: &str, value: f64) {
        self.metrics.push((key.to_string(), value));
    }

    pub fn require(&mut self, ok: bool, msg: &str) {
        if !ok {
            self.passed = false;
            self.failures.push(msg.to_string());
        }
    }

    pub fn get(&self, key: &str) -> Option<f64> {
        self.metrics.iter().find(|(k, _)| k == key).map(|m| m.1)
    }
}

impl fmt::Display for CheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:<26} {}",
            self.name,
            if self.passed { "PASS" } else { "FAIL" }
        )?;
        for (k, v) in &self.metrics {
            write!(f, "  {k}={v:.4e}")?;
        }
        for msg in &self.failures {
            write!(f, "  [{msg}]")?;
        }
        Ok(())
    }
}

/// Finite-difference check of both loss gradients at ten random points.
pub fn check_gradients(seed: u64, fault: bool) -> CheckReport {
    let mut report = CheckReport::new("gradients");
    match gradient_suite(seed, 10, fault) {
        Ok(s) => {
            report.metric("mle_max_rel_err", s.mle_max_rel_err);
            report.metric("ve_max_rel_err", s.ve_max_rel_err);
            report.require(
                s.mle_max_rel_err < 1e-4,
                "MLE gradient disagrees with finite differences",
            );
            report.require(
                s.ve_max_rel_err < 1e-4,
                "VE gradient disagrees with finite differences",
            );
        }
        Err(e) => report.require(false, &e.to_string()),
    }
    report
}

/// Every check with its default size. `fault` corrupts the analytic
/// gradients seen by the gradient check.
pub fn verify_all(seed: u64, fault: bool) -> Vec<CheckReport> {
    let seeds: Vec<u64> = (0..10).map(|i| seed.wrapping_add(i)).collect();
    vec![
        check_gradients(seed, fault),
        check_rank_identity(100, seed),
        check_dimension_bound(3, 2, seed),
        check_dimension_bound(5, 3, seed),
        check_mle_counterexample(4, 20, seed),
        check_toy_closure(50, seed),
        check_exact_ve_example(seed),
        check_approx_ve_example(100_000, &seeds),
        check_monotonicity_properties(20, seed),
        check_planning_equivalence(200, seed),
        check_span_property(seed),
        check_lstd_oracle(50, 200_000, seed),
    ]
}
