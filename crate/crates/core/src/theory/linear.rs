//! The value-equivalence constraints as a linear system in the flattened
//! transition model, and the rank identity behind its dimension count.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng as _;

use super::CheckReport;
use crate::error::{Result, VeqError};
use crate::linalg;
use crate::mdp::{ModelView, TabularPolicy};
use crate::rng::{self, Rng};

/// `Pi_hat (P_model - P) V = 0` written as `D vec(P_model - P) = 0` with
/// `D = V^T (x) Pi_hat` (column-major `vec`).
#[derive(Debug, Clone)]
pub struct LinearVeSystem {
    /// `m|S| x |S||A|`; row `i|S| + s` holds `pi_i(a|s)` at column `a|S| + s`.
    pub pi_hat: DMatrix<f64>,
    /// `|S| x d`.
    pub basis: DMatrix<f64>,
    pub constraint: DMatrix<f64>,
}

impl LinearVeSystem {
    pub fn new(policies: &[TabularPolicy], basis: DMatrix<f64>, n_actions: usize) -> Result<Self> {
        let n = basis.nrows();
        if policies
            .iter()
            .any(|p| p.n_states() != n || p.n_actions() != n_actions)
        {
            return Err(VeqError::dim("policy shapes do not match the basis"));
        }
        let pi_hat = stack_policies(policies, n, n_actions);
        let constraint = basis.transpose().kronecker(&pi_hat);
        Ok(LinearVeSystem {
            pi_hat,
            basis,
            constraint,
        })
    }

    /// Dimension of the space of model perturbations that keep every
    /// constraint satisfied, ignoring the row-sum constraints.
    pub fn nullity(&self) -> usize {
        linalg::nullity(&self.constraint)
    }
}

pub fn stack_policies(
    policies: &[TabularPolicy],
    n_states: usize,
    n_actions: usize,
) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(policies.len() * n_states, n_states * n_actions);
    for (i, pi) in policies.iter().enumerate() {
        for s in 0..n_states {
            for a in 0..n_actions {
                m[(i * n_states + s, a * n_states + s)] = pi.prob(s, a);
            }
        }
    }
    m
}

/// `|S||A| x |S|` block matrix with row `a|S| + s` equal to `P^a(s, .)`.
pub fn stack_transitions<M: ModelView + ?Sized>(view: &M) -> DMatrix<f64> {
    let (n, m) = (view.n_states(), view.n_actions());
    DMatrix::from_fn(n * m, n, |r, t| view.transitions()[r / n][(r % n, t)])
}

fn random_with_rank(rows: usize, cols: usize, rank: usize, rng: &mut Rng) -> DMatrix<f64> {
    let left = DMatrix::from_fn(rows, rank, |_, _| rng.random_range(-1.0..1.0));
    let right = DMatrix::from_fn(rank, cols, |_, _| rng.random_range(-1.0..1.0));
    left * right
}

/// Random `A` and `C` of prescribed ranks: checks
/// `rank(A (x) C) = rank(A) rank(C)` and the matching nullity.
pub fn check_rank_identity(trials: usize, seed: u64) -> CheckReport {
    let mut report = CheckReport::new("rank_identity");
    let mut rng = rng::stream(seed, 21);
    let mut mismatches = 0;
    for _ in 0..trials {
        let (k, n, m, l) = (
            rng.random_range(1..=4),
            rng.random_range(1..=4),
            rng.random_range(1..=4),
            rng.random_range(1..=4),
        );
        let ra = rng.random_range(0..=k.min(n));
        let rc = rng.random_range(0..=m.min(l));
        let a = random_with_rank(k, n, ra, &mut rng);
        let c = random_with_rank(m, l, rc, &mut rng);
        let d = a.kronecker(&c);
        let (rank_a, rank_c, rank_d) = (linalg::rank(&a), linalg::rank(&c), linalg::rank(&d));
        if rank_a != ra
            || rank_c != rc
            || rank_d != rank_a * rank_c
            || linalg::nullity(&d) != n * l - ra * rc
        {
            mismatches += 1;
        }
    }
    report.metric("trials", trials as f64);
    report.metric("mismatches", mismatches as f64);
    report.require(
        mismatches == 0,
        "rank(A (x) C) differed from rank(A) rank(C)",
    );
    report
}

/// `m` deterministic policies choosing pairwise distinct actions in every
/// state, hence pointwise linearly independent.
pub fn independent_policies(
    n_states: usize,
    n_actions: usize,
    m: usize,
    rng: &mut Rng,
) -> Vec<TabularPolicy> {
    let mut actions = vec![Vec::with_capacity(n_states); m];
    for _ in 0..n_states {
        let mut perm: Vec<usize> = (0..n_actions).collect();
        perm.shuffle(rng);
        for (i, acts) in actions.iter_mut().enumerate() {
            acts.push(perm[i]);
        }
    }
    actions
        .iter()
        .map(|a| TabularPolicy::deterministic(a, n_actions))
        .collect()
}

const MAX_RESAMPLES: usize = 20;

fn independent_basis(n_states: usize, k: usize, rng: &mut Rng) -> Result<DMatrix<f64>> {
    for _ in 0..MAX_RESAMPLES {
        let v = DMatrix::from_fn(n_states, k, |_, _| rng.random_range(-1.0..1.0));
        if linalg::rank(&v) == k {
            return Ok(v);
        }
    }
    Err(VeqError::invalid(
        "could not draw linearly independent value functions",
    ))
}

/// Nullity of the system for every `m <= |A|` and `k <= |S|`, compared with
/// `|S|^2 |A| - |S| m k` and with the bound `|S| (|S||A| - m k)`.
pub fn check_dimension_bound(n_states: usize, n_actions: usize, seed: u64) -> CheckReport {
    let mut report = CheckReport::new("dimension_bound");
    let mut rng = rng::stream(seed, 22);
    let full = n_states * n_states * n_actions;
    let mut worst_gap = 0usize;
    let mut pinned = usize::MAX;
    for m in 0..=n_actions {
        for k in 0..=n_states {
            let policies = independent_policies(n_states, n_actions, m, &mut rng);
            let basis = match independent_basis(n_states, k, &mut rng) {
                Ok(b) => b,
                Err(e) => {
                    report.require(false, &e.to_string());
                    return report;
                }
            };
            let sys = LinearVeSystem::new(&policies, basis, n_actions).expect("shapes agree");
            let nullity = sys.nullity();
            let expected = full - n_states * m * k;
            let bound = n_states * (n_states * n_actions - m * k);
            worst_gap = worst_gap.max(nullity.abs_diff(expected));
            report.require(
                nullity <= bound,
                &format!("m={m} k={k}: nullity {nullity} above bound {bound}"),
            );
            if m == n_actions && k == n_states {
                pinned = nullity;
            }
        }
    }
    report.metric("states", n_states as f64);
    report.metric("actions", n_actions as f64);
    report.metric("max_nullity_gap", worst_gap as f64);
    report.metric("nullity_full_span", pinned as f64);
    report.require(worst_gap == 0, "nullity differed from |S|^2|A| - |S|mk");
    report.require(
        pinned == 0,
        "full policy and value span left the model free",
    );
    report
}
