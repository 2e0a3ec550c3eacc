//! Sets of value functions used as the target set of value-equivalence
//! training: state-aggregation indicator bases and sampled policy values.

use std::fs;
use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::Rng as _;

use crate::error::{Result, VeqError};
use crate::mdp::{
    evaluate_exact, sample_deterministic_policies, ModelView, TabularMdp, ValueFunction,
};
use crate::rng::{self, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FunctionSetKind {
    /// 0/1 indicators of a state partition.
    AggregationBasis,
    /// Exact values of sampled deterministic policies.
    ValuePolytope,
    Custom,
}

/// Columns of `basis` (`n_states x d`) are the functions of the set.
#[derive(Debug, Clone, PartialEq)]
pub struct FunctionSet {
    basis: DMatrix<f64>,
    kind: FunctionSetKind,
    /// Cluster of every state, for aggregation bases.
    assignment: Option<Vec<usize>>,
    /// Greedy actions of the source policies, for polytope sets.
    policies: Option<Vec<Vec<usize>>>,
}

impl FunctionSet {
    pub fn new(basis: DMatrix<f64>) -> Result<Self> {
        if basis.ncols() == 0 || basis.nrows() == 0 {
            return Err(VeqError::invalid(
                "function set must contain at least one function",
            ));
        }
        if basis.iter().any(|x| !x.is_finite()) {
            return Err(VeqError::invalid("function set has non-finite entries"));
        }
        Ok(FunctionSet {
            basis,
            kind: FunctionSetKind::Custom,
            assignment: None,
            policies: None,
        })
    }

    pub fn from_columns(columns: &[ValueFunction]) -> Result<Self> {
        if columns.is_empty() {
            return Err(VeqError::invalid(
                "function set must contain at least one function",
            ));
        }
        let cols: Vec<DVector<f64>> = columns.iter().map(|c| c.0.clone()).collect();
        Self::new(DMatrix::from_columns(&cols))
    }

    /// Indicator basis of a partition with `d` parts; every part must be non-empty.
    pub fn from_partition(assignment: Vec<usize>, d: usize) -> Result<Self> {
        let mut basis = DMatrix::zeros(assignment.len(), d);
        for (s, &c) in assignment.iter().enumerate() {
            if c >= d {
                return Err(VeqError::invalid(format!(
                    "state {s} assigned to cluster {c} of {d}"
                )));
            }
            basis[(s, c)] = 1.0;
        }
        if let Some(j) = (0..d).find(|&j| basis.column(j).sum() == 0.0) {
            return Err(VeqError::invalid(format!("cluster {j} is empty")));
        }
        let mut set = Self::new(basis)?;
        set.kind = FunctionSetKind::AggregationBasis;
        set.assignment = Some(assignment);
        Ok(set)
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    pub fn kind(&self) -> FunctionSetKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn n_states(&self) -> usize {
        self.basis.nrows()
    }

    pub fn column(&self, j: usize) -> ValueFunction {
        ValueFunction(self.basis.column(j).into_owned())
    }

    pub fn assignment(&self) -> Option<&[usize]> {
        self.assignment.as_deref()
    }

    pub fn source_policies(&self) -> Option<&[Vec<usize>]> {
        self.policies.as_deref()
    }

    /// `sum_j coeffs[j] * column_j`.
    pub fn combine(&self, coeffs: &DVector<f64>) -> ValueFunction {
        ValueFunction(&self.basis * coeffs)
    }

    /// Set with a subset of the columns, in the given order.
    pub fn select(&self, columns: &[usize]) -> Result<Self> {
        let cols: Vec<ValueFunction> = columns.iter().map(|&j| self.column(j)).collect();
        Self::from_columns(&cols)
    }

    /// Writes `state,phi_0,...,phi_{d-1}`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = std::io::BufWriter::new(fs::File::create(path)?);
        let header: Vec<String> = (0..self.dim()).map(|j| format!("phi_{j}")).collect();
        writeln!(out, "state,{}", header.join(","))?;
        for s in 0..self.n_states() {
            let row: Vec<String> = self.basis.row(s).iter().map(|x| x.to_string()).collect();
            writeln!(out, "{s},{}", row.join(","))?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let err = |line: usize, msg: &str| VeqError::Parse {
            path: path.to_path_buf(),
            line,
            msg: msg.to_string(),
        };
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| err(1, "empty file"))?;
        let d = header.split(',').count().saturating_sub(1);
        let mut values = Vec::new();
        let mut n = 0;
        for (i, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != d + 1 || fields[0].trim().parse::<usize>() != Ok(n) {
                return Err(err(i + 2, "malformed row"));
            }
            for f in &fields[1..] {
                values.push(
                    f.trim()
                        .parse::<f64>()
                        .map_err(|_| err(i + 2, "bad number"))?,
                );
            }
            n += 1;
        }
        Self::new(DMatrix::from_row_slice(n, d, &values))
    }
}

/// Output of [`kmeans`].
#[derive(Debug, Clone)]
pub struct KMeans {
    pub centers: Vec<Vec<f64>>,
    pub assignment: Vec<usize>,
    /// Sum of squared distances after each assignment step.
    pub objective: Vec<f64>,
}

pub const KMEANS_MAX_ITERS: usize = 100;

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(p: &[f64], centers: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, c) in centers.iter().enumerate() {
        let d = sq_dist(p, c);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

fn count_distinct(points: &[Vec<f64>]) -> usize {
    let mut keys: Vec<Vec<u64>> = points
        .iter()
        .map(|p| p.iter().map(|x| x.to_bits()).collect())
        .collect();
    keys.sort();
    keys.dedup();
    keys.len()
}

/// k-means++ seeding: first center uniform, then proportional to squared
/// distance to the nearest chosen center.
pub fn kmeans_plus_plus(points: &[Vec<f64>], k: usize, rng: &mut Rng) -> Vec<Vec<f64>> {
    let mut centers = vec![points[rng.random_range(0..points.len())].clone()];
    let mut dist: Vec<f64> = points.iter().map(|p| sq_dist(p, &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = dist.iter().sum();
        let u = rng.random::<f64>() * total;
        let mut acc = 0.0;
        let mut pick = dist.iter().rposition(|&d| d > 0.0).unwrap_or(0);
        for (i, &d) in dist.iter().enumerate() {
            acc += d;
            if d > 0.0 && u < acc {
                pick = i;
                break;
            }
        }
        centers.push(points[pick].clone());
        for (d, p) in dist.iter_mut().zip(points) {
            *d = d.min(sq_dist(p, &centers[centers.len() - 1]));
        }
    }
    centers
}

/// Lloyd's k-means with k-means++ seeding. Stops when assignments stop
/// changing or after [`KMEANS_MAX_ITERS`] iterations. Empty clusters are
/// re-seeded at the point farthest from its center.
pub fn kmeans(points: &[Vec<f64>], k: usize, seed: u64) -> Result<KMeans> {
    if k == 0 {
        return Err(VeqError::invalid("k-means needs at least one cluster"));
    }
    let distinct = count_distinct(points);
    if k > distinct {
        return Err(VeqError::invalid(format!(
            "{k} clusters requested but only {distinct} distinct points"
        )));
    }
    let mut rng = rng::seeded(seed);
    let mut centers = kmeans_plus_plus(points, k, &mut rng);
    let mut assignment: Vec<usize> = Vec::new();
    let mut objective = Vec::new();

    for _ in 0..KMEANS_MAX_ITERS {
        let (next, obj): (Vec<usize>, f64) = {
            let mut obj = 0.0;
            let a = points
                .iter()
                .map(|p| {
                    let (j, d) = nearest(p, &centers);
                    obj += d;
                    j
                })
                .collect();
            (a, obj)
        };
        objective.push(obj);
        let stable = next == assignment;
        assignment = next;
        if stable {
            break;
        }
        update_centers(points, &assignment, &mut centers);
    }

    // Final repair pass so every cluster owns at least one point.
    for _ in 0..k {
        let mut sizes = vec![0usize; k];
        for &j in &assignment {
            sizes[j] += 1;
        }
        let Some(empty) = sizes.iter().position(|&n| n == 0) else {
            break;
        };
        let far = farthest_point(points, &assignment, &centers, &sizes);
        centers[empty] = points[far].clone();
        assignment = points.iter().map(|p| nearest(p, &centers).0).collect();
    }
    let mut sizes = vec![0usize; k];
    for &j in &assignment {
        sizes[j] += 1;
    }
    if sizes.contains(&0) {
        return Err(VeqError::invalid("k-means left an empty cluster"));
    }
    Ok(KMeans {
        centers,
        assignment,
        objective,
    })
}

fn farthest_point(
    points: &[Vec<f64>],
    assignment: &[usize],
    centers: &[Vec<f64>],
    sizes: &[usize],
) -> usize {
    let mut best = (0, -1.0);
    for (i, p) in points.iter().enumerate() {
        let j = assignment[i];
        if sizes[j] < 2 {
            continue;
        }
        let d = sq_dist(p, &centers[j]);
        if d > best.1 {
            best = (i, d);
        }
    }
    best.0
}

fn update_centers(points: &[Vec<f64>], assignment: &[usize], centers: &mut [Vec<f64>]) {
    let k = centers.len();
    let dim = points[0].len();
    let mut sums = vec![vec![0.0; dim]; k];
    let mut sizes = vec![0usize; k];
    for (p, &j) in points.iter().zip(assignment) {
        sizes[j] += 1;
        for (s, x) in sums[j].iter_mut().zip(p) {
            *s += x;
        }
    }
    for j in 0..k {
        if sizes[j] > 0 {
            centers[j] = sums[j].iter().map(|s| s / sizes[j] as f64).collect();
        }
    }
    while let Some(empty) = sizes.iter().position(|&n| n == 0) {
        let far = farthest_point(points, assignment, centers, &sizes);
        centers[empty] = points[far].clone();
        sizes[empty] = 1;
        sizes[assignment[far]] -= 1;
    }
}

/// State-aggregation basis from k-means over the per-state coordinates.
pub fn kmeans_aggregation(coords: &[Vec<f64>], d: usize, seed: u64) -> Result<FunctionSet> {
    let km = kmeans(coords, d, seed)?;
    FunctionSet::from_partition(km.assignment, d)
}

/// Exact values, on the true MDP, of `n_policies` sampled deterministic policies.
pub fn value_polytope_set(mdp: &TabularMdp, n_policies: usize, seed: u64) -> Result<FunctionSet> {
    if n_policies == 0 {
        return Err(VeqError::invalid("need at least one policy"));
    }
    let policies = sample_deterministic_policies(n_policies, mdp.n_states(), mdp.n_actions(), seed);
    let values = policies
        .iter()
        .map(|pi| evaluate_exact(mdp, pi))
        .collect::<Result<Vec<_>>>()?;
    let mut set = FunctionSet::from_columns(&values)?;
    set.kind = FunctionSetKind::ValuePolytope;
    set.policies = Some(policies.iter().map(|p| p.greedy_actions()).collect());
    Ok(set)
}

/// A random element of `span(V)` with its coefficients.
#[derive(Debug, Clone)]
pub struct SpanElement {
    pub coeffs: DVector<f64>,
    pub value: ValueFunction,
}

/// Random linear combinations of the set's columns, coefficients uniform in `[-1, 1]`.
pub fn span_probe(vset: &FunctionSet, n_combos: usize, seed: u64) -> Vec<SpanElement> {
    let mut rng = rng::seeded(seed);
    (0..n_combos)
        .map(|_| {
            let coeffs = DVector::from_fn(vset.dim(), |_, _| rng.random_range(-1.0..=1.0));
            let value = vset.combine(&coeffs);
            SpanElement { coeffs, value }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{build_toy_mdp, Environment, GridSpec};
    use crate::linalg;
    use crate::mdp::{bellman_apply, TabularPolicy};
    use proptest::prelude::*;

    #[test]
    fn full_k_gives_identity_partition() {
        let coords: Vec<Vec<f64>> = (0..7).map(|i| vec![i as f64, (i * i) as f64]).collect();
        let set = kmeans_aggregation(&coords, 7, 1).unwrap();
        let mut cols: Vec<usize> = (0..7).map(|s| set.assignment().unwrap()[s]).collect();
        cols.sort();
        cols.dedup();
        assert_eq!(cols.len(), 7);
    }

    #[test]
    fn single_cluster_is_constant() {
        let coords: Vec<Vec<f64>> = (0..5).map(|i| vec![i as f64]).collect();
        let set = kmeans_aggregation(&coords, 1, 3).unwrap();
        assert!(set.basis().iter().all(|&x| x == 1.0));
    }

    #[test]
    fn too_many_clusters_is_an_error() {
        let coords = vec![vec![0.0], vec![0.0], vec![1.0]];
        assert!(kmeans_aggregation(&coords, 3, 0).is_err());
    }

    #[test]
    fn four_rooms_partition_is_seeded_and_non_empty() {
        let env = Environment::build(&GridSpec::four_rooms()).unwrap();
        let a = kmeans_aggregation(&env.coords, 10, 42).unwrap();
        let b = kmeans_aggregation(&env.coords, 10, 42).unwrap();
        assert_eq!(a, b);
        for j in 0..10 {
            assert!(a.basis().column(j).sum() >= 1.0);
        }
        for s in 0..env.n_states() {
            assert_eq!(a.basis().row(s).sum(), 1.0);
        }
    }

    #[test]
    fn polytope_columns_are_fixed_points() {
        let mdp = build_toy_mdp();
        let set = value_polytope_set(&mdp, 10, 5).unwrap();
        for (j, acts) in set.source_policies().unwrap().iter().enumerate() {
            let pi = TabularPolicy::deterministic(acts, 2);
            let v = set.column(j);
            assert!(bellman_apply(&mdp, &pi, &v).unwrap().max_diff(&v) < 1e-9);
            // Values of the toy MDP live in {[x, y, y]}.
            assert!((v[1] - v[2]).abs() < 1e-12);
        }
        assert!(linalg::rank(set.basis()) <= 2);
    }

    #[test]
    fn single_action_polytope_is_the_policy_value() {
        let mdp = crate::env::build_toy_variant(&[[0.5, 0.25, 0.25]], 0.9).unwrap();
        let set = value_polytope_set(&mdp, 1, 0).unwrap();
        let v = evaluate_exact(&mdp, &TabularPolicy::uniform(3, 1)).unwrap();
        assert!(set.column(0).max_diff(&v) < 1e-14);
    }

    #[test]
    fn span_probe_edge_cases() {
        let set =
            kmeans_aggregation(&(0..6).map(|i| vec![i as f64]).collect::<Vec<_>>(), 3, 2).unwrap();
        assert_eq!(set.combine(&DVector::zeros(3)).amax(), 0.0);
        let mut e1 = DVector::zeros(3);
        e1[1] = 1.0;
        assert_eq!(set.combine(&e1), set.column(1));
        let assignment = set.assignment().unwrap().to_vec();
        for el in span_probe(&set, 10, 9) {
            for s in 0..6 {
                assert_eq!(el.value[s], el.coeffs[assignment[s]]);
            }
            assert!(el.coeffs.iter().all(|c| (-1.0..=1.0).contains(c)));
        }
    }

    #[test]
    fn csv_round_trip() {
        let set = value_polytope_set(&build_toy_mdp(), 4, 1).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("v.csv");
        set.write_csv(&path).unwrap();
        let back = FunctionSet::read_csv(&path).unwrap();
        assert_eq!(back.basis(), set.basis());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]

        #[test]
        fn kmeans_objective_never_increases(seed in 0u64..5000, k in 1usize..12) {
            let mut rng = rng::seeded(seed);
            let pts: Vec<Vec<f64>> = (0..60).map(|_| vec![rng.random_range(0.0..10.0), rng.random_range(0.0..10.0)]).collect();
            let km = kmeans(&pts, k, seed).unwrap();
            for w in km.objective.windows(2) {
                prop_assert!(w[1] <= w[0] + 1e-9);
            }
            let set = FunctionSet::from_partition(km.assignment, k).unwrap();
            for s in 0..60 {
                prop_assert_eq!(set.basis().row(s).sum(), 1.0);
            }
        }
    }
}
