//! Function-set builders checked against independent reference computations.

use proptest::prelude::{prop, prop_assert, prop_assert_eq, proptest, ProptestConfig};

use veq_core::env::{Environment, GridSpec};
use veq_core::function_set::{kmeans, kmeans_aggregation, value_polytope_set};
use veq_core::mdp::{random_mdp, ModelView};

fn sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn partition_cost(points: &[Vec<f64>], labels: &[usize], k: usize) -> f64 {
    let dim = points[0].len();
    let mut cost = 0.0;
    for j in 0..k {
        let members: Vec<&Vec<f64>> = points
            .iter()
            .zip(labels)
            .filter(|(_, &l)| l == j)
            .map(|(p, _)| p)
            .collect();
        if members.is_empty() {
            return f64::INFINITY;
        }
        let mean: Vec<f64> = (0..dim)
            .map(|c| members.iter().map(|p| p[c]).sum::<f64>() / members.len() as f64)
            .collect();
        cost += members.iter().map(|p| sq(p, &mean)).sum::<f64>();
    }
    cost
}

/// Minimum within-cluster cost over every labelling.
fn brute_force_optimum(points: &[Vec<f64>], k: usize) -> f64 {
    let n = points.len();
    let mut labels = vec![0usize; n];
    let mut best = f64::INFINITY;
    loop {
        best = best.min(partition_cost(points, &labels, k));
        let mut i = 0;
        while i < n {
            labels[i] += 1;
            if labels[i] < k {
                break;
            }
            labels[i] = 0;
            i += 1;
        }
        if i == n {
            return best;
        }
    }
}

#[test]
fn separated_blobs_reach_the_global_optimum() {
    let points: Vec<Vec<f64>> = [
        (0.0, 0.0),
        (0.2, 0.1),
        (10.0, 0.0),
        (10.1, 0.3),
        (0.0, 9.0),
        (0.4, 9.2),
        (0.1, 8.8),
    ]
    .iter()
    .map(|&(x, y)| vec![x, y])
    .collect();
    let best = brute_force_optimum(&points, 3);
    for seed in 0..10 {
        let km = kmeans(&points, 3, seed).unwrap();
        let got = partition_cost(&points, &km.assignment, 3);
        assert!((got - best).abs() < 1e-9, "seed {seed}: {got} vs {best}");
    }
}

#[test]
fn value_polytope_columns_solve_their_bellman_equations() {
    let mdp = random_mdp(7, 3, 0.8, 21);
    let set = value_polytope_set(&mdp, 6, 4).unwrap();
    let policies = set.source_policies().unwrap();
    let (r, p, g) = (mdp.rewards(), mdp.transitions(), mdp.gamma());
    for (j, actions) in policies.iter().enumerate() {
        // Plain fixed-point iteration, independent of the library's solver.
        let mut v = vec![0.0; 7];
        for _ in 0..400 {
            v = (0..7)
                .map(|s| {
                    let a = actions[s];
                    r[(s, a)] + g * (0..7).map(|t| p[a][(s, t)] * v[t]).sum::<f64>()
                })
                .collect();
        }
        let col = set.column(j);
        for (s, (got, want)) in col.0.iter().zip(&v).enumerate() {
            assert!((got - want).abs() < 1e-9, "policy {j} state {s}");
        }
    }
}

#[test]
fn four_rooms_aggregation_groups_nearby_cells() {
    let env = Environment::build(&GridSpec::four_rooms()).unwrap();
    let set = kmeans_aggregation(&env.coords, 20, 3).unwrap();
    let labels = set.assignment().unwrap();
    // Each cell sits at least as close to its own cluster mean as to any other.
    let mut means = vec![vec![0.0; 2]; 20];
    let mut sizes = vec![0.0; 20];
    for (c, &l) in env.coords.iter().zip(labels) {
        sizes[l] += 1.0;
        means[l][0] += c[0];
        means[l][1] += c[1];
    }
    for (m, n) in means.iter_mut().zip(&sizes) {
        m[0] /= n;
        m[1] /= n;
    }
    for (c, &l) in env.coords.iter().zip(labels) {
        let own = sq(c, &means[l]);
        assert!(means.iter().all(|m| own <= sq(c, m) + 1e-9));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn kmeans_never_beats_the_optimum_and_is_a_partition(
        pts in prop::collection::vec((0i32..6, 0i32..6), 4..8),
        k in 1usize..4,
        seed in 0u64..1000,
    ) {
        let points: Vec<Vec<f64>> = pts.iter().map(|&(x, y)| vec![x as f64, y as f64]).collect();
        let mut distinct = points.clone();
        distinct.sort_by(|a, b| a.partial_cmp(b).unwrap());
        distinct.dedup();
        if k > distinct.len() {
            prop_assert!(kmeans(&points, k, seed).is_err());
            return Ok(());
        }
        let km = kmeans(&points, k, seed).unwrap();
        prop_assert_eq!(km.assignment.len(), points.len());
        for j in 0..k {
            prop_assert!(km.assignment.contains(&j), "cluster {} empty", j);
        }
        let cost = partition_cost(&points, &km.assignment, k);
        prop_assert!(cost + 1e-9 >= brute_force_optimum(&points, k));
        prop_assert_eq!(&km.assignment, &kmeans(&points, k, seed).unwrap().assignment);
    }
}
