//! Experience tuples and their sufficient statistics.

use std::fs;
use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;
use rand::Rng as _;

use crate::error::{Result, VeqError};
use crate::mdp::{ModelView, TabularMdp};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub s: usize,
    pub a: usize,
    pub r: f64,
    pub next: usize,
}

/// Transition tuples plus counts `N(s, a, s')`, visits `N(s, a)` and reward
/// sums, from which empirical rows and mean rewards are derived.
#[derive(Debug, Clone)]
pub struct TransitionDataset {
    n_states: usize,
    n_actions: usize,
    tuples: Vec<Transition>,
    /// Per cell `s * n_actions + a`: `(s', N(s, a, s'))` sorted by `s'`.
    counts: Vec<Vec<(usize, u64)>>,
    visits: Vec<u64>,
    reward_sum: Vec<f64>,
}

impl TransitionDataset {
    pub fn from_tuples(n_states: usize, n_actions: usize, tuples: Vec<Transition>) -> Result<Self> {
        let cells = n_states * n_actions;
        let mut counts: Vec<Vec<(usize, u64)>> = vec![Vec::new(); cells];
        let mut visits = vec![0u64; cells];
        let mut reward_sum = vec![0.0; cells];
        for (i, t) in tuples.iter().enumerate() {
            if t.s >= n_states || t.next >= n_states || t.a >= n_actions {
                return Err(VeqError::invalid(format!(
                    "tuple {i} ({}, {}, {}, {}) is out of range for {n_states} states and {n_actions} actions",
                    t.s, t.a, t.r, t.next
                )));
            }
            if !t.r.is_finite() {
                return Err(VeqError::invalid(format!(
                    "tuple {i} has a non-finite reward"
                )));
            }
            let c = t.s * n_actions + t.a;
            visits[c] += 1;
            reward_sum[c] += t.r;
            match counts[c].binary_search_by_key(&t.next, |&(n, _)| n) {
                Ok(pos) => counts[c][pos].1 += 1,
                Err(pos) => counts[c].insert(pos, (t.next, 1)),
            }
        }
        Ok(TransitionDataset {
            n_states,
            n_actions,
            tuples,
            counts,
            visits,
            reward_sum,
        })
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn len(&self) -> usize {
        self.tuples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tuples.is_empty()
    }

    pub fn tuples(&self) -> &[Transition] {
        &self.tuples
    }

    pub fn visits(&self, s: usize, a: usize) -> u64 {
        self.visits[s * self.n_actions + a]
    }

    /// Non-zero next-state counts of `(s, a)`.
    pub fn next_counts(&self, s: usize, a: usize) -> &[(usize, u64)] {
        &self.counts[s * self.n_actions + a]
    }

    pub fn count(&self, s: usize, a: usize, next: usize) -> u64 {
        let row = self.next_counts(s, a);
        row.binary_search_by_key(&next, |&(n, _)| n)
            .map(|i| row[i].1)
            .unwrap_or(0)
    }

    /// Empirical mean reward, `None` for unvisited cells.
    pub fn mean_reward(&self, s: usize, a: usize) -> Option<f64> {
        let n = self.visits(s, a);
        (n > 0).then(|| self.reward_sum[s * self.n_actions + a] / n as f64)
    }

    /// Empirical next-state distribution as sparse `(s', p)` pairs, `None`
    /// for unvisited cells.
    pub fn empirical_row(&self, s: usize, a: usize) -> Option<Vec<(usize, f64)>> {
        let n = self.visits(s, a);
        (n > 0).then(|| {
            self.next_counts(s, a)
                .iter()
                .map(|&(t, c)| (t, c as f64 / n as f64))
                .collect()
        })
    }

    /// Dense empirical transition matrix of action `a`; unvisited rows are zero.
    pub fn empirical_transition(&self, a: usize) -> DMatrix<f64> {
        let mut p = DMatrix::zeros(self.n_states, self.n_states);
        for s in 0..self.n_states {
            if let Some(row) = self.empirical_row(s, a) {
                for (t, q) in row {
                    p[(s, t)] = q;
                }
            }
        }
        p
    }

    /// States visited with action `a`.
    pub fn visited_states(&self, a: usize) -> Vec<usize> {
        (0..self.n_states)
            .filter(|&s| self.visits(s, a) > 0)
            .collect()
    }

    /// Writes `s,a,r,s_next` rows.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = std::io::BufWriter::new(fs::File::create(path)?);
        writeln!(out, "s,a,r,s_next")?;
        for t in &self.tuples {
            writeln!(out, "{},{},{},{}", t.s, t.a, t.r, t.next)?;
        }
        out.flush()?;
        Ok(())
    }

    /// Reads a dataset written by [`write_csv`](Self::write_csv), validating
    /// indices against the given dimensions.
    pub fn read_csv(path: &Path, n_states: usize, n_actions: usize) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let parse_err = |line: usize, msg: String| VeqError::Parse {
            path: path.to_path_buf(),
            line,
            msg,
        };
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, h)) if h.trim() == "s,a,r,s_next" => {}
            _ => return Err(parse_err(1, "expected header 's,a,r,s_next'".into())),
        }
        let mut tuples = Vec::new();
        for (i, line) in lines {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 4 {
                return Err(parse_err(
                    i + 1,
                    format!("expected 4 fields, found {}", fields.len()),
                ));
            }
            let idx = |f: &str| {
                f.trim()
                    .parse::<usize>()
                    .map_err(|e| parse_err(i + 1, e.to_string()))
            };
            let t = Transition {
                s: idx(fields[0])?,
                a: idx(fields[1])?,
                r: fields[2]
                    .trim()
                    .parse()
                    .map_err(|e: std::num::ParseFloatError| parse_err(i + 1, e.to_string()))?,
                next: idx(fields[3])?,
            };
            tuples.push(t);
        }
        Self::from_tuples(n_states, n_actions, tuples).map_err(|e| parse_err(0, e.to_string()))
    }
}

/// Rolls a single uniform-random-policy trajectory of `n_samples` steps from
/// the start distribution.
pub fn collect_dataset(mdp: &TabularMdp, n_samples: usize, seed: u64) -> Result<TransitionDataset> {
    if n_samples == 0 {
        return Err(VeqError::invalid("a dataset needs at least one sample"));
    }
    let mut rng = rng::seeded(seed);
    let mut s = mdp.sample_start(&mut rng);
    let mut tuples = Vec::with_capacity(n_samples);
    for _ in 0..n_samples {
        let a = rng.random_range(0..mdp.n_actions());
        let (r, next) = mdp.step(s, a, &mut rng);
        tuples.push(Transition { s, a, r, next });
        s = next;
    }
    TransitionDataset::from_tuples(mdp.n_states(), mdp.n_actions(), tuples)
}
