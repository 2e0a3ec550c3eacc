//! Experiment configuration and its flat `key=value` file format.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use super::{Method, Strategy};
use crate::env::{EnvKind, GridSpec};
use crate::error::{Result, VeqError};
use crate::model::{AdamConfig, TrainConfig};
use crate::planning::LstdConfig;

/// Which planner turns a trained model into a policy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Planner {
    /// LSTD policy iteration for the basis strategy, value iteration otherwise.
    Auto,
    ValueIteration,
    LstdPi,
}

impl Planner {
    pub fn resolve(self, strategy: Strategy) -> Planner {
        match (self, strategy) {
            (Planner::Auto, Strategy::Basis) => Planner::LstdPi,
            (Planner::Auto, _) => Planner::ValueIteration,
            (p, _) => p,
        }
    }
}

impl fmt::Display for Planner {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Planner::Auto => "auto",
            Planner::ValueIteration => "value_iteration",
            Planner::LstdPi => "lstd_pi",
        })
    }
}

impl FromStr for Planner {
    type Err = VeqError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auto" => Ok(Planner::Auto),
            "value_iteration" | "vi" => Ok(Planner::ValueIteration),
            "lstd_pi" | "lstd" => Ok(Planner::LstdPi),
            _ => Err(VeqError::invalid(format!("unknown planner '{s}'"))),
        }
    }
}

/// Everything needed to reproduce a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub env: GridSpec,
    pub methods: Vec<Method>,
    pub strategy: Strategy,
    pub ranks: Vec<usize>,
    pub dim_vs: Vec<usize>,
    pub n_samples: usize,
    pub lr: f64,
    pub max_steps: usize,
    pub grad_tol: f64,
    pub seeds: Vec<u64>,
    pub planner: Planner,
    pub lstd: LstdConfig,
    pub weight_by_counts: bool,
    /// Worker threads for sweeps; 0 means one per available core.
    pub jobs: usize,
    pub out: PathBuf,
}

/// Learning rate and step budget used unless overridden. Chosen so a full
/// Catch + Four Rooms sweep fits on one core; see the README.
pub const DEFAULT_LR: f64 = 0.02;
pub const DEFAULT_MAX_STEPS: usize = 1_500;

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            env: GridSpec::catch(),
            methods: vec![Method::Mle, Method::Ve],
            strategy: Strategy::ValuePolytope,
            ranks: vec![10, 25, 50],
            dim_vs: vec![10],
            n_samples: 100_000,
            lr: DEFAULT_LR,
            max_steps: DEFAULT_MAX_STEPS,
            grad_tol: 1e-7,
            seeds: (0..10).collect(),
            planner: Planner::Auto,
            lstd: LstdConfig::default(),
            weight_by_counts: false,
            jobs: 0,
            out: PathBuf::from("results"),
        }
    }
}

fn parse_num<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| VeqError::invalid(format!("{key}: cannot parse '{value}'")))
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value.split(',').map(|v| parse_num(key, v.trim())).collect()
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(VeqError::invalid(format!(
            "{key}: expected true or false, got '{value}'"
        ))),
    }
}

fn join<T: fmt::Display>(items: &[T]) -> String {
    items
        .iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

impl ExperimentConfig {
    /// Consecutive seeds `base, base + 1, ...`.
    pub fn seed_range(base: u64, n: usize) -> Vec<u64> {
        (0..n as u64).map(|i| base.wrapping_add(i)).collect()
    }

    /// Sets one key. Setting `env` resets the grid parameters to that
    /// environment's defaults, so it should come before them.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key {
            "env" => self.env = GridSpec::default_for(value.parse::<EnvKind>()?),
            "width" => self.env.width = parse_num(key, value)?,
            "height" => self.env.height = parse_num(key, value)?,
            "slip_prob" => self.env.slip_prob = parse_num(key, value)?,
            "reward" => self.env.reward_value = parse_num(key, value)?,
            "gamma" => self.env.gamma = parse_num(key, value)?,
            "goal" => self.env.goal = value.parse()?,
            "methods" | "method" => {
                self.methods = value
                    .split(',')
                    .map(|m| m.trim().parse())
                    .collect::<Result<_>>()?
            }
            "strategy" => self.strategy = value.parse()?,
            "ranks" | "rank" => self.ranks = parse_list(key, value)?,
            "dim_v" => self.dim_vs = parse_list(key, value)?,
            "samples" => self.n_samples = parse_num(key, value)?,
            "lr" => self.lr = parse_num(key, value)?,
            "max_steps" => self.max_steps = parse_num(key, value)?,
            "grad_tol" => self.grad_tol = parse_num(key, value)?,
            "seeds" => self.seeds = parse_list(key, value)?,
            "planner" => self.planner = value.parse()?,
            "lstd_samples" => self.lstd.samples_per_policy = parse_num(key, value)?,
            "lstd_iterations" => self.lstd.n_iterations = parse_num(key, value)?,
            "lstd_ridge" => self.lstd.ridge = parse_num(key, value)?,
            "lstd_expected_next_state" => self.lstd.expected_next_state = parse_bool(key, value)?,
            "weight_by_counts" => self.weight_by_counts = parse_bool(key, value)?,
            "jobs" => self.jobs = parse_num(key, value)?,
            "out" => self.out = PathBuf::from(value),
            _ => return Err(VeqError::invalid(format!("unknown key '{key}'"))),
        }
        Ok(())
    }

    /// Parses `key = value` lines; blank lines and `#` comments are skipped.
    /// `origin` only labels errors.
    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |msg: String| VeqError::Parse {
                path: origin.to_path_buf(),
                line: i + 1,
                msg,
            };
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| err("expected key=value".into()))?;
            cfg.set(k.trim(), v).map_err(|e| err(e.to_string()))?;
        }
        cfg.validate().map_err(|e| VeqError::Parse {
            path: origin.to_path_buf(),
            line: 0,
            msg: e.to_string(),
        })?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?, path)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_string())?;
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(VeqError::invalid(msg));
        if self.methods.is_empty()
            || self.ranks.is_empty()
            || self.dim_vs.is_empty()
            || self.seeds.is_empty()
        {
            return bad("methods, ranks, dim_v and seeds must be non-empty");
        }
        if self.ranks.contains(&0) || self.dim_vs.contains(&0) {
            return bad("ranks and dim_v must be positive");
        }
        if self.n_samples == 0 || self.max_steps == 0 {
            return bad("samples and max_steps must be positive");
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) || self.grad_tol < 0.0 {
            return bad("lr must be positive and grad_tol non-negative");
        }
        if !(0.0..1.0).contains(&self.env.gamma) {
            return bad("gamma must lie in [0, 1)");
        }
        if self.lstd.samples_per_policy == 0 || self.lstd.n_iterations == 0 || self.lstd.ridge < 0.0
        {
            return bad("LSTD samples and iterations must be positive and ridge non-negative");
        }
        if self.strategy == Strategy::None && self.methods.contains(&Method::Ve) {
            return bad("strategy none only supports the mle method");
        }
        self.env.validate()
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            adam: AdamConfig {
                lr: self.lr,
                ..AdamConfig::default()
            },
            max_steps: self.max_steps,
            grad_tol: self.grad_tol,
            ..TrainConfig::default()
        }
    }
}

impl fmt::Display for ExperimentConfig {
    /// Serializes every key; parsing the output gives back `self`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let e = &self.env;
        writeln!(f, "env={}", e.kind)?;
        writeln!(f, "width={}", e.width)?;
        writeln!(f, "height={}", e.height)?;
        writeln!(f, "slip_prob={}", e.slip_prob)?;
        writeln!(f, "reward={}", e.reward_value)?;
        writeln!(f, "gamma={}", e.gamma)?;
        writeln!(f, "goal={}", e.goal)?;
        writeln!(f, "methods={}", join(&self.methods))?;
        writeln!(f, "strategy={}", self.strategy)?;
        writeln!(f, "ranks={}", join(&self.ranks))?;
        writeln!(f, "dim_v={}", join(&self.dim_vs))?;
        writeln!(f, "samples={}", self.n_samples)?;
        writeln!(f, "lr={}", self.lr)?;
        writeln!(f, "max_steps={}", self.max_steps)?;
        writeln!(f, "grad_tol={}", self.grad_tol)?;
        writeln!(f, "seeds={}", join(&self.seeds))?;
        writeln!(f, "planner={}", self.planner)?;
        writeln!(f, "lstd_samples={}", self.lstd.samples_per_policy)?;
        writeln!(f, "lstd_iterations={}", self.lstd.n_iterations)?;
        writeln!(f, "lstd_ridge={}", self.lstd.ridge)?;
        writeln!(
            f,
            "lstd_expected_next_state={}",
            self.lstd.expected_next_state
        )?;
        writeln!(f, "weight_by_counts={}", self.weight_by_counts)?;
        writeln!(f, "jobs={}", self.jobs)?;
        writeln!(f, "out={}", self.out.display())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::{any, prop, prop_assert_eq, proptest};

    fn origin() -> &'static Path {
        Path::new("test.cfg")
    }

    #[test]
    fn default_round_trips() {
        let cfg = ExperimentConfig::default();
        assert_eq!(
            ExperimentConfig::parse(&cfg.to_string(), origin()).unwrap(),
            cfg
        );
    }

    #[test]
    fn comments_and_spacing_are_ignored() {
        let cfg = ExperimentConfig::parse(
            "# sweep\n\nenv = four_rooms\n ranks = 5, 7 \nlr=0.1\n",
            origin(),
        )
        .unwrap();
        assert_eq!(cfg.env.kind, EnvKind::FourRooms);
        assert_eq!(cfg.ranks, vec![5, 7]);
        assert_eq!(cfg.lr, 0.1);
    }

    #[test]
    fn errors_name_the_line() {
        let err = ExperimentConfig::parse("lr=0.1\nbogus=3\n", origin()).unwrap_err();
        match err {
            VeqError::Parse { line, .. } => assert_eq!(line, 2),
            e => panic!("unexpected {e}"),
        }
        assert!(ExperimentConfig::parse("ranks=\n", origin()).is_err());
        assert!(ExperimentConfig::parse("seeds=1,x\n", origin()).is_err());
        assert!(ExperimentConfig::parse("strategy=none\n", origin()).is_err());
    }

    #[test]
    fn planner_auto_follows_strategy() {
        assert_eq!(Planner::Auto.resolve(Strategy::Basis), Planner::LstdPi);
        assert_eq!(
            Planner::Auto.resolve(Strategy::ValuePolytope),
            Planner::ValueIteration
        );
        assert_eq!(
            Planner::ValueIteration.resolve(Strategy::Basis),
            Planner::ValueIteration
        );
    }

    proptest! {
        #[test]
        fn random_configs_round_trip(
            kind in 0usize..3,
            ranks in prop::collection::vec(1usize..300, 1..5),
            dims in prop::collection::vec(1usize..60, 1..4),
            seeds in prop::collection::vec(any::<u64>(), 1..6),
            lr in 1e-6f64..1.0,
            gamma in 0.0f64..0.999,
            slip in 0.0f64..1.0,
            ridge in 0.0f64..1e-2,
            flags in any::<(bool, bool)>(),
            steps in 1usize..100_000,
        ) {
            let kinds = [EnvKind::Catch, EnvKind::FourRooms, EnvKind::Toy];
            let mut cfg = ExperimentConfig {
                env: GridSpec::default_for(kinds[kind]),
                ranks,
                dim_vs: dims,
                seeds,
                lr,
                max_steps: steps,
                weight_by_counts: flags.0,
                strategy: Strategy::Basis,
                planner: Planner::LstdPi,
                ..ExperimentConfig::default()
            };
            cfg.env.gamma = gamma;
            cfg.env.slip_prob = slip;
            cfg.lstd.ridge = ridge;
            cfg.lstd.expected_next_state = flags.1;
            let back = ExperimentConfig::parse(&cfg.to_string(), origin()).unwrap();
            prop_assert_eq!(back, cfg);
        }
    }
}
