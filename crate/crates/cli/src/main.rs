use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use veq_core::env::{collect_dataset, Environment, TransitionDataset};
use veq_core::experiment::{
    build_function_set, format_sig, plan, run_single, run_sweep, train_model, write_sweep_outputs,
    ExperimentConfig, Method, RunKey, RESULTS_HEADER,
};
use veq_core::mdp::ModelView;
use veq_core::model::{load_checkpoint, save_checkpoint, CheckpointMeta};
use veq_core::planning::{evaluate_policy_mean, read_policy_csv, write_policy_csv};
use veq_core::rng::{derive_seed, stage};
use veq_core::theory::verify_all;

#[derive(Parser)]
#[command(
    name = "veq",
    version,
    about = "Value-equivalent and maximum-likelihood models on tabular MDPs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Roll a uniform-random trajectory and write it as `s,a,r,s_next` CSV.
    Collect(Common),
    /// Train a model on a dataset and write a checkpoint directory.
    Train {
        /// Dataset CSV written by `collect`.
        #[arg(long)]
        data: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Plan on a checkpoint and write the policy as `s,action` CSV.
    Plan {
        #[arg(long)]
        checkpoint: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Exact mean value of a policy CSV on the true environment.
    Eval {
        #[arg(long)]
        policy: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Full pipeline for one method, rank, dim_v and seed; prints a result row.
    Run(Common),
    /// Every method x rank x dim_v x seed cell; writes results, summary and plot CSVs.
    Sweep(Common),
    /// Numerical checks of the theory; exits non-zero if any fails.
    Verify {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Corrupt the analytic gradients to confirm the check catches it.
        #[arg(long)]
        inject_gradient_fault: bool,
    },
}

/// Flags shared by the experiment commands. Each overrides the matching
/// key of `--config` (or of the defaults).
#[derive(Args, Default)]
struct Common {
    /// Flat key=value config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// four_rooms, catch or toy.
    #[arg(long)]
    env: Option<String>,
    #[arg(long)]
    width: Option<usize>,
    #[arg(long)]
    height: Option<usize>,
    #[arg(long)]
    slip_prob: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    /// Four Rooms goal corner, e.g. top_right.
    #[arg(long)]
    goal: Option<String>,
    /// mle or ve; comma-separated list for sweeps.
    #[arg(long)]
    method: Option<String>,
    /// basis, value_polytope or none.
    #[arg(long)]
    strategy: Option<String>,
    /// Model rank; comma-separated list for sweeps.
    #[arg(long)]
    rank: Option<String>,
    /// Size of the function set; comma-separated list for sweeps.
    #[arg(long)]
    dim_v: Option<String>,
    #[arg(long)]
    samples: Option<usize>,
    /// Run seed, or the first seed of a sweep.
    #[arg(long)]
    seed: Option<u64>,
    /// Number of consecutive seeds in a sweep.
    #[arg(long)]
    seeds: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    max_steps: Option<usize>,
    /// auto, value_iteration or lstd_pi.
    #[arg(long)]
    planner: Option<String>,
    /// Worker threads for sweeps (0 = all cores).
    #[arg(long)]
    jobs: Option<usize>,
    /// Output file or directory, depending on the command.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn config(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        let mut overrides: Vec<(&str, String)> = Vec::new();
        // `env` resets grid parameters, so it goes first.
        let mut push = |k, v: Option<String>| {
            if let Some(v) = v {
                overrides.push((k, v));
            }
        };
        push("env", self.env.clone());
        push("width", self.width.map(|v| v.to_string()));
        push("height", self.height.map(|v| v.to_string()));
        push("slip_prob", self.slip_prob.map(|v| v.to_string()));
        push("gamma", self.gamma.map(|v| v.to_string()));
        push("goal", self.goal.clone());
        push("methods", self.method.clone());
        push("strategy", self.strategy.clone());
        push("ranks", self.rank.clone());
        push("dim_v", self.dim_v.clone());
        push("samples", self.samples.map(|v| v.to_string()));
        push("lr", self.lr.map(|v| v.to_string()));
        push("max_steps", self.max_steps.map(|v| v.to_string()));
        push("planner", self.planner.clone());
        push("jobs", self.jobs.map(|v| v.to_string()));
        for (k, v) in overrides {
            cfg.set(k, &v)
                .with_context(|| format!("--{}", k.replace('_', "-")))?;
        }
        match (self.seed, self.seeds) {
            (base, Some(n)) => cfg.seeds = ExperimentConfig::seed_range(base.unwrap_or(0), n),
            (Some(s), None) => cfg.seeds = vec![s],
            (None, None) => {}
        }
        if let Some(out) = &self.out {
            cfg.out = out.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn single<T: Copy + std::fmt::Display>(name: &str, items: &[T]) -> Result<T> {
    match items {
        [x] => Ok(*x),
        _ => bail!(
            "this command takes a single {name}, got {}; use `sweep` for lists",
            items.len()
        ),
    }
}

fn out_path(common: &Common, default: &str) -> PathBuf {
    common.out.clone().unwrap_or_else(|| PathBuf::from(default))
}

fn collect(common: &Common) -> Result<()> {
    let cfg = common.config()?;
    let seed = cfg.seeds[0];
    let env = Environment::build(&cfg.env)?;
    let ds = collect_dataset(&env.mdp, cfg.n_samples, derive_seed(seed, stage::DATA))?;
    let path = out_path(common, "dataset.csv");
    ds.write_csv(&path)?;
    println!(
        "wrote {} transitions over {} states to {}",
        ds.len(),
        ds.n_states(),
        path.display()
    );
    Ok(())
}

fn load_dataset(path: &Path, env: &Environment) -> Result<TransitionDataset> {
    TransitionDataset::read_csv(path, env.n_states(), env.mdp.n_actions())
        .with_context(|| format!("reading dataset {}", path.display()))
}

fn train(data: &Path, common: &Common) -> Result<()> {
    let cfg = common.config()?;
    let (method, rank, dim_v, seed) = (
        single("method", &cfg.methods)?,
        single("rank", &cfg.ranks)?,
        single("dim_v", &cfg.dim_vs)?,
        cfg.seeds[0],
    );
    let env = Environment::build(&cfg.env)?;
    let ds = load_dataset(data, &env)?;
    let vset = build_function_set(&env, cfg.strategy, dim_v, seed)?;
    let (model, report) = train_model(
        &ds,
        method,
        vset.as_ref(),
        rank,
        env.mdp.gamma(),
        seed,
        &cfg.train_config(),
        cfg.weight_by_counts,
    )?;
    let dir = out_path(common, "checkpoint");
    let meta = CheckpointMeta {
        seed,
        objective: method.to_string(),
    };
    save_checkpoint(&dir, &model, &meta)?;
    let mut losses = String::from("step,loss\n");
    for (step, loss) in &report.losses {
        losses.push_str(&format!("{step},{}\n", format_sig(*loss)));
    }
    std::fs::write(dir.join("losses.csv"), losses)?;
    println!(
        "initial_loss={} final_loss={} grad_norm={} steps={} converged={} wall_time={:.2}s",
        format_sig(report.initial_loss),
        format_sig(report.final_loss),
        format_sig(report.grad_norm),
        report.steps,
        report.converged,
        report.wall_time.as_secs_f64()
    );
    println!("checkpoint written to {}", dir.display());
    Ok(())
}

fn plan_cmd(checkpoint: &Path, common: &Common) -> Result<()> {
    let cfg = common.config()?;
    let env = Environment::build(&cfg.env)?;
    let (model, meta) = load_checkpoint(checkpoint)?;
    if model.n_states() != env.n_states() || model.n_actions() != env.mdp.n_actions() {
        bail!(
            "checkpoint does not match the {} environment",
            env.spec.kind
        );
    }
    let seed = common.seed.unwrap_or(meta.seed);
    let dim_v = single("dim_v", &cfg.dim_vs)?;
    let vset = build_function_set(&env, cfg.strategy, dim_v, seed)?;
    let policy = plan(
        &model,
        &env,
        cfg.planner,
        cfg.strategy,
        vset.as_ref(),
        &cfg.lstd,
        seed,
    )?;
    let path = out_path(common, "policy.csv");
    write_policy_csv(&policy, &path)?;
    println!(
        "wrote policy for {} states to {}",
        env.n_states(),
        path.display()
    );
    Ok(())
}

fn eval(policy: &Path, common: &Common) -> Result<()> {
    let cfg = common.config()?;
    let env = Environment::build(&cfg.env)?;
    let pi = read_policy_csv(policy, env.n_states(), env.mdp.n_actions())?;
    println!(
        "mean_value={}",
        format_sig(evaluate_policy_mean(&env.mdp, &pi)?)
    );
    Ok(())
}

fn run(common: &Common) -> Result<()> {
    let cfg = common.config()?;
    let key = RunKey {
        method: single::<Method>("method", &cfg.methods)?,
        rank: single("rank", &cfg.ranks)?,
        dim_v: single("dim_v", &cfg.dim_vs)?,
        seed: cfg.seeds[0],
    };
    let env = Environment::build(&cfg.env)?;
    let row = run_single(&cfg, &env, key)?.csv_row();
    println!("{RESULTS_HEADER}\n{row}");
    if let Some(path) = &common.out {
        std::fs::write(path, format!("{RESULTS_HEADER}\n{row}\n"))?;
    }
    Ok(())
}

fn sweep(common: &Common) -> Result<()> {
    let cfg = common.config()?;
    let outcome = run_sweep(&cfg)?;
    let summary = write_sweep_outputs(&cfg, &outcome, &cfg.out)?;
    println!(
        "{:<6} {:>6} {:>6} {:>4} {:>14} {:>14}",
        "method", "rank", "dim_v", "n", "mean", "sd"
    );
    for s in &summary {
        println!(
            "{:<6} {:>6} {:>6} {:>4} {:>14} {:>14}",
            s.method.to_string(),
            s.rank,
            s.dim_v,
            s.n,
            format_sig(s.mean),
            format_sig(s.sd)
        );
    }
    println!(
        "{} rows written to {}",
        outcome.rows.len(),
        cfg.out.join("results.csv").display()
    );
    if outcome.n_failed() > 0 {
        eprintln!(
            "{} runs failed; see {}",
            outcome.n_failed(),
            cfg.out.join("failures.txt").display()
        );
    }
    Ok(())
}

fn verify(seed: u64, fault: bool) -> bool {
    let reports = verify_all(seed, fault);
    for r in &reports {
        println!("{r}");
    }
    let failed = reports.iter().filter(|r| !r.passed).count();
    println!(
        "{} of {} checks passed",
        reports.len() - failed,
        reports.len()
    );
    failed == 0
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Collect(c) => collect(c),
        Command::Train { data, common } => train(data, common),
        Command::Plan { checkpoint, common } => plan_cmd(checkpoint, common),
        Command::Eval { policy, common } => eval(policy, common),
        Command::Run(c) => run(c),
        Command::Sweep(c) => sweep(c),
        Command::Verify {
            seed,
            inject_gradient_fault,
        } => {
            return if verify(*seed, *inject_gradient_fault) {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            }
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
