//! Sweeps over the experiment grid, seed summaries and CSV output.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::{run_single, ExperimentConfig, ExperimentResult, Method, RunKey};
use crate::env::Environment;
use crate::error::{Result, VeqError};

pub const RESULTS_HEADER: &str = "env,method,strategy,rank,dim_v,seed,mean_value,final_loss,steps";
pub const SUMMARY_HEADER: &str = "env,method,strategy,rank,dim_v,n,mean_value,sd_value,failed";
pub const PLOT_HEADER: &str = "x,mean_mle,sd_mle,mean_ve,sd_ve";

/// Renders `x` with 10 significant digits, in fixed notation for moderate
/// magnitudes and scientific notation otherwise. Independent of locale.
pub fn format_sig(x: f64) -> String {
    if !x.is_finite() {
        return if x.is_nan() {
            "nan".into()
        } else if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.9e}");
    let exp: i32 = sci
        .rsplit('e')
        .next()
        .and_then(|e| e.parse().ok())
        .unwrap_or(0);
    if (-5..15).contains(&exp) {
        format!("{:.*}", (9 - exp).max(0) as usize, x)
    } else {
        sci
    }
}

/// The cells of a sweep in output order: method, then rank, then dim_v,
/// then seed.
pub fn sweep_keys(cfg: &ExperimentConfig) -> Vec<RunKey> {
    let mut keys = Vec::new();
    for &method in &cfg.methods {
        for &rank in &cfg.ranks {
            for &dim_v in &cfg.dim_vs {
                for &seed in &cfg.seeds {
                    keys.push(RunKey {
                        method,
                        rank,
                        dim_v,
                        seed,
                    });
                }
            }
        }
    }
    keys
}

#[derive(Debug, Clone)]
pub struct SweepRow {
    pub key: RunKey,
    /// The result, or the stage-tagged error message of a failed run.
    pub outcome: std::result::Result<ExperimentResult, String>,
}

#[derive(Debug, Clone)]
pub struct SweepOutcome {
    pub env: String,
    pub strategy: super::Strategy,
    pub rows: Vec<SweepRow>,
}

impl SweepOutcome {
    pub fn results(&self) -> impl Iterator<Item = &ExperimentResult> {
        self.rows.iter().filter_map(|r| r.outcome.as_ref().ok())
    }

    pub fn n_failed(&self) -> usize {
        self.rows.iter().filter(|r| r.outcome.is_err()).count()
    }
}

/// `VEQ_DETERMINISTIC=1` forces serial execution.
pub fn deterministic_mode() -> bool {
    std::env::var("VEQ_DETERMINISTIC").is_ok_and(|v| v == "1")
}

/// Runs every cell of the grid. Failed runs are kept as rows and do not
/// stop the sweep. Row order never depends on scheduling.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<SweepOutcome> {
    cfg.validate()?;
    let env = Environment::build(&cfg.env)?;
    let keys = sweep_keys(cfg);
    let one = |key: &RunKey| SweepRow {
        key: *key,
        outcome: run_single(cfg, &env, *key).map_err(|e| e.to_string()),
    };
    let rows = if deterministic_mode() || cfg.jobs == 1 {
        keys.iter().map(one).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.jobs)
            .build()
            .map_err(|e| VeqError::invalid(format!("thread pool: {e}")))?;
        pool.install(|| keys.par_iter().map(one).collect())
    };
    Ok(SweepOutcome {
        env: env.spec.kind.to_string(),
        strategy: cfg.strategy,
        rows,
    })
}

/// One `(method, rank, dim_v)` cell aggregated over seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub method: Method,
    pub rank: usize,
    pub dim_v: usize,
    pub n: usize,
    pub mean: f64,
    /// Population standard deviation.
    pub sd: f64,
    pub failed: usize,
}

pub fn summarize(outcome: &SweepOutcome) -> Vec<SummaryRow> {
    let mut cells: BTreeMap<(Method, usize, usize), (Vec<f64>, usize)> = BTreeMap::new();
    for row in &outcome.rows {
        let k = row.key;
        let cell = cells.entry((k.method, k.rank, k.dim_v)).or_default();
        match &row.outcome {
            Ok(r) => cell.0.push(r.mean_value),
            Err(_) => cell.1 += 1,
        }
    }
    cells
        .into_iter()
        .map(|((method, rank, dim_v), (vals, failed))| {
            let n = vals.len();
            let mean = vals.iter().sum::<f64>() / n as f64;
            let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
            SummaryRow {
                method,
                rank,
                dim_v,
                n,
                mean,
                sd: var.sqrt(),
                failed,
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlotRow {
    pub x: usize,
    pub mean_mle: f64,
    pub sd_mle: f64,
    pub mean_ve: f64,
    pub sd_ve: f64,
}

/// Which axis a plot slice varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Slice {
    /// Fixed `dim_v`, rank on the x axis.
    FixedV(usize),
    /// Fixed rank, `dim_v` on the x axis.
    FixedModel(usize),
}

/// Side-by-side MLE/VE columns for one slice; a missing method gives NaN.
pub fn plot_rows(summary: &[SummaryRow], slice: Slice) -> Vec<PlotRow> {
    let mut by_x: BTreeMap<usize, PlotRow> = BTreeMap::new();
    for s in summary {
        let x = match slice {
            Slice::FixedV(d) if s.dim_v == d => s.rank,
            Slice::FixedModel(k) if s.rank == k => s.dim_v,
            _ => continue,
        };
        let row = by_x.entry(x).or_insert(PlotRow {
            x,
            mean_mle: f64::NAN,
            sd_mle: f64::NAN,
            mean_ve: f64::NAN,
            sd_ve: f64::NAN,
        });
        match s.method {
            Method::Mle => (row.mean_mle, row.sd_mle) = (s.mean, s.sd),
            Method::Ve => (row.mean_ve, row.sd_ve) = (s.mean, s.sd),
        }
    }
    by_x.into_values().collect()
}

/// Results CSV text. Failed runs appear with `nan` values and zero steps.
pub fn results_csv(outcome: &SweepOutcome) -> String {
    let mut out = format!("{RESULTS_HEADER}\n");
    for row in &outcome.rows {
        match &row.outcome {
            Ok(r) => out.push_str(&r.csv_row()),
            Err(_) => {
                let k = row.key;
                let _ = write!(
                    out,
                    "{},{},{},{},{},{},nan,nan,0",
                    outcome.env, k.method, outcome.strategy, k.rank, k.dim_v, k.seed
                );
            }
        }
        out.push('\n');
    }
    out
}

pub fn write_results_csv(outcome: &SweepOutcome, path: &Path) -> Result<()> {
    std::fs::write(path, results_csv(outcome))?;
    Ok(())
}

pub fn write_summary_csv(
    outcome: &SweepOutcome,
    summary: &[SummaryRow],
    path: &Path,
) -> Result<()> {
    let mut out = format!("{SUMMARY_HEADER}\n");
    for s in summary {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            outcome.env,
            s.method,
            outcome.strategy,
            s.rank,
            s.dim_v,
            s.n,
            format_sig(s.mean),
            format_sig(s.sd),
            s.failed
        );
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Writes `plot_dim_v_<d>.csv` for every dim_v and `plot_rank_<k>.csv` for
/// every rank into `dir`, returning the paths.
pub fn write_plot_csvs(summary: &[SummaryRow], dir: &Path) -> Result<Vec<PathBuf>> {
    let mut dims: Vec<usize> = summary.iter().map(|s| s.dim_v).collect();
    let mut ranks: Vec<usize> = summary.iter().map(|s| s.rank).collect();
    dims.sort_unstable();
    dims.dedup();
    ranks.sort_unstable();
    ranks.dedup();
    let slices = dims
        .into_iter()
        .map(|d| (Slice::FixedV(d), format!("plot_dim_v_{d}.csv")))
        .chain(
            ranks
                .into_iter()
                .map(|k| (Slice::FixedModel(k), format!("plot_rank_{k}.csv"))),
        );
    let mut paths = Vec::new();
    for (slice, name) in slices {
        let mut out = format!("{PLOT_HEADER}\n");
        for r in plot_rows(summary, slice) {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                r.x,
                format_sig(r.mean_mle),
                format_sig(r.sd_mle),
                format_sig(r.mean_ve),
                format_sig(r.sd_ve)
            );
        }
        let path = dir.join(name);
        std::fs::write(&path, out)?;
        paths.push(path);
    }
    Ok(paths)
}

/// Writes `config.cfg`, `results.csv`, `summary.csv`, the plot slices and,
/// if any run failed, `failures.txt` into `dir`.
pub fn write_sweep_outputs(
    cfg: &ExperimentConfig,
    outcome: &SweepOutcome,
    dir: &Path,
) -> Result<Vec<SummaryRow>> {
    std::fs::create_dir_all(dir)?;
    cfg.save(&dir.join("config.cfg"))?;
    write_results_csv(outcome, &dir.join("results.csv"))?;
    let summary = summarize(outcome);
    write_summary_csv(outcome, &summary, &dir.join("summary.csv"))?;
    write_plot_csvs(&summary, dir)?;
    let failures: String = outcome
        .rows
        .iter()
        .filter_map(|r| {
            let k = r.key;
            r.outcome.as_ref().err().map(|e| {
                format!(
                    "{} rank={} dim_v={} seed={}: {e}\n",
                    k.method, k.rank, k.dim_v, k.seed
                )
            })
        })
        .collect();
    if !failures.is_empty() {
        std::fs::write(dir.join("failures.txt"), failures)?;
    }
    Ok(summary)
}
