//! `run` and `sweep`: execute configurations into per-run artifact directories.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use prefdesign::artifact::{MetricsRow, RunWriter};
use prefdesign::config::{ExperimentConfig, RunSpec};
use prefdesign::StrategyKind;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::{ConfigError, OUTPUT_ROOT_ENV};

pub const SWEEP_METRICS_FILE: &str = "sweep_metrics.csv";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const FAILURES_FILE: &str = "failures.jsonl";

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    ExperimentConfig::load(path).with_context(|| format!("loading {}", path.display()))
}

/// Output root: explicit flag, then the config's `output_dir`, then
/// `$PREFDESIGN_OUTPUT_ROOT/<config stem>`, then `runs/<config stem>`.
pub fn output_root(config: &ExperimentConfig, config_path: &Path, explicit: Option<&Path>) -> PathBuf {
    if let Some(p) = explicit {
        return p.to_path_buf();
    }
    if let Some(p) = &config.output_dir {
        return config.resolve(p);
    }
    let stem = config_path.file_stem().map(|s| s.to_os_string()).unwrap_or_else(|| "run".into());
    match std::env::var_os(OUTPUT_ROOT_ENV) {
        Some(root) if !root.is_empty() => PathBuf::from(root).join(stem),
        _ => PathBuf::from("runs").join(stem),
    }
}

pub fn run_dir(root: &Path, spec: &RunSpec) -> PathBuf {
    root.join(spec.cell_name()).join(format!("seed_{}", spec.seed))
}

/// Executes one run and writes its artifact; returns the metric rows.
pub fn execute_run(config: &ExperimentConfig, spec: &RunSpec, dir: &Path) -> prefdesign::Result<Vec<MetricsRow>> {
    let out = config.execute(spec)?;
    let snapshot = config.for_run(spec).to_toml_string()?;
    let writer = RunWriter::create(dir, &snapshot)?;
    writer.write_trace(&out.trace)?;
    for snap in out.snapshots.iter().flatten() {
        writer.write_snapshot(snap)?;
    }
    writer.mark_finished()?;
    Ok(out.trace.strategy_rounds().iter().map(MetricsRow::from_record).collect())
}

#[derive(Debug)]
pub struct RunOutcome {
    pub spec: RunSpec,
    pub dir: PathBuf,
    pub result: Result<Vec<MetricsRow>, String>,
}

/// Runs every spec on a pool of `jobs` workers. Each run owns its directory;
/// outcomes come back in spec order whatever the scheduling.
pub fn execute_all(config: &ExperimentConfig, specs: &[RunSpec], root: &Path, jobs: usize) -> Result<Vec<RunOutcome>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .context("building worker pool")?;
    Ok(pool.install(|| {
        specs
            .par_iter()
            .map(|spec| {
                let dir = run_dir(root, spec);
                let result = execute_run(config, spec, &dir).map_err(|e| e.to_string());
                match &result {
                    Ok(rows) => tracing::info!(run = %dir.display(), rounds = rows.len(), "run finished"),
                    Err(e) => tracing::warn!(run = %dir.display(), error = %e, "run failed"),
                }
                RunOutcome {
                    spec: *spec,
                    dir,
                    result,
                }
            })
            .collect()
    }))
}

#[derive(Debug, Serialize)]
struct RunReport<'a> {
    dir: &'a Path,
    seed: u64,
    rounds: usize,
}

/// `run --config`: every seed of the top-level configuration. Sweep axes are
/// ignored here; use `sweep` for those.
pub fn cmd_run(config_path: &Path, out: Option<&Path>) -> Result<Vec<RunOutcome>> {
    let mut config = load_config(config_path)?;
    config.sweep = None;
    let root = output_root(&config, config_path, out);
    let outcomes = execute_all(&config, &config.runs(), &root, 1)?;
    let mut stdout = std::io::stdout().lock();
    for o in &outcomes {
        match &o.result {
            Ok(rows) => {
                let report = RunReport {
                    dir: &o.dir,
                    seed: o.spec.seed,
                    rounds: rows.len(),
                };
                writeln!(stdout, "{}", serde_json::to_string(&report)?)?;
            }
            Err(e) => bail!("run {} failed: {e}", o.dir.display()),
        }
    }
    Ok(outcomes)
}

/// One row of the long-format sweep table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub strategy: StrategyKind,
    pub batch_size: usize,
    pub pooling: String,
    pub seed: u64,
    pub round: usize,
    pub n_labels: usize,
    pub one_minus_spearman: Option<f64>,
    pub best_of_n: Option<f64>,
}

/// Mean and sample standard deviation per configuration and round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub strategy: StrategyKind,
    pub batch_size: usize,
    pub pooling: String,
    pub round: usize,
    pub n_labels: usize,
    pub seeds: usize,
    pub mean_one_minus_spearman: Option<f64>,
    pub sd_one_minus_spearman: Option<f64>,
    pub mean_best_of_n: Option<f64>,
    pub sd_best_of_n: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct FailureRecord {
    pub strategy: StrategyKind,
    pub batch_size: usize,
    pub pooling: String,
    pub seed: u64,
    pub dir: PathBuf,
    pub error: String,
}

pub fn sweep_rows(outcomes: &[RunOutcome]) -> Vec<SweepRow> {
    let mut rows = Vec::new();
    for o in outcomes {
        let Ok(metrics) = &o.result else { continue };
        rows.extend(metrics.iter().map(|m| SweepRow {
            strategy: o.spec.strategy,
            batch_size: o.spec.batch_size,
            pooling: o.spec.pooling().to_string(),
            seed: o.spec.seed,
            round: m.round,
            n_labels: m.n_labels,
            one_minus_spearman: m.one_minus_spearman,
            best_of_n: m.best_of_n,
        }));
    }
    rows
}

/// `(mean, sd)` of the present values; sd needs two of them.
pub fn mean_sd(values: &[f64]) -> (Option<f64>, Option<f64>) {
    if values.is_empty() {
        return (None, None);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (Some(mean), None);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (Some(mean), Some(var.sqrt()))
}

/// Aggregates long rows per (configuration, round), in first-seen order.
pub fn summarize(rows: &[SweepRow]) -> Vec<SummaryRow> {
    let mut order: Vec<(StrategyKind, usize, String)> = Vec::new();
    let mut groups: BTreeMap<(usize, usize), Vec<&SweepRow>> = BTreeMap::new();
    for row in rows {
        let key = (row.strategy, row.batch_size, row.pooling.clone());
        let cell = match order.iter().position(|k| *k == key) {
            Some(i) => i,
            None => {
                order.push(key);
                order.len() - 1
            }
        };
        groups.entry((cell, row.round)).or_default().push(row);
    }
    groups
        .into_iter()
        .map(|((cell, round), members)| {
            let (strategy, batch_size, pooling) = order[cell].clone();
            let spear: Vec<f64> = members.iter().filter_map(|r| r.one_minus_spearman).collect();
            let bon: Vec<f64> = members.iter().filter_map(|r| r.best_of_n).collect();
            let (mean_one_minus_spearman, sd_one_minus_spearman) = mean_sd(&spear);
            let (mean_best_of_n, sd_best_of_n) = mean_sd(&bon);
            SummaryRow {
                strategy,
                batch_size,
                pooling,
                round,
                n_labels: members[0].n_labels,
                seeds: members.len(),
                mean_one_minus_spearman,
                sd_one_minus_spearman,
                mean_best_of_n,
                sd_best_of_n,
            }
        })
        .collect()
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    r.deserialize().map(|row| row.map_err(Into::into)).collect()
}

#[derive(Debug)]
pub struct SweepReport {
    pub root: PathBuf,
    pub outcomes: Vec<RunOutcome>,
    pub rows: Vec<SweepRow>,
    pub summary: Vec<SummaryRow>,
}

/// `sweep --config --jobs`: the full cartesian product. Failed runs are
/// recorded in `failures.jsonl` and the remaining runs still aggregate; the
/// command fails afterwards if any run did.
pub fn cmd_sweep(config_path: &Path, jobs: usize, out: Option<&Path>) -> Result<SweepReport> {
    if jobs == 0 {
        return Err(ConfigError("--jobs must be >= 1".into()).into());
    }
    let config = load_config(config_path)?;
    let root = output_root(&config, config_path, out);
    fs::create_dir_all(&root).with_context(|| format!("creating {}", root.display()))?;
    let specs = config.runs();
    let outcomes = execute_all(&config, &specs, &root, jobs)?;

    let rows = sweep_rows(&outcomes);
    let summary = summarize(&rows);
    write_csv(&root.join(SWEEP_METRICS_FILE), &rows)?;
    write_csv(&root.join(SUMMARY_FILE), &summary)?;

    let failures: Vec<FailureRecord> = outcomes
        .iter()
        .filter_map(|o| {
            o.result.as_ref().err().map(|e| FailureRecord {
                strategy: o.spec.strategy,
                batch_size: o.spec.batch_size,
                pooling: o.spec.pooling().to_string(),
                seed: o.spec.seed,
                dir: o.dir.clone(),
                error: e.clone(),
            })
        })
        .collect();
    let mut text = String::new();
    for f in &failures {
        text.push_str(&serde_json::to_string(f)?);
        text.push('\n');
    }
    fs::write(root.join(FAILURES_FILE), text)?;

    println!(
        "{}",
        serde_json::json!({
            "root": root,
            "runs": outcomes.len(),
            "failed": failures.len(),
            "metric_rows": rows.len(),
        })
    );
    if !failures.is_empty() {
        bail!("{} of {} runs failed; see {}", failures.len(), outcomes.len(), root.join(FAILURES_FILE).display());
    }
    Ok(SweepReport {
        root,
        outcomes,
        rows,
        summary,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(strategy: StrategyKind, seed: u64, round: usize, s: Option<f64>) -> SweepRow {
        SweepRow {
            strategy,
            batch_size: 4,
            pooling: "in_prompt".into(),
            seed,
            round,
            n_labels: 4 * (round + 1),
            one_minus_spearman: s,
            best_of_n: Some(seed as f64),
        }
    }

    #[test]
    fn mean_sd_of_small_samples() {
        assert_eq!(mean_sd(&[]), (None, None));
        assert_eq!(mean_sd(&[2.0]), (Some(2.0), None));
        let (m, s) = mean_sd(&[1.0, 3.0]);
        assert_eq!(m, Some(2.0));
        assert!((s.unwrap() - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn summary_groups_by_cell_and_round_in_first_seen_order() {
        let rows = vec![
            row(StrategyKind::Dopt, 1, 1, Some(0.2)),
            row(StrategyKind::Dopt, 1, 2, Some(0.1)),
            row(StrategyKind::Dopt, 2, 1, Some(0.4)),
            row(StrategyKind::Dopt, 2, 2, None),
            row(StrategyKind::Random, 1, 1, Some(0.5)),
        ];
        let s = summarize(&rows);
        assert_eq!(s.len(), 3);
        assert_eq!((s[0].strategy, s[0].round, s[0].seeds), (StrategyKind::Dopt, 1, 2));
        assert!((s[0].mean_one_minus_spearman.unwrap() - 0.3).abs() < 1e-15);
        assert_eq!(s[1].mean_one_minus_spearman, Some(0.1));
        assert_eq!(s[1].sd_one_minus_spearman, None);
        assert_eq!(s[1].mean_best_of_n, Some(1.5));
        assert_eq!(s[2].strategy, StrategyKind::Random);
    }
}
