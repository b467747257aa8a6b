//! `plot`: learning curves and 2D round panels from run artifacts. Every
//! figure comes with the CSV it was drawn from; the CSV is the contract.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use prefdesign::artifact::{is_run_dir, read_heatmap, read_metrics, read_pairs, snapshot_rounds, MetricsRow, CONFIG_FILE};
use prefdesign::config::{ExperimentConfig, RunSpec};
use prefdesign::StrategyKind;
use serde::{Deserialize, Serialize};

use crate::runner::{mean_sd, write_csv};
use crate::svg::{ramp, Frame, Svg, PALETTE};

pub const CURVES_FILE: &str = "curves.csv";
pub const BANDS_FILE: &str = "bands.csv";
pub const PANEL_ROUNDS: usize = 4;

#[derive(Debug, Clone)]
pub struct RunArtifact {
    pub dir: PathBuf,
    pub spec: RunSpec,
    pub metrics: Vec<MetricsRow>,
}

impl RunArtifact {
    pub fn series(&self) -> String {
        self.spec.cell_name()
    }
}

fn collect_run_dirs(dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    if is_run_dir(dir) {
        out.push(dir.to_path_buf());
        return Ok(());
    }
    for entry in fs::read_dir(dir).with_context(|| format!("reading {}", dir.display()))? {
        let path = entry?.path();
        if path.is_dir() {
            collect_run_dirs(&path, out)?;
        }
    }
    Ok(())
}

/// Every run artifact under `input` (itself a run, a sweep root, or any tree
/// of runs), ordered by series then seed.
pub fn discover(input: &Path) -> Result<Vec<RunArtifact>> {
    if !input.is_dir() {
        bail!("{} is not a directory", input.display());
    }
    let mut dirs = Vec::new();
    collect_run_dirs(input, &mut dirs)?;
    if dirs.is_empty() {
        bail!("no run artifacts (config.toml + metrics.csv) under {}", input.display());
    }
    let mut runs = Vec::with_capacity(dirs.len());
    for dir in dirs {
        let text = fs::read_to_string(dir.join(CONFIG_FILE))?;
        let config = ExperimentConfig::from_toml_str(&text).with_context(|| format!("parsing {}", dir.join(CONFIG_FILE).display()))?;
        let spec = RunSpec {
            strategy: config.strategy,
            batch_size: config.batch_size,
            cross_prompt: config.pool.cross_prompt,
            seed: config.seeds.first().copied().unwrap_or_default(),
        };
        let metrics = read_metrics(&dir).with_context(|| format!("reading metrics of {}", dir.display()))?;
        runs.push(RunArtifact { dir, spec, metrics });
    }
    runs.sort_by(|a, b| (a.series(), a.spec.seed, &a.dir).cmp(&(b.series(), b.spec.seed, &b.dir)));
    Ok(runs)
}

/// Pass-through of every metrics row, tagged with its run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub series: String,
    pub seed: u64,
    pub round: usize,
    pub n_labels: usize,
    pub one_minus_spearman: Option<f64>,
    pub best_of_n: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandRow {
    pub series: String,
    pub metric: String,
    pub n_labels: usize,
    pub seeds: usize,
    pub mean: f64,
    pub sd: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PanelRow {
    pub round: usize,
    pub layer: String,
    pub x: f64,
    pub y: f64,
    pub x2: Option<f64>,
    pub y2: Option<f64>,
    pub reward: Option<f64>,
}

const METRICS: [(&str, &str); 2] = [("one_minus_spearman", "1 - Spearman correlation"), ("best_of_n", "best-of-N golden reward")];

fn metric_value(row: &MetricsRow, metric: &str) -> Option<f64> {
    match metric {
        "one_minus_spearman" => row.one_minus_spearman,
        _ => row.best_of_n,
    }
}

/// Mean and sd across seeds at each annotation count.
pub fn bands(runs: &[RunArtifact]) -> Vec<BandRow> {
    let mut out = Vec::new();
    for (metric, _) in METRICS {
        let mut grouped: BTreeMap<(String, usize), Vec<f64>> = BTreeMap::new();
        for run in runs {
            for row in &run.metrics {
                if let Some(v) = metric_value(row, metric) {
                    grouped.entry((run.series(), row.n_labels)).or_default().push(v);
                }
            }
        }
        for ((series, n_labels), values) in grouped {
            let (mean, sd) = mean_sd(&values);
            out.push(BandRow {
                series,
                metric: metric.to_string(),
                n_labels,
                seeds: values.len(),
                mean: mean.expect("group is nonempty"),
                sd,
            });
        }
    }
    out
}

fn curve_svg(bands: &[BandRow], metric: &str, label: &str) -> Option<String> {
    let rows: Vec<&BandRow> = bands.iter().filter(|b| b.metric == metric).collect();
    if rows.is_empty() {
        return None;
    }
    let lo = |b: &BandRow| b.mean - b.sd.unwrap_or(0.0);
    let hi = |b: &BandRow| b.mean + b.sd.unwrap_or(0.0);
    let xr = rows.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), r| {
        (a.min(r.n_labels as f64), b.max(r.n_labels as f64))
    });
    let yr = rows.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), r| (a.min(lo(r)), b.max(hi(r))));

    let mut series: Vec<&str> = rows.iter().map(|r| r.series.as_str()).collect();
    series.dedup();
    let legend_h = 18.0 * series.len() as f64;
    let mut svg = Svg::new(720.0, 420.0 + legend_h);
    let frame = Frame::new(80.0, 40.0, 600.0, 320.0, xr, yr);
    svg.text((380.0, 24.0), label, 14.0, "middle");
    frame.axes(&mut svg, "annotations", label);
    for (i, name) in series.iter().enumerate() {
        let colour = PALETTE[i % PALETTE.len()];
        let pts: Vec<&&BandRow> = rows.iter().filter(|r| r.series == *name).collect();
        let upper: Vec<(f64, f64)> = pts.iter().map(|r| frame.map(r.n_labels as f64, hi(r))).collect();
        let lower: Vec<(f64, f64)> = pts.iter().rev().map(|r| frame.map(r.n_labels as f64, lo(r))).collect();
        svg.polygon(&[upper, lower].concat(), colour, 0.18);
        let mean: Vec<(f64, f64)> = pts.iter().map(|r| frame.map(r.n_labels as f64, r.mean)).collect();
        svg.polyline(&mean, colour, 2.0);
        for p in &mean {
            svg.circle(*p, 2.5, colour);
        }
        let ly = 400.0 + 18.0 * i as f64;
        svg.line((90.0, ly - 4.0), (115.0, ly - 4.0), colour, 3.0);
        svg.text((122.0, ly), name, 11.0, "start");
    }
    Some(svg.finish())
}

/// Heat map and selected-pair layers of up to four rounds of one 2D run.
pub fn panel_rows(dir: &Path) -> Result<Vec<PanelRow>> {
    let mut rows = Vec::new();
    for round in snapshot_rounds(dir)?.into_iter().take(PANEL_ROUNDS) {
        for c in read_heatmap(dir, round)? {
            rows.push(PanelRow {
                round,
                layer: "heatmap".into(),
                x: c.x,
                y: c.y,
                x2: None,
                y2: None,
                reward: Some(c.reward),
            });
        }
        for p in read_pairs(dir, round)? {
            rows.push(PanelRow {
                round,
                layer: "pair".into(),
                x: p.x1,
                y: p.y1,
                x2: Some(p.x2),
                y2: Some(p.y2),
                reward: None,
            });
        }
    }
    Ok(rows)
}

fn grid_step(values: impl Iterator<Item = f64>) -> f64 {
    let mut v: Vec<f64> = values.collect();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min).min(1.0)
}

fn panel_svg(title: &str, rows: &[PanelRow]) -> String {
    let mut rounds: Vec<usize> = rows.iter().map(|r| r.round).collect();
    rounds.dedup();
    let heat: Vec<&PanelRow> = rows.iter().filter(|r| r.layer == "heatmap").collect();
    let (rmin, rmax) = heat
        .iter()
        .filter_map(|r| r.reward)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    let span = if rmax > rmin { rmax - rmin } else { 1.0 };
    let xr = heat.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), r| (a.min(r.x), b.max(r.x)));
    let yr = heat.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), r| (a.min(r.y), b.max(r.y)));
    let sx = grid_step(heat.iter().map(|r| r.x));
    let sy = grid_step(heat.iter().map(|r| r.y));
    let xr = (xr.0 - sx / 2.0, xr.1 + sx / 2.0);
    let yr = (yr.0 - sy / 2.0, yr.1 + sy / 2.0);

    let size = 240.0;
    let gap = 70.0;
    let mut svg = Svg::new(gap + rounds.len() as f64 * (size + gap), size + 110.0);
    svg.text((svg_width(rounds.len(), size, gap) / 2.0, 22.0), title, 14.0, "middle");
    for (k, &round) in rounds.iter().enumerate() {
        let frame = Frame::new(gap + k as f64 * (size + gap), 50.0, size, size, xr, yr);
        for r in heat.iter().filter(|r| r.round == round) {
            let (px, py) = frame.map(r.x - sx / 2.0, r.y + sy / 2.0);
            let (qx, qy) = frame.map(r.x + sx / 2.0, r.y - sy / 2.0);
            let t = (r.reward.unwrap_or(rmin) - rmin) / span;
            svg.rect(px, py, qx - px, qy - py, &ramp(t), 1.0);
        }
        for r in rows.iter().filter(|r| r.round == round && r.layer == "pair") {
            let a = frame.map(r.x, r.y);
            let b = frame.map(r.x2.unwrap_or(r.x), r.y2.unwrap_or(r.y));
            svg.line(a, b, "#e00000", 0.8);
            svg.circle(a, 1.8, "#e00000");
            svg.circle(b, 1.8, "#e00000");
        }
        frame.axes(&mut svg, "x", "y");
        svg.text((frame.left + size / 2.0, 44.0), &format!("round {round}"), 12.0, "middle");
    }
    svg.finish()
}

fn svg_width(panels: usize, size: f64, gap: f64) -> f64 {
    gap + panels as f64 * (size + gap)
}

#[derive(Debug)]
pub struct PlotReport {
    pub runs: usize,
    pub files: Vec<PathBuf>,
}

/// `plot --input --out`.
pub fn cmd_plot(input: &Path, out: &Path) -> Result<PlotReport> {
    let runs = discover(input)?;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let mut files = Vec::new();

    let curves: Vec<CurveRow> = runs
        .iter()
        .flat_map(|run| {
            run.metrics.iter().map(|m| CurveRow {
                series: run.series(),
                seed: run.spec.seed,
                round: m.round,
                n_labels: m.n_labels,
                one_minus_spearman: m.one_minus_spearman,
                best_of_n: m.best_of_n,
            })
        })
        .collect();
    write_csv(&out.join(CURVES_FILE), &curves)?;
    files.push(out.join(CURVES_FILE));
    let bands = bands(&runs);
    write_csv(&out.join(BANDS_FILE), &bands)?;
    files.push(out.join(BANDS_FILE));
    for (metric, label) in METRICS {
        if let Some(svg) = curve_svg(&bands, metric, label) {
            let path = out.join(format!("{metric}.svg"));
            fs::write(&path, svg)?;
            files.push(path);
        }
    }

    // One panel figure per strategy, from its first run with snapshots.
    let mut done: Vec<StrategyKind> = Vec::new();
    for run in &runs {
        if done.contains(&run.spec.strategy) || snapshot_rounds(&run.dir)?.is_empty() {
            continue;
        }
        done.push(run.spec.strategy);
        let rows = panel_rows(&run.dir)?;
        let stem = format!("panel_{}", run.spec.strategy);
        write_csv(&out.join(format!("{stem}.csv")), &rows)?;
        let title = format!("{} (seed {})", run.spec.strategy, run.spec.seed);
        fs::write(out.join(format!("{stem}.svg")), panel_svg(&title, &rows))?;
        files.push(out.join(format!("{stem}.csv")));
        files.push(out.join(format!("{stem}.svg")));
    }

    println!(
        "{}",
        serde_json::json!({ "runs": runs.len(), "files": files })
    );
    Ok(PlotReport { runs: runs.len(), files })
}
