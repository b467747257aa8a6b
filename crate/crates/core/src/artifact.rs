//! Run-artifact directory layout shared by batch runs and annotation sessions.
//!
//! ```text
//! <run>/config.toml               configuration snapshot
//! <run>/metadata.json             timestamps and version (the only non-deterministic file)
//! <run>/metrics.csv               round,n_labels,one_minus_spearman,best_of_n
//! <run>/labels.jsonl              every label in acquisition order
//! <run>/selections/round_XXX.jsonl
//! <run>/checkpoints/round_XXX.bin
//! <run>/heatmaps/round_XXX.csv    2D runs only: x,y,reward
//! <run>/pairs/round_XXX.csv       2D runs only: x1,y1,x2,y2
//! ```
//!
//! Rounds in `metrics.csv` start at 1; round 0 is the bootstrap batch.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::active::{RoundRecord, RunTrace};
use crate::checkpoint::save_checkpoint;
use crate::error::{Error, FormatError, Result};
use crate::experiment2d::RoundSnapshot;
use crate::model::RewardModel;
use crate::selection::{SelectionRecord, SelectionResult};
use crate::types::PairId;

pub const CONFIG_FILE: &str = "config.toml";
pub const METADATA_FILE: &str = "metadata.json";
pub const METRICS_FILE: &str = "metrics.csv";
pub const LABELS_FILE: &str = "labels.jsonl";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub round: usize,
    pub n_labels: usize,
    pub one_minus_spearman: Option<f64>,
    pub best_of_n: Option<f64>,
}

impl MetricsRow {
    pub fn from_record(record: &RoundRecord) -> Self {
        Self {
            round: record.round,
            n_labels: record.n_labels,
            one_minus_spearman: record.metrics.map(|m| m.one_minus_spearman),
            best_of_n: record.metrics.map(|m| m.best_of_n),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelRow {
    pub round: usize,
    pub pair_id: PairId,
    pub left_preferred: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub tool_version: String,
    pub created_unix_ms: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub finished_unix_ms: Option<u64>,
}

pub fn now_unix_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeatmapCell {
    pub x: f64,
    pub y: f64,
    pub reward: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairSegment {
    pub x1: f64,
    pub y1: f64,
    pub x2: f64,
    pub y2: f64,
}

fn round_file(dir: &Path, sub: &str, round: usize, ext: &str) -> PathBuf {
    dir.join(sub).join(format!("round_{round:03}.{ext}"))
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Format(FormatError::Other(format!("{other:?}"))),
    }
}

fn write_csv<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    for row in rows {
        w.serialize(row).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn read_csv<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    r.deserialize().map(|row| row.map_err(csv_err)).collect()
}

/// Writes into a run directory. Every method overwrites its target file, so
/// rewriting a run with the same inputs yields identical bytes.
#[derive(Debug, Clone)]
pub struct RunWriter {
    dir: PathBuf,
}

impl RunWriter {
    pub fn create(dir: impl Into<PathBuf>, config_toml: &str) -> Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(dir.join("selections"))?;
        fs::create_dir_all(dir.join("checkpoints"))?;
        fs::write(dir.join(CONFIG_FILE), config_toml)?;
        let writer = Self { dir };
        writer.write_metadata(&Metadata {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            created_unix_ms: now_unix_ms(),
            finished_unix_ms: None,
        })?;
        Ok(writer)
    }

    /// Opens an existing run directory without touching its files.
    pub fn open(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn write_metadata(&self, meta: &Metadata) -> Result<()> {
        let json = serde_json::to_string_pretty(meta).map_err(|e| FormatError::Other(e.to_string()))?;
        fs::write(self.dir.join(METADATA_FILE), json + "\n")?;
        Ok(())
    }

    pub fn mark_finished(&self) -> Result<()> {
        let mut meta = read_metadata(&self.dir)?;
        meta.finished_unix_ms = Some(now_unix_ms());
        self.write_metadata(&meta)
    }

    pub fn write_metrics(&self, rows: &[MetricsRow]) -> Result<()> {
        write_csv(&self.dir.join(METRICS_FILE), rows)
    }

    pub fn write_labels(&self, rows: &[LabelRow]) -> Result<()> {
        let mut out = BufWriter::new(File::create(self.dir.join(LABELS_FILE))?);
        for row in rows {
            let line = serde_json::to_string(row).map_err(|e| FormatError::Other(e.to_string()))?;
            writeln!(out, "{line}")?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn write_selection(&self, round: usize, selection: &SelectionResult) -> Result<()> {
        let file = File::create(round_file(&self.dir, "selections", round, "jsonl"))?;
        let mut out = BufWriter::new(file);
        selection.write_records(&mut out)?;
        out.flush()?;
        Ok(())
    }

    pub fn write_checkpoint(&self, round: usize, model: &RewardModel) -> Result<()> {
        save_checkpoint(model, &round_file(&self.dir, "checkpoints", round, "bin"))
    }

    pub fn write_snapshot(&self, snapshot: &RoundSnapshot) -> Result<()> {
        fs::create_dir_all(self.dir.join("heatmaps"))?;
        fs::create_dir_all(self.dir.join("pairs"))?;
        let map = &snapshot.heatmap;
        let cells = map.points().into_iter().zip(&map.values).map(|(p, &reward)| HeatmapCell {
            x: p[0],
            y: p[1],
            reward,
        });
        write_csv(&round_file(&self.dir, "heatmaps", snapshot.round, "csv"), cells)?;
        let segments = snapshot.selected.iter().map(|[a, b]| PairSegment {
            x1: a[0],
            y1: a[1],
            x2: b[0],
            y2: b[1],
        });
        write_csv(&round_file(&self.dir, "pairs", snapshot.round, "csv"), segments)
    }

    /// Writes the whole trace of a finished run.
    pub fn write_trace(&self, trace: &RunTrace) -> Result<()> {
        let rows: Vec<MetricsRow> = trace.strategy_rounds().iter().map(MetricsRow::from_record).collect();
        self.write_metrics(&rows)?;
        let mut labels = Vec::with_capacity(trace.labeled.len());
        for record in &trace.rounds {
            self.write_selection(record.round, &record.selection)?;
            self.write_checkpoint(record.round, &record.model)?;
            labels.extend(record.added.iter().map(|(_, l)| LabelRow {
                round: record.round,
                pair_id: l.pair_id,
                left_preferred: l.left_preferred,
            }));
        }
        self.write_labels(&labels)
    }
}

pub fn read_metadata(dir: &Path) -> Result<Metadata> {
    let file = File::open(dir.join(METADATA_FILE))?;
    serde_json::from_reader(BufReader::new(file)).map_err(|e| FormatError::Other(e.to_string()).into())
}

pub fn read_metrics(dir: &Path) -> Result<Vec<MetricsRow>> {
    read_csv(&dir.join(METRICS_FILE))
}

pub fn read_labels(dir: &Path) -> Result<Vec<LabelRow>> {
    read_jsonl(&dir.join(LABELS_FILE))
}

pub fn read_selection(dir: &Path, round: usize) -> Result<Vec<SelectionRecord>> {
    read_jsonl(&round_file(dir, "selections", round, "jsonl"))
}

pub fn selection_path(dir: &Path, round: usize) -> PathBuf {
    round_file(dir, "selections", round, "jsonl")
}

fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let text = fs::read_to_string(path)?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| {
                FormatError::Json {
                    line: i + 1,
                    message: e.to_string(),
                }
                .into()
            })
        })
        .collect()
}

pub fn read_heatmap(dir: &Path, round: usize) -> Result<Vec<HeatmapCell>> {
    read_csv(&round_file(dir, "heatmaps", round, "csv"))
}

pub fn read_pairs(dir: &Path, round: usize) -> Result<Vec<PairSegment>> {
    read_csv(&round_file(dir, "pairs", round, "csv"))
}

/// Rounds with 2D snapshots, ascending.
pub fn snapshot_rounds(dir: &Path) -> Result<Vec<usize>> {
    let heatmaps = dir.join("heatmaps");
    if !heatmaps.is_dir() {
        return Ok(Vec::new());
    }
    let mut rounds: Vec<usize> = fs::read_dir(heatmaps)?
        .filter_map(|e| e.ok())
        .filter_map(|e| {
            let name = e.file_name().into_string().ok()?;
            name.strip_prefix("round_")?.strip_suffix(".csv")?.parse().ok()
        })
        .collect();
    rounds.sort_unstable();
    Ok(rounds)
}

/// True when `dir` holds at least a config and a metrics file.
pub fn is_run_dir(dir: &Path) -> bool {
    dir.join(CONFIG_FILE).is_file() && dir.join(METRICS_FILE).is_file()
}
