//! `dataset validate` and `dataset convert`.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{Context, Result};
use prefdesign::dataset::EmbeddingDataset;
use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DatasetReport {
    pub records: usize,
    pub dim: usize,
    pub prompts: usize,
    pub min_responses: usize,
    pub max_responses: usize,
    pub with_golden: usize,
    pub with_text: usize,
}

impl DatasetReport {
    pub fn of(data: &EmbeddingDataset) -> Self {
        let mut per_prompt: BTreeMap<u32, usize> = BTreeMap::new();
        for r in &data.records {
            *per_prompt.entry(r.prompt_id).or_default() += 1;
        }
        Self {
            records: data.len(),
            dim: data.dim,
            prompts: per_prompt.len(),
            min_responses: per_prompt.values().copied().min().unwrap_or(0),
            max_responses: per_prompt.values().copied().max().unwrap_or(0),
            with_golden: data.records.iter().filter(|r| r.golden.is_some()).count(),
            with_text: data.records.iter().filter(|r| r.text.is_some()).count(),
        }
    }
}

/// Decodes the file and checks it can seed a candidate pool.
pub fn cmd_validate(path: &Path) -> Result<DatasetReport> {
    let data = EmbeddingDataset::load_any(path).with_context(|| format!("decoding {}", path.display()))?;
    data.to_item_set().with_context(|| format!("{} cannot form a candidate pool", path.display()))?;
    let report = DatasetReport::of(&data);
    println!("{}", serde_json::to_string(&report)?);
    Ok(report)
}

/// Converts between the binary and JSONL formats (chosen by extension).
pub fn cmd_convert(input: &Path, output: &Path) -> Result<DatasetReport> {
    let data = EmbeddingDataset::load_any(input).with_context(|| format!("decoding {}", input.display()))?;
    data.save_any(output).with_context(|| format!("writing {}", output.display()))?;
    let report = DatasetReport::of(&data);
    println!("{}", serde_json::to_string(&report)?);
    Ok(report)
}
