//! Embedding dataset files.
//!
//! Binary layout, all values little-endian:
//!
//! ```text
//! header (32 bytes)
//!   0   8  magic  b"PDEMBSET"
//!   8   4  version (1)
//!   12  4  dim
//!   16  8  record count
//!   24  8  text section length in bytes
//! records (count × (28 + 4·dim) bytes)
//!   0   4  prompt_id   u32
//!   4   4  response_id u32
//!   8   4  flags       u32  bit 0: golden present, bit 1: text present
//!   12  8  golden      f64  (0 when absent)
//!   20  8  text offset u64  into the text section (0 when absent)
//!   28  4·dim embedding f32
//! text section
//!   entries of u32 byte length followed by UTF-8 bytes
//! ```
//!
//! The JSONL alternative has one object per line with `prompt_id`,
//! `response_id`, `embedding` and optional `golden` and `text`.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{FormatError, Result};
use crate::metrics::{TestPrompt, TestPromptSet};
use crate::pool::{Item, ItemSet};
use crate::types::ItemMeta;

pub const DATASET_MAGIC: &[u8; 8] = b"PDEMBSET";
pub const DATASET_VERSION: u32 = 1;
const HEADER_LEN: usize = 32;
const RECORD_FIXED: usize = 28;
const FLAG_GOLDEN: u32 = 1;
const FLAG_TEXT: u32 = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingRecord {
    pub prompt_id: u32,
    pub response_id: u32,
    pub embedding: Vec<f32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub golden: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingDataset {
    pub dim: usize,
    pub records: Vec<EmbeddingRecord>,
}

impl EmbeddingDataset {
    pub fn new(records: Vec<EmbeddingRecord>) -> Result<Self> {
        let dim = records.first().map(|r| r.embedding.len()).unwrap_or(0);
        validate_records(&records, dim)?;
        Ok(Self { dim, records })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut texts = Vec::new();
        let mut out = Vec::with_capacity(HEADER_LEN + self.records.len() * (RECORD_FIXED + 4 * self.dim));
        let mut body = Vec::with_capacity(self.records.len() * (RECORD_FIXED + 4 * self.dim));
        for r in &self.records {
            let mut flags = 0;
            let mut text_offset = 0u64;
            if r.golden.is_some() {
                flags |= FLAG_GOLDEN;
            }
            if let Some(t) = &r.text {
                flags |= FLAG_TEXT;
                text_offset = texts.len() as u64;
                texts.extend_from_slice(&(t.len() as u32).to_le_bytes());
                texts.extend_from_slice(t.as_bytes());
            }
            body.extend_from_slice(&r.prompt_id.to_le_bytes());
            body.extend_from_slice(&r.response_id.to_le_bytes());
            body.extend_from_slice(&flags.to_le_bytes());
            body.extend_from_slice(&r.golden.unwrap_or(0.0).to_le_bytes());
            body.extend_from_slice(&text_offset.to_le_bytes());
            for v in &r.embedding {
                body.extend_from_slice(&v.to_le_bytes());
            }
        }
        out.extend_from_slice(DATASET_MAGIC);
        out.extend_from_slice(&DATASET_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.dim as u32).to_le_bytes());
        out.extend_from_slice(&(self.records.len() as u64).to_le_bytes());
        out.extend_from_slice(&(texts.len() as u64).to_le_bytes());
        out.extend_from_slice(&body);
        out.extend_from_slice(&texts);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_LEN {
            return Err(FormatError::Truncated {
                offset: 0,
                needed: HEADER_LEN as u64,
                available: bytes.len() as u64,
            }
            .into());
        }
        if &bytes[..8] != DATASET_MAGIC {
            return Err(FormatError::BadMagic {
                found: bytes[..8].to_vec(),
            }
            .into());
        }
        let version = read_u32(bytes, 8);
        if version != DATASET_VERSION {
            return Err(FormatError::UnsupportedVersion(version).into());
        }
        let dim = read_u32(bytes, 12) as usize;
        let count = read_u64(bytes, 16);
        let text_len = read_u64(bytes, 24);
        if dim == 0 && count > 0 {
            return Err(FormatError::CorruptHeader("dimension is zero".into()).into());
        }
        let record_len = RECORD_FIXED as u64 + 4 * dim as u64;
        let body_len = count
            .checked_mul(record_len)
            .ok_or_else(|| FormatError::CorruptHeader(format!("record count {count} overflows")))?;
        let available = (bytes.len() - HEADER_LEN) as u64;
        if body_len > available {
            let complete = available / record_len;
            return Err(FormatError::Truncated {
                offset: HEADER_LEN as u64 + complete * record_len,
                needed: record_len,
                available: available - complete * record_len,
            }
            .into());
        }
        let text_start = HEADER_LEN as u64 + body_len;
        let text_end = text_start
            .checked_add(text_len)
            .ok_or_else(|| FormatError::CorruptHeader("text length overflows".into()))?;
        if text_end > bytes.len() as u64 {
            return Err(FormatError::Truncated {
                offset: text_start,
                needed: text_len,
                available: bytes.len() as u64 - text_start,
            }
            .into());
        }
        if text_end < bytes.len() as u64 {
            return Err(FormatError::Other(format!(
                "{} trailing bytes after text section",
                bytes.len() as u64 - text_end
            ))
            .into());
        }
        let texts = &bytes[text_start as usize..text_end as usize];

        let mut records = Vec::with_capacity(count as usize);
        for i in 0..count as usize {
            let off = HEADER_LEN + i * record_len as usize;
            let flags = read_u32(bytes, off + 8);
            if flags & !(FLAG_GOLDEN | FLAG_TEXT) != 0 {
                return Err(invalid(i, format!("unknown flags {flags:#x}")));
            }
            let golden = (flags & FLAG_GOLDEN != 0).then(|| f64::from_le_bytes(bytes[off + 12..off + 20].try_into().unwrap()));
            let text = if flags & FLAG_TEXT != 0 {
                Some(read_text(texts, read_u64(bytes, off + 20)).map_err(|m| invalid(i, m))?)
            } else {
                None
            };
            let embedding = bytes[off + RECORD_FIXED..off + record_len as usize]
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                .collect();
            records.push(EmbeddingRecord {
                prompt_id: read_u32(bytes, off),
                response_id: read_u32(bytes, off + 4),
                embedding,
                golden,
                text,
            });
        }
        validate_records(&records, dim)?;
        Ok(Self { dim, records })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }

    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<()> {
        for r in &self.records {
            serde_json::to_writer(&mut out, r).map_err(|e| FormatError::Other(e.to_string()))?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn read_jsonl<R: BufRead>(input: R) -> Result<Self> {
        let mut records = Vec::new();
        for (i, line) in input.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: EmbeddingRecord = serde_json::from_str(&line).map_err(|e| FormatError::Json {
                line: i + 1,
                message: e.to_string(),
            })?;
            records.push(rec);
        }
        Self::new(records)
    }

    /// Loads either format, choosing JSONL for `.jsonl`/`.json` extensions.
    pub fn load_any(path: &Path) -> Result<Self> {
        match path.extension().and_then(|e| e.to_str()) {
            Some("jsonl") | Some("json") => {
                Self::read_jsonl(BufReader::new(fs::File::open(path)?))
            }
            _ => Self::load(path),
        }
    }

    pub fn save_any(&self, path: &Path) -> Result<()> {
        match path.extension().and_then(|e| e.to_str()) {
            Some("jsonl") | Some("json") => {
                let mut f = std::io::BufWriter::new(fs::File::create(path)?);
                self.write_jsonl(&mut f)?;
                f.flush()?;
                Ok(())
            }
            _ => self.save(path),
        }
    }

    /// Items for pool construction; item ids are record indices.
    pub fn to_item_set(&self) -> Result<ItemSet> {
        ItemSet::new(
            self.records
                .iter()
                .enumerate()
                .map(|(i, r)| Item {
                    embedding: DVector::from_iterator(r.embedding.len(), r.embedding.iter().map(|v| *v as f64)),
                    meta: ItemMeta {
                        item_id: i as u64,
                        prompt_id: r.prompt_id,
                        response_id: r.response_id,
                        text: r.text.clone(),
                        golden: r.golden,
                    },
                })
                .collect(),
        )
    }

    /// Groups records by prompt (ascending id, file order within a prompt).
    /// Every record needs a golden score.
    pub fn to_test_set(&self) -> Result<TestPromptSet> {
        let mut groups: BTreeMap<u32, TestPrompt> = BTreeMap::new();
        for (i, r) in self.records.iter().enumerate() {
            let g = r.golden.ok_or_else(|| invalid(i, "test record has no golden score".into()))?;
            let entry = groups.entry(r.prompt_id).or_insert_with(|| TestPrompt {
                generations: Vec::new(),
                golden: Vec::new(),
            });
            entry
                .generations
                .push(DVector::from_iterator(r.embedding.len(), r.embedding.iter().map(|v| *v as f64)));
            entry.golden.push(g);
        }
        let set = TestPromptSet {
            prompts: groups.into_values().collect(),
        };
        set.validate()?;
        Ok(set)
    }

    pub fn from_item_set(items: &ItemSet) -> Result<Self> {
        Self::new(
            items
                .items()
                .iter()
                .map(|it| EmbeddingRecord {
                    prompt_id: it.meta.prompt_id,
                    response_id: it.meta.response_id,
                    embedding: it.embedding.iter().map(|v| *v as f32).collect(),
                    golden: it.meta.golden,
                    text: it.meta.text.clone(),
                })
                .collect(),
        )
    }
}

fn invalid(record: usize, message: String) -> crate::error::Error {
    FormatError::InvalidRecord { record, message }.into()
}

fn validate_records(records: &[EmbeddingRecord], dim: usize) -> Result<()> {
    for (i, r) in records.iter().enumerate() {
        if r.embedding.len() != dim {
            return Err(FormatError::DimMismatch {
                record: i,
                expected: dim,
                actual: r.embedding.len(),
            }
            .into());
        }
        if r.embedding.iter().any(|v| !v.is_finite()) {
            return Err(invalid(i, "non-finite embedding value".into()));
        }
        if r.golden.is_some_and(|g| !g.is_finite()) {
            return Err(invalid(i, "non-finite golden score".into()));
        }
    }
    Ok(())
}

fn read_u32(bytes: &[u8], off: usize) -> u32 {
    u32::from_le_bytes(bytes[off..off + 4].try_into().unwrap())
}

fn read_u64(bytes: &[u8], off: usize) -> u64 {
    u64::from_le_bytes(bytes[off..off + 8].try_into().unwrap())
}

fn read_text(texts: &[u8], offset: u64) -> std::result::Result<String, String> {
    let start = usize::try_from(offset).map_err(|_| "text offset out of range".to_string())?;
    let len_end = start.checked_add(4).filter(|e| *e <= texts.len()).ok_or("text offset out of range")?;
    let len = read_u32(texts, start) as usize;
    let end = len_end.checked_add(len).filter(|e| *e <= texts.len()).ok_or("text runs past section end")?;
    String::from_utf8(texts[len_end..end].to_vec()).map_err(|_| "text is not valid UTF-8".to_string())
}
