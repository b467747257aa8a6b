//! Binary model checkpoints.
//!
//! Layout (all integers little-endian):
//!
//! | offset | size | field                                   |
//! |--------|------|-----------------------------------------|
//! | 0      | 8    | magic `b"PDRMCKPT"`                     |
//! | 8      | 4    | format version (`1`)                    |
//! | 12     | 4    | input_dim                               |
//! | 16     | 4    | hidden width H                          |
//! | 20     | 4    | hidden layer count (`3`)                |
//! | 24     | 8    | parameter count                         |
//! | 32     | 4·n  | parameters as f32, in the order W1 b1 W2 b2 W3 b3 head |
//!
//! Weight matrices are row-major with one row per output unit. Parameters are
//! narrowed to f32 on write, so a reloaded model agrees with the in-memory one
//! only to single precision.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{FormatError, Result};
use crate::model::{RewardModel, HIDDEN_LAYERS};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"PDRMCKPT";
pub const CHECKPOINT_VERSION: u32 = 1;
const HEADER_LEN: u64 = 32;

pub fn write_checkpoint<W: Write>(model: &RewardModel, mut out: W) -> Result<()> {
    out.write_all(CHECKPOINT_MAGIC)?;
    out.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
    out.write_all(&(model.input_dim() as u32).to_le_bytes())?;
    out.write_all(&(model.hidden() as u32).to_le_bytes())?;
    out.write_all(&(HIDDEN_LAYERS as u32).to_le_bytes())?;
    out.write_all(&(model.num_params() as u64).to_le_bytes())?;
    for p in model.params() {
        out.write_all(&(*p as f32).to_le_bytes())?;
    }
    Ok(())
}

pub fn read_checkpoint<R: Read>(mut input: R) -> Result<RewardModel> {
    let mut header = [0u8; HEADER_LEN as usize];
    read_exact_at(&mut input, &mut header, 0)?;
    if &header[..8] != CHECKPOINT_MAGIC {
        return Err(FormatError::BadMagic {
            found: header[..8].to_vec(),
        }
        .into());
    }
    let u32_at = |o: usize| u32::from_le_bytes(header[o..o + 4].try_into().unwrap());
    let version = u32_at(8);
    if version != CHECKPOINT_VERSION {
        return Err(FormatError::UnsupportedVersion(version).into());
    }
    let input_dim = u32_at(12) as usize;
    let hidden = u32_at(16) as usize;
    let layers = u32_at(20) as usize;
    let count = u64::from_le_bytes(header[24..32].try_into().unwrap());
    if layers != HIDDEN_LAYERS {
        return Err(FormatError::CorruptHeader(format!("unsupported layer count {layers}")).into());
    }
    if input_dim == 0 || hidden == 0 {
        return Err(FormatError::CorruptHeader("zero dimension".into()).into());
    }
    // W1|b1|W2|b2|W3|b3|head, computed without allocating so absurd headers
    // fail fast.
    let expected = hidden
        .checked_mul(input_dim)
        .and_then(|w1| hidden.checked_mul(hidden)?.checked_mul(2)?.checked_add(w1))
        .and_then(|n| n.checked_add(4 * hidden))
        .map(|n| n as u64);
    if Some(count) != expected {
        return Err(FormatError::CorruptHeader(format!(
            "parameter count {count} does not match architecture ({expected:?})"
        ))
        .into());
    }
    let needed = count * 4;
    let mut raw = Vec::new();
    input.take(needed).read_to_end(&mut raw)?;
    if (raw.len() as u64) < needed {
        return Err(FormatError::Truncated {
            offset: HEADER_LEN,
            needed,
            available: raw.len() as u64,
        }
        .into());
    }
    let params = raw
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
        .collect();
    RewardModel::from_params(input_dim, hidden, params)
}

fn read_exact_at<R: Read>(input: &mut R, buf: &mut [u8], offset: u64) -> Result<()> {
    let mut filled = 0;
    while filled < buf.len() {
        match input.read(&mut buf[filled..])? {
            0 => {
                return Err(FormatError::Truncated {
                    offset,
                    needed: buf.len() as u64,
                    available: filled as u64,
                }
                .into())
            }
            n => filled += n,
        }
    }
    Ok(())
}

pub fn save_checkpoint(model: &RewardModel, path: &Path) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    write_checkpoint(model, &mut out)?;
    out.flush()?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<RewardModel> {
    read_checkpoint(BufReader::new(File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;

    #[test]
    fn round_trip_is_byte_stable() {
        let m = RewardModel::init(4, 6, 11);
        let mut a = Vec::new();
        write_checkpoint(&m, &mut a).unwrap();
        assert_eq!(a.len() as u64, HEADER_LEN + 4 * m.num_params() as u64);
        let loaded = read_checkpoint(a.as_slice()).unwrap();
        let mut b = Vec::new();
        write_checkpoint(&loaded, &mut b).unwrap();
        assert_eq!(a, b);
        for (x, y) in m.params().iter().zip(loaded.params()) {
            assert_eq!(*x as f32, *y as f32);
        }
    }

    #[test]
    fn corrupt_inputs_are_rejected() {
        let m = RewardModel::init(2, 3, 0);
        let mut bytes = Vec::new();
        write_checkpoint(&m, &mut bytes).unwrap();

        let mut bad_magic = bytes.clone();
        bad_magic[0] = b'X';
        assert!(matches!(
            read_checkpoint(bad_magic.as_slice()),
            Err(Error::Format(FormatError::BadMagic { .. }))
        ));

        let truncated = &bytes[..bytes.len() - 3];
        assert!(matches!(
            read_checkpoint(truncated),
            Err(Error::Format(FormatError::Truncated { offset: 32, .. }))
        ));

        let mut bad_version = bytes.clone();
        bad_version[8] = 9;
        assert!(matches!(
            read_checkpoint(bad_version.as_slice()),
            Err(Error::Format(FormatError::UnsupportedVersion(9)))
        ));
    }
}
