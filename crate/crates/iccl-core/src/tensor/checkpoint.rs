//! Versioned binary checkpoint container.
//!
//! Layout: the magic string `ICCL1`, then one record per named tensor:
//!
//! ```text
//! name_len: u32 LE | name: UTF-8 | rank: u32 LE | dims: u32 LE each | values: f64 LE each
//! ```
//!
//! Records are written in insertion order, so save -> load -> save is
//! byte-identical. Centroid-bank tensors live under the reserved `centroid/`
//! prefix and optimizer state under `opt/`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 5] = b"ICCL1";

pub const CENTROID_PREFIX: &str = "centroid/";
pub const OPT_PREFIX: &str = "opt/";

/// One named tensor inside a checkpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub name: String,
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
}

impl Entry {
    pub fn new(name: impl Into<String>, shape: Vec<usize>, values: Vec<f64>) -> Entry {
        Entry {
            name: name.into(),
            shape,
            values,
        }
    }
}

pub fn save(path: &Path, entries: &[Entry]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    for e in entries {
        let numel: usize = e.shape.iter().product();
        if numel != e.values.len() {
            return Err(Error::Checkpoint(format!(
                "{}: shape {:?} does not hold {} values",
                e.name,
                e.shape,
                e.values.len()
            )));
        }
        w.write_u32::<LittleEndian>(e.name.len() as u32)?;
        w.write_all(e.name.as_bytes())?;
        w.write_u32::<LittleEndian>(e.shape.len() as u32)?;
        for &d in &e.shape {
            w.write_u32::<LittleEndian>(d as u32)?;
        }
        for &v in &e.values {
            w.write_f64::<LittleEndian>(v)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Read a u32 or detect a clean end-of-file. A partial read is a
/// truncation error.
fn read_u32_or_eof(r: &mut impl Read) -> Result<Option<u32>> {
    let mut buf = [0u8; 4];
    let mut filled = 0;
    while filled < 4 {
        let n = r.read(&mut buf[filled..])?;
        if n == 0 {
            if filled == 0 {
                return Ok(None);
            }
            return Err(Error::Checkpoint("truncated record header".into()));
        }
        filled += n;
    }
    Ok(Some(u32::from_le_bytes(buf)))
}

pub fn load(path: &Path) -> Result<Vec<Entry>> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 5];
    r.read_exact(&mut magic)
        .map_err(|_| Error::Checkpoint("file too short for magic".into()))?;
    if &magic != MAGIC {
        return Err(Error::Checkpoint(format!(
            "bad magic {:?}, expected {:?}",
            String::from_utf8_lossy(&magic),
            String::from_utf8_lossy(MAGIC)
        )));
    }

    let mut entries = Vec::new();
    while let Some(name_len) = read_u32_or_eof(&mut r)? {
        let mut name_buf = vec![0u8; name_len as usize];
        r.read_exact(&mut name_buf)
            .map_err(|_| Error::Checkpoint("truncated name".into()))?;
        let name = String::from_utf8(name_buf)
            .map_err(|_| Error::Checkpoint("name is not UTF-8".into()))?;
        let rank = r
            .read_u32::<LittleEndian>()
            .map_err(|_| Error::Checkpoint(format!("{name}: truncated rank")))?;
        if rank > 8 {
            return Err(Error::Checkpoint(format!("{name}: implausible rank {rank}")));
        }
        let mut shape = Vec::with_capacity(rank as usize);
        let mut numel: usize = 1;
        for _ in 0..rank {
            let d = r
                .read_u32::<LittleEndian>()
                .map_err(|_| Error::Checkpoint(format!("{name}: truncated dims")))? as usize;
            numel = numel.saturating_mul(d);
            shape.push(d);
        }
        if numel > (1 << 30) {
            return Err(Error::Checkpoint(format!(
                "{name}: implausible element count {numel}"
            )));
        }
        let mut values = Vec::with_capacity(numel);
        for _ in 0..numel {
            values.push(
                r.read_f64::<LittleEndian>()
                    .map_err(|_| Error::Checkpoint(format!("{name}: truncated values")))?,
            );
        }
        entries.push(Entry { name, shape, values });
    }
    Ok(entries)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_entries() -> Vec<Entry> {
        vec![
            Entry::new("encoder/0/weight", vec![2, 3], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]),
            Entry::new("centroid/means", vec![2, 2], vec![1.0, 0.0, 0.0, 1.0]),
            Entry::new("opt/encoder/0/weight", vec![2, 3], vec![0.0; 6]),
        ]
    }

    #[test]
    fn save_load_save_is_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let p1 = dir.path().join("a.ckpt");
        let p2 = dir.path().join("b.ckpt");
        let entries = sample_entries();
        save(&p1, &entries).unwrap();
        let loaded = load(&p1).unwrap();
        assert_eq!(loaded, entries);
        save(&p2, &loaded).unwrap();
        assert_eq!(std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());
    }

    #[test]
    fn tampered_magic_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.ckpt");
        save(&p, &sample_entries()).unwrap();
        let mut bytes = std::fs::read(&p).unwrap();
        bytes[0] = b'X';
        std::fs::write(&p, &bytes).unwrap();
        let err = load(&p).unwrap_err().to_string();
        assert!(err.contains("bad magic"), "{err}");
    }

    #[test]
    fn truncation_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.ckpt");
        save(&p, &sample_entries()).unwrap();
        let bytes = std::fs::read(&p).unwrap();
        std::fs::write(&p, &bytes[..bytes.len() - 3]).unwrap();
        let err = load(&p).unwrap_err().to_string();
        assert!(err.contains("truncated"), "{err}");
    }
}
