//! Self-describing dataset file emitted by `prepare` and consumed by
//! `train` / `eval`.
//!
//! Layout (all little-endian):
//!
//! ```text
//! magic "ICCLD1"
//! u32 classes
//! u32 rank | u32 dims...
//! u64 train_count | u64 test_count
//! u64 train class counts, one per class
//! train examples: u32 label | f64 values...
//! test examples:  u32 label | f64 values...
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use super::{Example, LabeledSet, LongTailedDataset};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 6] = b"ICCLD1";

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetFile {
    pub train: LongTailedDataset,
    pub test: LabeledSet,
}

pub fn save(path: &Path, train: &LongTailedDataset, test: &LabeledSet) -> Result<()> {
    if train.set.input_dims != test.input_dims || train.classes() != test.classes {
        return Err(Error::invalid(format!(
            "train and test set shapes disagree: {:?}/{} vs {:?}/{}",
            train.set.input_dims,
            train.classes(),
            test.input_dims,
            test.classes
        )));
    }
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_u32::<LittleEndian>(train.classes() as u32)?;
    w.write_u32::<LittleEndian>(train.set.input_dims.len() as u32)?;
    for &d in &train.set.input_dims {
        w.write_u32::<LittleEndian>(d as u32)?;
    }
    w.write_u64::<LittleEndian>(train.set.len() as u64)?;
    w.write_u64::<LittleEndian>(test.len() as u64)?;
    for &c in &train.class_counts {
        w.write_u64::<LittleEndian>(c as u64)?;
    }
    for e in train.set.examples.iter().chain(test.examples.iter()) {
        w.write_u32::<LittleEndian>(e.label as u32)?;
        for &v in &e.input {
            w.write_f64::<LittleEndian>(v)?;
        }
    }
    w.flush()?;
    Ok(())
}

fn read_examples(r: &mut impl Read, count: usize, input_len: usize) -> Result<Vec<Example>> {
    let mut examples = Vec::with_capacity(count);
    for _ in 0..count {
        let label = r
            .read_u32::<LittleEndian>()
            .map_err(|_| Error::Checkpoint("dataset file: truncated example".into()))?
            as usize;
        let mut input = Vec::with_capacity(input_len);
        for _ in 0..input_len {
            input.push(
                r.read_f64::<LittleEndian>()
                    .map_err(|_| Error::Checkpoint("dataset file: truncated example".into()))?,
            );
        }
        examples.push(Example { input, label });
    }
    Ok(examples)
}

pub fn load(path: &Path) -> Result<DatasetFile> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 6];
    r.read_exact(&mut magic)
        .map_err(|_| Error::Checkpoint("dataset file: too short for magic".into()))?;
    if &magic != MAGIC {
        return Err(Error::Checkpoint(format!(
            "dataset file: bad magic {:?}",
            String::from_utf8_lossy(&magic)
        )));
    }
    let classes = r.read_u32::<LittleEndian>()? as usize;
    let rank = r.read_u32::<LittleEndian>()? as usize;
    if classes == 0 || rank == 0 || rank > 8 {
        return Err(Error::Checkpoint(
            "dataset file: implausible header".into(),
        ));
    }
    let mut input_dims = Vec::with_capacity(rank);
    for _ in 0..rank {
        input_dims.push(r.read_u32::<LittleEndian>()? as usize);
    }
    let input_len: usize = input_dims.iter().product();
    let train_count = r.read_u64::<LittleEndian>()? as usize;
    let test_count = r.read_u64::<LittleEndian>()? as usize;
    let mut class_counts = Vec::with_capacity(classes);
    for _ in 0..classes {
        class_counts.push(r.read_u64::<LittleEndian>()? as usize);
    }

    let train_examples = read_examples(&mut r, train_count, input_len)?;
    let test_examples = read_examples(&mut r, test_count, input_len)?;

    let train = LongTailedDataset::from_set(LabeledSet {
        examples: train_examples,
        input_dims: input_dims.clone(),
        classes,
    })?;
    if train.class_counts != class_counts {
        return Err(Error::Checkpoint(format!(
            "dataset file: stored counts {class_counts:?} disagree with examples {:?}",
            train.class_counts
        )));
    }
    Ok(DatasetFile {
        train,
        test: LabeledSet {
            examples: test_examples,
            input_dims,
            classes,
        },
    })
}
