//! CIFAR-10 binary ingestion.
//!
//! Each record is 1 label byte followed by 3072 pixel bytes (R, G, B
//! planes, row-major, 32x32). Pixels are scaled to [0, 1] and then
//! standardized per channel with the constants recorded in the config.

use std::fs;
use std::io::Read;
use std::path::Path;

use super::{Example, LabeledSet};
use crate::error::{Error, Result};

pub const CHANNELS: usize = 3;
pub const HEIGHT: usize = 32;
pub const WIDTH: usize = 32;
pub const PIXELS: usize = CHANNELS * HEIGHT * WIDTH;
pub const RECORD_BYTES: usize = 1 + PIXELS;
pub const CLASSES: usize = 10;

fn read_records(
    path: &Path,
    mean: &[f64; 3],
    std: &[f64; 3],
    examples: &mut Vec<Example>,
) -> Result<()> {
    let mut bytes = Vec::new();
    fs::File::open(path)?.read_to_end(&mut bytes)?;
    if bytes.is_empty() || bytes.len() % RECORD_BYTES != 0 {
        return Err(Error::invalid(format!(
            "{}: {} bytes is not a whole number of {RECORD_BYTES}-byte records",
            path.display(),
            bytes.len()
        )));
    }
    for record in bytes.chunks_exact(RECORD_BYTES) {
        let label = record[0] as usize;
        if label >= CLASSES {
            return Err(Error::LabelOutOfRange {
                label,
                classes: CLASSES,
            });
        }
        let mut input = Vec::with_capacity(PIXELS);
        for c in 0..CHANNELS {
            let plane = &record[1 + c * HEIGHT * WIDTH..1 + (c + 1) * HEIGHT * WIDTH];
            for &p in plane {
                input.push((p as f64 / 255.0 - mean[c]) / std[c]);
            }
        }
        examples.push(Example { input, label });
    }
    Ok(())
}

/// Load a CIFAR binary directory: `data_batch_*.bin` become the training
/// set, `test_batch.bin` (when present) the test set.
pub fn load_dir(dir: &Path, mean: &[f64; 3], std: &[f64; 3]) -> Result<(LabeledSet, Option<LabeledSet>)> {
    let mut train_files: Vec<_> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .map(|n| n.starts_with("data_batch") && n.ends_with(".bin"))
                .unwrap_or(false)
        })
        .collect();
    train_files.sort();
    if train_files.is_empty() {
        return Err(Error::invalid(format!(
            "{}: no data_batch_*.bin files",
            dir.display()
        )));
    }
    let mut train = Vec::new();
    for f in &train_files {
        read_records(f, mean, std, &mut train)?;
    }
    let train = LabeledSet {
        examples: train,
        input_dims: vec![CHANNELS, HEIGHT, WIDTH],
        classes: CLASSES,
    };

    let test_path = dir.join("test_batch.bin");
    let test = if test_path.exists() {
        let mut examples = Vec::new();
        read_records(&test_path, mean, std, &mut examples)?;
        Some(LabeledSet {
            examples,
            input_dims: vec![CHANNELS, HEIGHT, WIDTH],
            classes: CLASSES,
        })
    } else {
        None
    };
    Ok((train, test))
}
