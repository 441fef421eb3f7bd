//! Model checkpoints: a single JSON document holding the dimensions and
//! every parameter group as a flat row-major array, keyed by the stable
//! group names. Writes are deterministic (sorted keys, shortest-roundtrip
//! floats), so identical models produce identical files.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::SiameseModel;
use crate::error::{Error, Result};

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CheckpointFile {
    version: u32,
    hidden: usize,
    embed: usize,
    vocab: usize,
    params: BTreeMap<String, Vec<f64>>,
}

pub fn save_model(model: &SiameseModel, path: &Path) -> Result<()> {
    let params: BTreeMap<String, Vec<f64>> = SiameseModel::slice_names()
        .into_iter()
        .zip(model.param_slices())
        .map(|(name, slice)| (name.to_string(), slice.to_vec()))
        .collect();
    let file = CheckpointFile {
        version: CHECKPOINT_VERSION,
        hidden: model.hidden_size(),
        embed: model.embed_size(),
        vocab: model.vocab_size(),
        params,
    };
    let out = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut writer = BufWriter::new(out);
    serde_json::to_writer(&mut writer, &file)
        .map_err(|e| Error::Checkpoint(format!("writing {}: {e}", path.display())))?;
    writer.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    writer.flush().map_err(|e| Error::io(path, e))
}

pub fn load_model(path: &Path) -> Result<SiameseModel> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let parsed: CheckpointFile = serde_json::from_reader(BufReader::new(file))
        .map_err(|e| Error::Checkpoint(format!("parsing {}: {e}", path.display())))?;
    if parsed.version != CHECKPOINT_VERSION {
        return Err(Error::Checkpoint(format!(
            "checkpoint version {} unsupported (expected {CHECKPOINT_VERSION})",
            parsed.version
        )));
    }

    let mut model = SiameseModel::zeros(parsed.hidden, parsed.embed, parsed.vocab)?;
    let names = SiameseModel::slice_names();
    for key in parsed.params.keys() {
        if !names.contains(&key.as_str()) {
            return Err(Error::Checkpoint(format!("unknown parameter group {key:?}")));
        }
    }
    for (name, slice) in names.iter().zip(model.param_slices_mut()) {
        let values = parsed
            .params
            .get(*name)
            .ok_or_else(|| Error::Checkpoint(format!("missing parameter group {name:?}")))?;
        if values.len() != slice.len() {
            return Err(Error::Checkpoint(format!(
                "parameter group {name:?} has {} values, expected {}",
                values.len(),
                slice.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Checkpoint(format!(
                "parameter group {name:?} contains non-finite values"
            )));
        }
        slice.copy_from_slice(values);
    }
    Ok(model)
}
