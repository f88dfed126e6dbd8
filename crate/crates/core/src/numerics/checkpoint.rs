//! On-disk parameter checkpoints.
//!
//! A checkpoint is a directory holding `manifest.json` (format tag, param
//! names, shapes and step counts) and one binary file per parameter: the
//! 8-byte magic `CMLCKPT1` followed by the values as little-endian `f64`.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::param::Parameterized;
use super::tensor::Tensor2;
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"CMLCKPT1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamEntry {
    pub name: String,
    pub shape: [usize; 2],
    pub step_count: u64,
    pub file: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub params: Vec<ParamEntry>,
}

fn file_name(index: usize, name: &str) -> String {
    let clean: String = name
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() { c } else { '_' })
        .collect();
    format!("{index:03}_{clean}.bin")
}

pub fn save_checkpoint<M: Parameterized + ?Sized>(model: &M, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut entries = Vec::new();
    for (i, p) in model.params().into_iter().enumerate() {
        let file = file_name(i, &p.name);
        let mut bytes = Vec::with_capacity(8 + 8 * p.len());
        bytes.extend_from_slice(CHECKPOINT_MAGIC);
        for v in p.value.as_slice() {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        let path = dir.join(&file);
        fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
        let (r, c) = p.shape();
        entries.push(ParamEntry {
            name: p.name.clone(),
            shape: [r, c],
            step_count: p.step_count,
            file,
        });
    }
    let manifest = Manifest {
        format: String::from_utf8_lossy(CHECKPOINT_MAGIC).into_owned(),
        params: entries,
    };
    let path = dir.join("manifest.json");
    let text = serde_json::to_string_pretty(&manifest)?;
    fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))
}

/// Reads a checkpoint into `model`. Names and shapes must match exactly.
pub fn load_checkpoint<M: Parameterized + ?Sized>(model: &mut M, dir: &Path) -> Result<()> {
    let path = dir.join("manifest.json");
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let manifest: Manifest = serde_json::from_str(&text)?;
    if manifest.format.as_bytes() != CHECKPOINT_MAGIC {
        return Err(Error::Data(format!("unsupported checkpoint format `{}`", manifest.format)));
    }
    let mut params = model.params_mut();
    if params.len() != manifest.params.len() {
        return Err(Error::Data(format!(
            "checkpoint has {} params, model has {}",
            manifest.params.len(),
            params.len()
        )));
    }
    for (p, entry) in params.iter_mut().zip(&manifest.params) {
        let [r, c] = entry.shape;
        if p.name != entry.name || p.shape() != (r, c) {
            return Err(Error::Data(format!(
                "checkpoint param `{}` {:?} does not match model param `{}` {:?}",
                entry.name,
                entry.shape,
                p.name,
                p.shape()
            )));
        }
        let path = dir.join(&entry.file);
        let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
        if bytes.len() != 8 + 8 * r * c || &bytes[..8] != CHECKPOINT_MAGIC {
            return Err(Error::Data(format!("corrupt checkpoint file {}", path.display())));
        }
        let values = bytes[8..]
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().expect("8-byte chunk")))
            .collect();
        p.set_value(Tensor2::new(r, c, values)?)?;
        p.step_count = entry.step_count;
    }
    Ok(())
}
