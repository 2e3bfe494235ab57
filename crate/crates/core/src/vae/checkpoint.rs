use std::collections::BTreeMap;
use std::path::Path;

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use serde::{Deserialize, Serialize};

use super::layers::{Param, ParamStore};
use super::model::VaeModel;
use super::spec::{NetworkSpec, Variant};
use crate::error::{Error, Result};

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct ArrayRecord {
    shape: Vec<usize>,
    dtype: String,
    data: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct CheckpointFile {
    format_version: u32,
    spec: NetworkSpec,
    /// Parameter names in model order; `arrays` is keyed by name.
    order: Vec<String>,
    arrays: BTreeMap<String, ArrayRecord>,
}

pub fn save_checkpoint(model: &VaeModel) -> Vec<u8> {
    let mut arrays = BTreeMap::new();
    let mut order = Vec::new();
    for p in &model.params().params {
        let mut bytes = Vec::with_capacity(p.data.len() * 4);
        for v in &p.data {
            bytes.extend_from_slice(&(*v as f32).to_le_bytes());
        }
        order.push(p.name.clone());
        arrays.insert(
            p.name.clone(),
            ArrayRecord {
                shape: p.shape.clone(),
                dtype: "f32".into(),
                data: STANDARD.encode(bytes),
            },
        );
    }
    let file = CheckpointFile {
        format_version: CHECKPOINT_VERSION,
        spec: model.spec().clone(),
        order,
        arrays,
    };
    serde_json::to_vec(&file).expect("checkpoint serializes")
}

pub fn load_checkpoint(bytes: &[u8]) -> Result<VaeModel> {
    let value: serde_json::Value = serde_json::from_slice(bytes).map_err(|e| Error::CorruptPayload(e.to_string()))?;
    match value.get("format_version").and_then(|v| v.as_u64()) {
        Some(v) if v == CHECKPOINT_VERSION as u64 => {}
        Some(v) => {
            return Err(Error::VersionMismatch(format!(
                "checkpoint format {v}, expected {CHECKPOINT_VERSION}"
            )))
        }
        None => return Err(Error::CorruptPayload("missing format_version".into())),
    }
    let file: CheckpointFile = serde_json::from_value(value).map_err(|e| Error::CorruptPayload(e.to_string()))?;
    let mut store = ParamStore::default();
    for name in &file.order {
        let rec = file
            .arrays
            .get(name)
            .ok_or_else(|| Error::CorruptPayload(format!("missing array {name}")))?;
        if rec.dtype != "f32" {
            return Err(Error::CorruptPayload(format!("array {name} has dtype {}", rec.dtype)));
        }
        let bytes = STANDARD
            .decode(&rec.data)
            .map_err(|e| Error::CorruptPayload(format!("array {name}: {e}")))?;
        let n: usize = rec.shape.iter().product();
        if bytes.len() != n * 4 {
            return Err(Error::CorruptPayload(format!(
                "array {name} holds {} bytes, shape needs {}",
                bytes.len(),
                n * 4
            )));
        }
        let data = bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
            .collect();
        store.params.push(Param {
            name: name.clone(),
            shape: rec.shape.clone(),
            data,
            trainable: !name.ends_with("running_mean") && !name.ends_with("running_var"),
        });
    }
    let model = VaeModel::from_parts(file.spec, store)?;
    if !model.params().all_finite() {
        return Err(Error::CorruptPayload("non-finite parameter".into()));
    }
    Ok(model)
}

/// Loads a checkpoint and checks it holds the expected network variant.
pub fn load_checkpoint_as(bytes: &[u8], variant: Variant) -> Result<VaeModel> {
    let model = load_checkpoint(bytes)?;
    if model.spec().variant != variant {
        return Err(Error::VersionMismatch(format!(
            "checkpoint holds a {:?} network, expected {variant:?}",
            model.spec().variant
        )));
    }
    Ok(model)
}

pub fn save_checkpoint_file(model: &VaeModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, save_checkpoint(model)).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

pub fn load_checkpoint_file(path: impl AsRef<Path>) -> Result<VaeModel> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    load_checkpoint(&bytes).map_err(|e| Error::in_file(path.display().to_string(), e))
}
