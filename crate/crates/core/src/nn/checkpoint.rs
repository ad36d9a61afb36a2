//! Model persistence: architecture, parameters, batch norm state and the
//! training configuration in one JSON file.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::model::{CnnModel, LayerNode, LayerSpec};
use super::train::TrainConfig;
use crate::error::{Error, Result};

pub const CHECKPOINT_FORMAT: &str = "wavenet-ndt/model";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
struct BnStateFile {
    running_mean: Vec<f64>,
    running_var: Vec<f64>,
    momentum: f64,
    eps: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct CheckpointFile {
    format: String,
    version: u32,
    arch: Vec<LayerSpec>,
    input_len: usize,
    params: BTreeMap<String, BTreeMap<String, Vec<f64>>>,
    bn_state: BTreeMap<String, BnStateFile>,
    train_config: TrainConfig,
}

fn layer_key(index: usize) -> String {
    format!("layer{index:02}")
}

/// Write a checkpoint. Keys are sorted and floats serialized at full
/// round-trip precision, so identical models produce identical bytes.
pub fn save_checkpoint(model: &CnnModel, cfg: &TrainConfig, path: &Path) -> Result<()> {
    let mut params = BTreeMap::new();
    let mut bn_state = BTreeMap::new();
    for (i, layer) in model.layers().iter().enumerate() {
        let views = layer.params();
        if !views.is_empty() {
            let mut entry = BTreeMap::new();
            for view in views {
                entry.insert(view.kind.name().to_string(), view.data.to_vec());
            }
            params.insert(layer_key(i), entry);
        }
        if let LayerNode::BatchNorm(bn) = layer {
            let (mean, var) = bn.running_stats();
            bn_state.insert(
                layer_key(i),
                BnStateFile {
                    running_mean: mean.to_vec(),
                    running_var: var.to_vec(),
                    momentum: bn.momentum,
                    eps: bn.eps,
                },
            );
        }
    }
    let file = CheckpointFile {
        format: CHECKPOINT_FORMAT.to_string(),
        version: CHECKPOINT_VERSION,
        arch: model.specs(),
        input_len: model.input_len(),
        params,
        bn_state,
        train_config: *cfg,
    };
    let json = serde_json::to_string(&file)?;
    std::fs::write(path, json)?;
    Ok(())
}

/// Rebuild a model from a checkpoint; predictions are bit-identical to
/// the saved model's.
pub fn load_checkpoint(path: &Path) -> Result<(CnnModel, TrainConfig)> {
    let text = std::fs::read_to_string(path)?;
    let file: CheckpointFile = serde_json::from_str(&text).map_err(|_| {
        Error::FormatVersionMismatch {
            expected: format!("{CHECKPOINT_FORMAT} v{CHECKPOINT_VERSION}"),
            found: "unrecognized file".into(),
        }
    })?;
    if file.format != CHECKPOINT_FORMAT || file.version != CHECKPOINT_VERSION {
        return Err(Error::FormatVersionMismatch {
            expected: format!("{CHECKPOINT_FORMAT} v{CHECKPOINT_VERSION}"),
            found: format!("{} v{}", file.format, file.version),
        });
    }
    let mut model = CnnModel::from_specs(&file.arch, file.input_len, 0)?;
    for (i, layer) in model.layers_mut().iter_mut().enumerate() {
        let key = layer_key(i);
        {
            let mut slots = layer.params_mut();
            if !slots.is_empty() {
                let entry = file
                    .params
                    .get(&key)
                    .ok_or_else(|| Error::Parse(format!("missing parameters for {key}")))?;
                for slot in slots.iter_mut() {
                    let values = entry.get(slot.kind.name()).ok_or_else(|| {
                        Error::Parse(format!("missing {} for {key}", slot.kind.name()))
                    })?;
                    if values.len() != slot.data.len() {
                        return Err(Error::ShapeMismatch(format!(
                            "{key}/{} has {} values, expected {}",
                            slot.kind.name(),
                            values.len(),
                            slot.data.len()
                        )));
                    }
                    slot.data.copy_from_slice(values);
                }
            }
        }
        if let LayerNode::BatchNorm(bn) = layer {
            let state = file
                .bn_state
                .get(&key)
                .ok_or_else(|| Error::Parse(format!("missing batch norm state for {key}")))?;
            bn.set_running_stats(&state.running_mean, &state.running_var)?;
            bn.momentum = state.momentum;
            bn.eps = state.eps;
        }
    }
    Ok((model, file.train_config))
}
