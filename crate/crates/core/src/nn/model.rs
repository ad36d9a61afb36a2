//! Layer stack assembly and whole-model passes.

use ndarray::{Array2, Array3};
use serde::{Deserialize, Serialize};

use super::layers::{BatchNorm1d, Conv1d, Dense, Dropout, Flatten, ParamSlot, ParamView, Relu};
use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::seeding::{stream, Domain};

/// Architecture description; serializable so checkpoints can rebuild the
/// stack. Convolutions are same-padding with odd kernels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayerSpec {
    Conv1d { in_channels: usize, out_channels: usize, kernel_size: usize },
    BatchNorm { channels: usize },
    Relu,
    Dropout { rate: f64 },
    Flatten,
    Dense { in_dim: usize, out_dim: usize },
}

#[derive(Debug, Clone)]
pub enum LayerNode {
    Conv1d(Conv1d),
    BatchNorm(BatchNorm1d),
    Relu(Relu),
    Dropout(Dropout),
    Flatten(Flatten),
    Dense(Dense),
}

impl LayerNode {
    pub fn spec(&self) -> LayerSpec {
        match self {
            LayerNode::Conv1d(l) => LayerSpec::Conv1d {
                in_channels: l.in_channels,
                out_channels: l.out_channels,
                kernel_size: l.kernel_size,
            },
            LayerNode::BatchNorm(l) => LayerSpec::BatchNorm { channels: l.channels },
            LayerNode::Relu(_) => LayerSpec::Relu,
            LayerNode::Dropout(l) => LayerSpec::Dropout { rate: l.rate },
            LayerNode::Flatten(_) => LayerSpec::Flatten,
            LayerNode::Dense(l) => LayerSpec::Dense { in_dim: l.in_dim, out_dim: l.out_dim },
        }
    }

    fn forward_train(&mut self, x: Tensor) -> Result<Tensor> {
        match self {
            LayerNode::Conv1d(l) => l.forward_train(x),
            LayerNode::BatchNorm(l) => l.forward_train(x),
            LayerNode::Relu(l) => l.forward_train(x),
            LayerNode::Dropout(l) => l.forward_train(x),
            LayerNode::Flatten(l) => l.forward_train(x),
            LayerNode::Dense(l) => l.forward_train(x),
        }
    }

    fn infer(&self, x: &Tensor) -> Result<Tensor> {
        match self {
            LayerNode::Conv1d(l) => l.infer(x),
            LayerNode::BatchNorm(l) => l.infer(x),
            LayerNode::Relu(l) => l.infer(x),
            LayerNode::Dropout(l) => l.infer(x),
            LayerNode::Flatten(l) => l.infer(x),
            LayerNode::Dense(l) => l.infer(x),
        }
    }

    fn backward(&mut self, grad: Tensor) -> Result<Tensor> {
        match self {
            LayerNode::Conv1d(l) => l.backward(grad),
            LayerNode::BatchNorm(l) => l.backward(grad),
            LayerNode::Relu(l) => l.backward(grad),
            LayerNode::Dropout(l) => l.backward(grad),
            LayerNode::Flatten(l) => l.backward(grad),
            LayerNode::Dense(l) => l.backward(grad),
        }
    }

    pub fn params_mut(&mut self) -> Vec<ParamSlot<'_>> {
        match self {
            LayerNode::Conv1d(l) => l.params_mut(),
            LayerNode::BatchNorm(l) => l.params_mut(),
            LayerNode::Dense(l) => l.params_mut(),
            _ => Vec::new(),
        }
    }

    pub fn params(&self) -> Vec<ParamView<'_>> {
        match self {
            LayerNode::Conv1d(l) => l.params(),
            LayerNode::BatchNorm(l) => l.params(),
            LayerNode::Dense(l) => l.params(),
            _ => Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum ChainShape {
    R3 { channels: usize, len: usize },
    R2 { dim: usize },
}

/// Snapshot of everything that affects inference: parameters plus batch
/// norm running statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelState {
    params: Vec<Vec<Vec<f64>>>,
    bn_stats: Vec<Option<(Vec<f64>, Vec<f64>)>>,
}

/// Ordered layer stack operating on (batch, 1, input_len) profiles.
#[derive(Debug, Clone)]
pub struct CnnModel {
    layers: Vec<LayerNode>,
    input_len: usize,
    output_len: usize,
}

impl CnnModel {
    /// The conv stack used throughout: four same-padding convolutions
    /// with batch norm and ReLU, dropout, then a linear read-out layer.
    pub fn default_architecture(input_len: usize, dropout_rate: f64) -> Vec<LayerSpec> {
        vec![
            LayerSpec::Conv1d { in_channels: 1, out_channels: 16, kernel_size: 7 },
            LayerSpec::BatchNorm { channels: 16 },
            LayerSpec::Relu,
            LayerSpec::Conv1d { in_channels: 16, out_channels: 32, kernel_size: 7 },
            LayerSpec::BatchNorm { channels: 32 },
            LayerSpec::Relu,
            LayerSpec::Conv1d { in_channels: 32, out_channels: 32, kernel_size: 5 },
            LayerSpec::BatchNorm { channels: 32 },
            LayerSpec::Relu,
            LayerSpec::Conv1d { in_channels: 32, out_channels: 16, kernel_size: 5 },
            LayerSpec::BatchNorm { channels: 16 },
            LayerSpec::Relu,
            LayerSpec::Dropout { rate: dropout_rate },
            LayerSpec::Flatten,
            LayerSpec::Dense { in_dim: 16 * input_len, out_dim: input_len },
        ]
    }

    /// Build a model with He-initialized weights. The chain of shapes is
    /// validated from (1, input_len) through every layer.
    pub fn from_specs(specs: &[LayerSpec], input_len: usize, seed: u64) -> Result<Self> {
        if specs.is_empty() {
            return Err(Error::InvalidParameter("a model needs at least one layer".into()));
        }
        if input_len == 0 {
            return Err(Error::InvalidParameter("input_len must be > 0".into()));
        }
        let mut init_rng = stream(seed, Domain::ModelInit, 0);
        let mut shape = ChainShape::R3 { channels: 1, len: input_len };
        let mut layers = Vec::with_capacity(specs.len());
        for (idx, spec) in specs.iter().enumerate() {
            let mismatch = |expected: String| {
                Err(Error::ShapeMismatch(format!("layer {idx} ({spec:?}): {expected}")))
            };
            match *spec {
                LayerSpec::Conv1d { in_channels, out_channels, kernel_size } => {
                    let ChainShape::R3 { channels, len } = shape else {
                        return mismatch("convolution after flatten".into());
                    };
                    if channels != in_channels {
                        return mismatch(format!("expects {in_channels} channels, chain has {channels}"));
                    }
                    layers.push(LayerNode::Conv1d(Conv1d::new(
                        in_channels,
                        out_channels,
                        kernel_size,
                        &mut init_rng,
                    )?));
                    shape = ChainShape::R3 { channels: out_channels, len };
                }
                LayerSpec::BatchNorm { channels } => {
                    let ChainShape::R3 { channels: have, .. } = shape else {
                        return mismatch("batch norm after flatten".into());
                    };
                    if have != channels {
                        return mismatch(format!("expects {channels} channels, chain has {have}"));
                    }
                    layers.push(LayerNode::BatchNorm(BatchNorm1d::new(channels)?));
                }
                LayerSpec::Relu => layers.push(LayerNode::Relu(Relu::new())),
                LayerSpec::Dropout { rate } => {
                    let rng = stream(seed, Domain::Dropout, idx as u64);
                    layers.push(LayerNode::Dropout(Dropout::new(rate, rng)?));
                }
                LayerSpec::Flatten => {
                    let ChainShape::R3 { channels, len } = shape else {
                        return mismatch("flatten applied twice".into());
                    };
                    layers.push(LayerNode::Flatten(Flatten::new()));
                    shape = ChainShape::R2 { dim: channels * len };
                }
                LayerSpec::Dense { in_dim, out_dim } => {
                    let ChainShape::R2 { dim } = shape else {
                        return mismatch("dense layer needs a flattened input".into());
                    };
                    if dim != in_dim {
                        return mismatch(format!("expects width {in_dim}, chain has {dim}"));
                    }
                    layers.push(LayerNode::Dense(Dense::new(in_dim, out_dim, &mut init_rng)?));
                    shape = ChainShape::R2 { dim: out_dim };
                }
            }
        }
        let ChainShape::R2 { dim: output_len } = shape else {
            return Err(Error::ShapeMismatch(
                "the stack must end in a flattened (dense) output".into(),
            ));
        };
        Ok(Self { layers, input_len, output_len })
    }

    pub fn input_len(&self) -> usize {
        self.input_len
    }

    pub fn output_len(&self) -> usize {
        self.output_len
    }

    pub fn specs(&self) -> Vec<LayerSpec> {
        self.layers.iter().map(|l| l.spec()).collect()
    }

    pub fn layers_mut(&mut self) -> &mut [LayerNode] {
        &mut self.layers
    }

    pub fn layers(&self) -> &[LayerNode] {
        &self.layers
    }

    /// Training-mode pass: caches activations, applies dropout, updates
    /// batch norm running statistics.
    pub fn forward_train(&mut self, input: Array3<f64>) -> Result<Array2<f64>> {
        self.check_input_dims(input.dim().1, input.dim().2)?;
        let mut t = Tensor::R3(input);
        for layer in &mut self.layers {
            t = layer.forward_train(t)?;
        }
        t.into_r2()
    }

    /// Backward pass through the whole stack; parameter gradients are
    /// left in the layers for the optimizer to consume.
    pub fn backward(&mut self, grad_output: Array2<f64>) -> Result<()> {
        let mut g = Tensor::R2(grad_output);
        for layer in self.layers.iter_mut().rev() {
            g = layer.backward(g)?;
        }
        Ok(())
    }

    /// Inference pass on an immutable model: no caching, dropout off,
    /// batch norm running statistics. Safe to call from multiple threads.
    pub fn infer_batch(&self, input: &Array3<f64>) -> Result<Array2<f64>> {
        self.check_input_dims(input.dim().1, input.dim().2)?;
        let mut t = Tensor::R3(input.clone());
        for layer in &self.layers {
            t = layer.infer(&t)?;
        }
        t.into_r2()
    }

    /// Deterministic single-profile inference.
    pub fn predict(&self, input: &[f64]) -> Result<Vec<f64>> {
        if input.len() != self.input_len {
            return Err(Error::ShapeMismatch(format!(
                "predict expects {} entries, got {}",
                self.input_len,
                input.len()
            )));
        }
        let x = Array3::from_shape_vec((1, 1, self.input_len), input.to_vec())
            .expect("shape matches length");
        let out = self.infer_batch(&x)?;
        Ok(out.row(0).to_vec())
    }

    fn check_input_dims(&self, channels: usize, len: usize) -> Result<()> {
        if channels != 1 || len != self.input_len {
            return Err(Error::ShapeMismatch(format!(
                "model expects (batch, 1, {}), got (_, {channels}, {len})",
                self.input_len
            )));
        }
        Ok(())
    }

    /// Sum of squared weights (conv and dense kernels only) for the L2
    /// penalty.
    pub fn l2_weight_norm(&self) -> f64 {
        let mut total = 0.0;
        for layer in &self.layers {
            for view in layer.params() {
                if view.kind.is_regularized() {
                    total += view.data.iter().map(|w| w * w).sum::<f64>();
                }
            }
        }
        total
    }

    pub fn snapshot_state(&self) -> ModelState {
        let params = self
            .layers
            .iter()
            .map(|l| l.params().into_iter().map(|v| v.data.to_vec()).collect())
            .collect();
        let bn_stats = self
            .layers
            .iter()
            .map(|l| match l {
                LayerNode::BatchNorm(bn) => {
                    let (m, v) = bn.running_stats();
                    Some((m.to_vec(), v.to_vec()))
                }
                _ => None,
            })
            .collect();
        ModelState { params, bn_stats }
    }

    pub fn restore_state(&mut self, state: &ModelState) -> Result<()> {
        if state.params.len() != self.layers.len() {
            return Err(Error::ShapeMismatch("state layer count differs from model".into()));
        }
        for (layer, (params, bn)) in
            self.layers.iter_mut().zip(state.params.iter().zip(&state.bn_stats))
        {
            let mut slots = layer.params_mut();
            if slots.len() != params.len() {
                return Err(Error::ShapeMismatch("state parameter count differs".into()));
            }
            for (slot, values) in slots.iter_mut().zip(params) {
                if slot.data.len() != values.len() {
                    return Err(Error::ShapeMismatch("state parameter length differs".into()));
                }
                slot.data.copy_from_slice(values);
            }
            if let (LayerNode::BatchNorm(l), Some((m, v))) = (layer, bn) {
                l.set_running_stats(m, v)?;
            }
        }
        Ok(())
    }
}
