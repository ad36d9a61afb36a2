//! Adaptive-moment optimizer with bias correction.

use super::model::CnnModel;

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPSILON: f64 = 1e-8;

/// One update of a parameter slice in place. `t` is the 1-based step
/// counter shared by all parameters.
pub fn adam_update(param: &mut [f64], grad: &[f64], m: &mut [f64], v: &mut [f64], t: u64, lr: f64) {
    debug_assert!(t >= 1);
    let bc1 = 1.0 - BETA1.powi(t as i32);
    let bc2 = 1.0 - BETA2.powi(t as i32);
    for i in 0..param.len() {
        m[i] = BETA1 * m[i] + (1.0 - BETA1) * grad[i];
        v[i] = BETA2 * v[i] + (1.0 - BETA2) * grad[i] * grad[i];
        let m_hat = m[i] / bc1;
        let v_hat = v[i] / bc2;
        param[i] -= lr * m_hat / (v_hat.sqrt() + EPSILON);
    }
}

/// Optimizer state for a whole model: first/second moments per parameter
/// tensor, allocated on the first step in the model's parameter order.
#[derive(Debug, Clone)]
pub struct Adam {
    pub learning_rate: f64,
    t: u64,
    moments: Vec<(Vec<f64>, Vec<f64>)>,
}

impl Adam {
    pub fn new(learning_rate: f64) -> Self {
        Self { learning_rate, t: 0, moments: Vec::new() }
    }

    pub fn step_count(&self) -> u64 {
        self.t
    }

    /// Apply one step to every parameter. Weight tensors get the L2
    /// gradient term 2 * lambda * w added first; biases and batch norm
    /// parameters are not regularized.
    pub fn step(&mut self, model: &mut CnnModel, l2_lambda: f64) {
        self.t += 1;
        let mut slot_idx = 0;
        for layer in model.layers_mut() {
            for slot in layer.params_mut() {
                if self.moments.len() == slot_idx {
                    self.moments.push((vec![0.0; slot.data.len()], vec![0.0; slot.data.len()]));
                }
                let (m, v) = &mut self.moments[slot_idx];
                if l2_lambda > 0.0 && slot.kind.is_regularized() {
                    for (g, w) in slot.grad.iter_mut().zip(slot.data.iter()) {
                        *g += 2.0 * l2_lambda * w;
                    }
                }
                adam_update(slot.data, slot.grad, m, v, self.t, self.learning_rate);
                slot_idx += 1;
            }
        }
    }
}
