//! Layer implementations with hand-written forward and backward passes.
//!
//! Every layer exposes three entry points:
//! - `forward_train`: computes the output, caches what backward needs,
//!   and (for batch norm / dropout) applies training-time behavior;
//! - `infer`: pure output on `&self`, usable concurrently, no caching,
//!   running statistics instead of batch statistics, dropout disabled;
//! - `backward`: consumes the cached activations and fills the layer's
//!   parameter gradients while returning the input gradient.
//!
//! Convolution uses the cross-correlation convention (no kernel flip)
//! with zero-padded same-length output.

use ndarray::{Array1, Array2, Array3};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use super::tensor::Tensor;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamKind {
    Weight,
    Bias,
    Gamma,
    Beta,
}

impl ParamKind {
    pub fn name(self) -> &'static str {
        match self {
            ParamKind::Weight => "weight",
            ParamKind::Bias => "bias",
            ParamKind::Gamma => "gamma",
            ParamKind::Beta => "beta",
        }
    }

    /// Only weights enter the L2 penalty; biases and batch-norm scales do not.
    pub fn is_regularized(self) -> bool {
        self == ParamKind::Weight
    }
}

/// Mutable view over one parameter tensor and its gradient.
pub struct ParamSlot<'a> {
    pub kind: ParamKind,
    pub data: &'a mut [f64],
    pub grad: &'a mut [f64],
}

/// Read-only view over one parameter tensor.
pub struct ParamView<'a> {
    pub kind: ParamKind,
    pub data: &'a [f64],
}

// ---------------------------------------------------------------------
// Conv1d
// ---------------------------------------------------------------------

/// Same-padding 1D convolution (cross-correlation):
/// `out[b,o,i] = bias[o] + sum_{c,j} in[b,c,i+j-K/2] * w[o,c,j]`.
#[derive(Debug, Clone)]
pub struct Conv1d {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel_size: usize,
    weight: Array3<f64>,
    bias: Array1<f64>,
    grad_weight: Array3<f64>,
    grad_bias: Array1<f64>,
    cached_input: Option<Array3<f64>>,
}

impl Conv1d {
    pub fn new(in_channels: usize, out_channels: usize, kernel_size: usize, rng: &mut ChaCha8Rng) -> Result<Self> {
        if in_channels == 0 || out_channels == 0 {
            return Err(Error::InvalidParameter("conv channels must be > 0".into()));
        }
        if kernel_size.is_multiple_of(2) || kernel_size == 0 {
            return Err(Error::InvalidParameter(format!(
                "kernel_size must be odd for symmetric same padding, got {kernel_size}"
            )));
        }
        let fan_in = (in_channels * kernel_size) as f64;
        let std = (2.0 / fan_in).sqrt();
        let weight = Array3::from_shape_fn((out_channels, in_channels, kernel_size), |_| {
            let n: f64 = StandardNormal.sample(rng);
            n * std
        });
        Ok(Self {
            in_channels,
            out_channels,
            kernel_size,
            weight,
            bias: Array1::zeros(out_channels),
            grad_weight: Array3::zeros((out_channels, in_channels, kernel_size)),
            grad_bias: Array1::zeros(out_channels),
            cached_input: None,
        })
    }

    fn check_input(&self, x: &Array3<f64>) -> Result<()> {
        if x.dim().1 != self.in_channels {
            return Err(Error::ShapeMismatch(format!(
                "conv1d expects {} input channels, got {:?}",
                self.in_channels,
                x.dim()
            )));
        }
        Ok(())
    }

    fn compute(&self, x: &Array3<f64>) -> Array3<f64> {
        let (bsz, cin, len) = x.dim();
        let cout = self.out_channels;
        let k = self.kernel_size;
        let pad = (k / 2) as isize;
        let mut out = Array3::zeros((bsz, cout, len));
        let w = self.weight.as_slice().expect("standard layout");
        let bias = self.bias.as_slice().expect("standard layout");
        let xs = x.as_slice().expect("standard layout");
        out.as_slice_mut()
            .expect("standard layout")
            .par_chunks_mut(cout * len)
            .zip(xs.par_chunks(cin * len))
            .for_each(|(out_b, x_b)| {
                for o in 0..cout {
                    let ob = &mut out_b[o * len..(o + 1) * len];
                    ob.fill(bias[o]);
                    for c in 0..cin {
                        let xc = &x_b[c * len..(c + 1) * len];
                        let woc = &w[(o * cin + c) * k..(o * cin + c + 1) * k];
                        for (j, &wj) in woc.iter().enumerate() {
                            shifted_axpy(ob, xc, wj, j as isize - pad);
                        }
                    }
                }
            });
        out
    }

    pub fn forward_train(&mut self, x: Tensor) -> Result<Tensor> {
        let x = x.into_r3()?;
        self.check_input(&x)?;
        let out = self.compute(&x);
        self.cached_input = Some(x);
        Ok(out.into())
    }

    pub fn infer(&self, x: &Tensor) -> Result<Tensor> {
        let Tensor::R3(x) = x else {
            return Err(Error::ShapeMismatch(format!(
                "conv1d expects a rank-3 tensor, got {}",
                x.shape_string()
            )));
        };
        self.check_input(x)?;
        Ok(self.compute(x).into())
    }

    pub fn backward(&mut self, grad_out: Tensor) -> Result<Tensor> {
        let g = grad_out.into_r3()?;
        let x = self
            .cached_input
            .take()
            .ok_or_else(|| Error::ShapeMismatch("conv1d backward without cached forward".into()))?;
        let (bsz, cin, len) = x.dim();
        if g.dim() != (bsz, self.out_channels, len) {
            return Err(Error::ShapeMismatch(format!(
                "conv1d grad shape {:?} does not match output ({bsz}, {}, {len})",
                g.dim(),
                self.out_channels
            )));
        }
        let cout = self.out_channels;
        let k = self.kernel_size;
        let pad = (k / 2) as isize;
        let gs = g.as_slice().expect("standard layout");
        let xs = x.as_slice().expect("standard layout");
        let w = self.weight.as_slice().expect("standard layout");

        // Parameter gradients: one task per output channel, batch-major
        // accumulation order inside.
        let gw = self.grad_weight.as_slice_mut().expect("standard layout");
        let gb = self.grad_bias.as_slice_mut().expect("standard layout");
        gw.par_chunks_mut(cin * k)
            .zip(gb.par_iter_mut())
            .enumerate()
            .for_each(|(o, (gw_o, gb_o))| {
                gw_o.fill(0.0);
                let mut bias_acc = 0.0;
                for b in 0..bsz {
                    let go = &gs[(b * cout + o) * len..(b * cout + o + 1) * len];
                    bias_acc += go.iter().sum::<f64>();
                    for c in 0..cin {
                        let xc = &xs[(b * cin + c) * len..(b * cin + c + 1) * len];
                        for j in 0..k {
                            gw_o[c * k + j] += shifted_dot(go, xc, j as isize - pad);
                        }
                    }
                }
                *gb_o = bias_acc;
            });

        // Input gradient: gin[b,c,t] = sum_{o,j} g[b,o,t+pad-j] * w[o,c,j].
        let mut gin = Array3::zeros((bsz, cin, len));
        gin.as_slice_mut()
            .expect("standard layout")
            .par_chunks_mut(cin * len)
            .zip(gs.par_chunks(cout * len))
            .for_each(|(gin_b, g_b)| {
                for o in 0..cout {
                    let go = &g_b[o * len..(o + 1) * len];
                    for c in 0..cin {
                        let gc = &mut gin_b[c * len..(c + 1) * len];
                        let woc = &w[(o * cin + c) * k..(o * cin + c + 1) * k];
                        for (j, &wj) in woc.iter().enumerate() {
                            shifted_axpy(gc, go, wj, pad - j as isize);
                        }
                    }
                }
            });
        Ok(gin.into())
    }

    pub fn params_mut(&mut self) -> Vec<ParamSlot<'_>> {
        vec![
            ParamSlot {
                kind: ParamKind::Weight,
                data: self.weight.as_slice_mut().expect("standard layout"),
                grad: self.grad_weight.as_slice_mut().expect("standard layout"),
            },
            ParamSlot {
                kind: ParamKind::Bias,
                data: self.bias.as_slice_mut().expect("standard layout"),
                grad: self.grad_bias.as_slice_mut().expect("standard layout"),
            },
        ]
    }

    pub fn params(&self) -> Vec<ParamView<'_>> {
        vec![
            ParamView { kind: ParamKind::Weight, data: self.weight.as_slice().expect("standard layout") },
            ParamView { kind: ParamKind::Bias, data: self.bias.as_slice().expect("standard layout") },
        ]
    }
}

/// `dst[i] += scale * src[i + shift]` over the in-range overlap.
fn shifted_axpy(dst: &mut [f64], src: &[f64], scale: f64, shift: isize) {
    let len = dst.len();
    if shift >= 0 {
        let s = shift as usize;
        if s >= len {
            return;
        }
        let n = len - s;
        for (d, x) in dst[..n].iter_mut().zip(&src[s..s + n]) {
            *d += scale * x;
        }
    } else {
        let s = (-shift) as usize;
        if s >= len {
            return;
        }
        let n = len - s;
        for (d, x) in dst[s..s + n].iter_mut().zip(&src[..n]) {
            *d += scale * x;
        }
    }
}

/// `sum_i a[i] * b[i + shift]` over the in-range overlap.
fn shifted_dot(a: &[f64], b: &[f64], shift: isize) -> f64 {
    let len = a.len();
    if shift >= 0 {
        let s = shift as usize;
        if s >= len {
            return 0.0;
        }
        let n = len - s;
        a[..n].iter().zip(&b[s..s + n]).map(|(x, y)| x * y).sum()
    } else {
        let s = (-shift) as usize;
        if s >= len {
            return 0.0;
        }
        let n = len - s;
        a[s..s + n].iter().zip(&b[..n]).map(|(x, y)| x * y).sum()
    }
}

// ---------------------------------------------------------------------
// BatchNorm1d
// ---------------------------------------------------------------------

/// Per-channel batch normalization over (batch, length), applied before
/// the activation. Training normalizes with batch statistics and updates
/// running statistics; inference uses the running statistics.
#[derive(Debug, Clone)]
pub struct BatchNorm1d {
    pub channels: usize,
    gamma: Array1<f64>,
    beta: Array1<f64>,
    grad_gamma: Array1<f64>,
    grad_beta: Array1<f64>,
    running_mean: Array1<f64>,
    running_var: Array1<f64>,
    pub momentum: f64,
    pub eps: f64,
    cached_xhat: Option<Array3<f64>>,
    cached_inv_std: Option<Array1<f64>>,
}

impl BatchNorm1d {
    pub fn new(channels: usize) -> Result<Self> {
        if channels == 0 {
            return Err(Error::InvalidParameter("batch norm needs at least one channel".into()));
        }
        Ok(Self {
            channels,
            gamma: Array1::ones(channels),
            beta: Array1::zeros(channels),
            grad_gamma: Array1::zeros(channels),
            grad_beta: Array1::zeros(channels),
            running_mean: Array1::zeros(channels),
            running_var: Array1::ones(channels),
            momentum: 0.1,
            eps: 1e-5,
            cached_xhat: None,
            cached_inv_std: None,
        })
    }

    fn check_input(&self, x: &Array3<f64>) -> Result<()> {
        if x.dim().1 != self.channels {
            return Err(Error::ShapeMismatch(format!(
                "batch norm over {} channels got input {:?}",
                self.channels,
                x.dim()
            )));
        }
        Ok(())
    }

    pub fn forward_train(&mut self, x: Tensor) -> Result<Tensor> {
        let x = x.into_r3()?;
        self.check_input(&x)?;
        let (bsz, ch, len) = x.dim();
        if bsz < 2 {
            return Err(Error::DegenerateBatch(bsz));
        }
        let n = (bsz * len) as f64;
        let xs = x.as_slice().expect("standard layout");
        let mut xhat = Array3::zeros((bsz, ch, len));
        let xh = xhat.as_slice_mut().expect("standard layout");
        let mut inv_std = Array1::zeros(ch);
        let mut out = Array3::zeros((bsz, ch, len));
        let os = out.as_slice_mut().expect("standard layout");
        for c in 0..ch {
            let mut sum = 0.0;
            for b in 0..bsz {
                let row = &xs[(b * ch + c) * len..(b * ch + c + 1) * len];
                sum += row.iter().sum::<f64>();
            }
            let mean = sum / n;
            let mut ssq = 0.0;
            for b in 0..bsz {
                let row = &xs[(b * ch + c) * len..(b * ch + c + 1) * len];
                ssq += row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>();
            }
            let var = ssq / n;
            let istd = 1.0 / (var + self.eps).sqrt();
            inv_std[c] = istd;
            let (g, be) = (self.gamma[c], self.beta[c]);
            for b in 0..bsz {
                let base = (b * ch + c) * len;
                for i in 0..len {
                    let h = (xs[base + i] - mean) * istd;
                    xh[base + i] = h;
                    os[base + i] = g * h + be;
                }
            }
            self.running_mean[c] = (1.0 - self.momentum) * self.running_mean[c] + self.momentum * mean;
            // Running variance uses the unbiased estimate.
            let unbiased = if n > 1.0 { var * n / (n - 1.0) } else { var };
            self.running_var[c] = (1.0 - self.momentum) * self.running_var[c] + self.momentum * unbiased;
        }
        self.cached_xhat = Some(xhat);
        self.cached_inv_std = Some(inv_std);
        Ok(out.into())
    }

    pub fn infer(&self, x: &Tensor) -> Result<Tensor> {
        let Tensor::R3(x) = x else {
            return Err(Error::ShapeMismatch(format!(
                "batch norm expects a rank-3 tensor, got {}",
                x.shape_string()
            )));
        };
        self.check_input(x)?;
        let (bsz, ch, len) = x.dim();
        let xs = x.as_slice().expect("standard layout");
        let mut out = Array3::zeros((bsz, ch, len));
        let os = out.as_slice_mut().expect("standard layout");
        for c in 0..ch {
            let istd = 1.0 / (self.running_var[c] + self.eps).sqrt();
            let (mean, g, be) = (self.running_mean[c], self.gamma[c], self.beta[c]);
            for b in 0..bsz {
                let base = (b * ch + c) * len;
                for i in 0..len {
                    os[base + i] = g * (xs[base + i] - mean) * istd + be;
                }
            }
        }
        Ok(out.into())
    }

    pub fn backward(&mut self, grad_out: Tensor) -> Result<Tensor> {
        let g = grad_out.into_r3()?;
        let xhat = self
            .cached_xhat
            .take()
            .ok_or_else(|| Error::ShapeMismatch("batch norm backward without cached forward".into()))?;
        let inv_std = self.cached_inv_std.take().expect("cached with xhat");
        if g.dim() != xhat.dim() {
            return Err(Error::ShapeMismatch(format!(
                "batch norm grad shape {:?} does not match input {:?}",
                g.dim(),
                xhat.dim()
            )));
        }
        let (bsz, ch, len) = g.dim();
        let n = (bsz * len) as f64;
        let gs = g.as_slice().expect("standard layout");
        let xh = xhat.as_slice().expect("standard layout");
        let mut gin = Array3::zeros((bsz, ch, len));
        let gi = gin.as_slice_mut().expect("standard layout");
        for c in 0..ch {
            let mut sum_g = 0.0;
            let mut sum_gx = 0.0;
            for b in 0..bsz {
                let base = (b * ch + c) * len;
                for i in 0..len {
                    sum_g += gs[base + i];
                    sum_gx += gs[base + i] * xh[base + i];
                }
            }
            self.grad_beta[c] = sum_g;
            self.grad_gamma[c] = sum_gx;
            let gscale = self.gamma[c] * inv_std[c];
            let mean_g = sum_g / n;
            let mean_gx = sum_gx / n;
            for b in 0..bsz {
                let base = (b * ch + c) * len;
                for i in 0..len {
                    gi[base + i] = gscale * (gs[base + i] - mean_g - xh[base + i] * mean_gx);
                }
            }
        }
        Ok(gin.into())
    }

    pub fn params_mut(&mut self) -> Vec<ParamSlot<'_>> {
        vec![
            ParamSlot {
                kind: ParamKind::Gamma,
                data: self.gamma.as_slice_mut().expect("standard layout"),
                grad: self.grad_gamma.as_slice_mut().expect("standard layout"),
            },
            ParamSlot {
                kind: ParamKind::Beta,
                data: self.beta.as_slice_mut().expect("standard layout"),
                grad: self.grad_beta.as_slice_mut().expect("standard layout"),
            },
        ]
    }

    pub fn params(&self) -> Vec<ParamView<'_>> {
        vec![
            ParamView { kind: ParamKind::Gamma, data: self.gamma.as_slice().expect("standard layout") },
            ParamView { kind: ParamKind::Beta, data: self.beta.as_slice().expect("standard layout") },
        ]
    }

    pub fn running_stats(&self) -> (&[f64], &[f64]) {
        (
            self.running_mean.as_slice().expect("standard layout"),
            self.running_var.as_slice().expect("standard layout"),
        )
    }

    pub fn set_running_stats(&mut self, mean: &[f64], var: &[f64]) -> Result<()> {
        if mean.len() != self.channels || var.len() != self.channels {
            return Err(Error::ShapeMismatch(format!(
                "running stats must have {} entries",
                self.channels
            )));
        }
        if var.iter().any(|&v| v <= 0.0 || v.is_nan()) {
            return Err(Error::InvalidParameter("running variance must be > 0".into()));
        }
        self.running_mean = Array1::from(mean.to_vec());
        self.running_var = Array1::from(var.to_vec());
        Ok(())
    }
}

// ---------------------------------------------------------------------
// ReLU
// ---------------------------------------------------------------------

#[derive(Debug, Clone, Default)]
pub struct Relu {
    cached_mask: Option<Tensor>,
}

impl Relu {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn forward_train(&mut self, mut x: Tensor) -> Result<Tensor> {
        let mut mask = x.zeros_like();
        for (v, m) in x.as_flat_mut().iter_mut().zip(mask.as_flat_mut()) {
            if *v > 0.0 {
                *m = 1.0;
            } else {
                *v = 0.0;
            }
        }
        self.cached_mask = Some(mask);
        Ok(x)
    }

    pub fn infer(&self, x: &Tensor) -> Result<Tensor> {
        let mut out = x.clone();
        for v in out.as_flat_mut() {
            if *v < 0.0 {
                *v = 0.0;
            }
        }
        Ok(out)
    }

    pub fn backward(&mut self, mut grad: Tensor) -> Result<Tensor> {
        let mask = self
            .cached_mask
            .take()
            .ok_or_else(|| Error::ShapeMismatch("relu backward without cached forward".into()))?;
        if grad.as_flat().len() != mask.as_flat().len() {
            return Err(Error::ShapeMismatch("relu grad shape differs from forward".into()));
        }
        for (g, m) in grad.as_flat_mut().iter_mut().zip(mask.as_flat()) {
            *g *= m;
        }
        Ok(grad)
    }
}

// ---------------------------------------------------------------------
// Dropout
// ---------------------------------------------------------------------

/// Inverted dropout: zero with probability `rate` in training, survivors
/// scaled by 1/(1-rate) so the expectation is preserved; identity at
/// inference. The layer owns its seed stream.
#[derive(Debug, Clone)]
pub struct Dropout {
    pub rate: f64,
    rng: ChaCha8Rng,
    cached_mask: Option<Tensor>,
}

impl Dropout {
    pub fn new(rate: f64, rng: ChaCha8Rng) -> Result<Self> {
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::InvalidParameter(format!("dropout rate must be in [0,1), got {rate}")));
        }
        Ok(Self { rate, rng, cached_mask: None })
    }

    pub fn forward_train(&mut self, mut x: Tensor) -> Result<Tensor> {
        let mut mask = x.zeros_like();
        if self.rate == 0.0 {
            for m in mask.as_flat_mut() {
                *m = 1.0;
            }
        } else {
            let keep_scale = 1.0 / (1.0 - self.rate);
            for m in mask.as_flat_mut() {
                if self.rng.random::<f64>() >= self.rate {
                    *m = keep_scale;
                }
            }
        }
        for (v, m) in x.as_flat_mut().iter_mut().zip(mask.as_flat()) {
            *v *= m;
        }
        self.cached_mask = Some(mask);
        Ok(x)
    }

    pub fn infer(&self, x: &Tensor) -> Result<Tensor> {
        Ok(x.clone())
    }

    pub fn backward(&mut self, mut grad: Tensor) -> Result<Tensor> {
        let mask = self
            .cached_mask
            .take()
            .ok_or_else(|| Error::ShapeMismatch("dropout backward without cached forward".into()))?;
        if grad.as_flat().len() != mask.as_flat().len() {
            return Err(Error::ShapeMismatch("dropout grad shape differs from forward".into()));
        }
        for (g, m) in grad.as_flat_mut().iter_mut().zip(mask.as_flat()) {
            *g *= m;
        }
        Ok(grad)
    }
}

// ---------------------------------------------------------------------
// Flatten
// ---------------------------------------------------------------------

/// (batch, channels, length) -> (batch, channels * length), row-major.
#[derive(Debug, Clone, Default)]
pub struct Flatten {
    cached_dim: Option<(usize, usize)>,
}

impl Flatten {
    pub fn new() -> Self {
        Self::default()
    }

    fn apply(x: &Tensor) -> Result<Array2<f64>> {
        let Tensor::R3(a) = x else {
            return Err(Error::ShapeMismatch(format!(
                "flatten expects a rank-3 tensor, got {}",
                x.shape_string()
            )));
        };
        let (b, c, l) = a.dim();
        let (data, _) = a.clone().into_raw_vec_and_offset();
        Ok(Array2::from_shape_vec((b, c * l), data).expect("row-major reshape"))
    }

    pub fn forward_train(&mut self, x: Tensor) -> Result<Tensor> {
        let a = x.into_r3()?;
        let (b, c, l) = a.dim();
        self.cached_dim = Some((c, l));
        let (data, _) = a.into_raw_vec_and_offset();
        Ok(Array2::from_shape_vec((b, c * l), data).expect("row-major reshape").into())
    }

    pub fn infer(&self, x: &Tensor) -> Result<Tensor> {
        Ok(Self::apply(x)?.into())
    }

    pub fn backward(&mut self, grad: Tensor) -> Result<Tensor> {
        let g = grad.into_r2()?;
        let (c, l) = self
            .cached_dim
            .take()
            .ok_or_else(|| Error::ShapeMismatch("flatten backward without cached forward".into()))?;
        let (b, d) = g.dim();
        if d != c * l {
            return Err(Error::ShapeMismatch(format!(
                "flatten grad width {d} does not match {c}x{l}"
            )));
        }
        let (data, _) = g.into_raw_vec_and_offset();
        Ok(Array3::from_shape_vec((b, c, l), data).expect("row-major reshape").into())
    }
}

// ---------------------------------------------------------------------
// Dense
// ---------------------------------------------------------------------

/// Affine map `out[b,o] = bias[o] + sum_i in[b,i] * w[o,i]`.
#[derive(Debug, Clone)]
pub struct Dense {
    pub in_dim: usize,
    pub out_dim: usize,
    weight: Array2<f64>,
    bias: Array1<f64>,
    grad_weight: Array2<f64>,
    grad_bias: Array1<f64>,
    cached_input: Option<Array2<f64>>,
}

impl Dense {
    pub fn new(in_dim: usize, out_dim: usize, rng: &mut ChaCha8Rng) -> Result<Self> {
        if in_dim == 0 || out_dim == 0 {
            return Err(Error::InvalidParameter("dense dimensions must be > 0".into()));
        }
        let std = (2.0 / in_dim as f64).sqrt();
        let weight = Array2::from_shape_fn((out_dim, in_dim), |_| {
            let n: f64 = StandardNormal.sample(rng);
            n * std
        });
        Ok(Self {
            in_dim,
            out_dim,
            weight,
            bias: Array1::zeros(out_dim),
            grad_weight: Array2::zeros((out_dim, in_dim)),
            grad_bias: Array1::zeros(out_dim),
            cached_input: None,
        })
    }

    fn compute(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        let (bsz, din) = x.dim();
        if din != self.in_dim {
            return Err(Error::ShapeMismatch(format!(
                "dense expects width {}, got {:?}",
                self.in_dim,
                x.dim()
            )));
        }
        let mut out = Array2::zeros((bsz, self.out_dim));
        let w = self.weight.as_slice().expect("standard layout");
        let bias = self.bias.as_slice().expect("standard layout");
        let xs = x.as_slice().expect("standard layout");
        out.as_slice_mut()
            .expect("standard layout")
            .par_chunks_mut(self.out_dim)
            .zip(xs.par_chunks(din))
            .for_each(|(out_b, x_b)| {
                for (o, out_v) in out_b.iter_mut().enumerate() {
                    let wo = &w[o * din..(o + 1) * din];
                    *out_v = bias[o] + wo.iter().zip(x_b).map(|(a, b)| a * b).sum::<f64>();
                }
            });
        Ok(out)
    }

    pub fn forward_train(&mut self, x: Tensor) -> Result<Tensor> {
        let x = x.into_r2()?;
        let out = self.compute(&x)?;
        self.cached_input = Some(x);
        Ok(out.into())
    }

    pub fn infer(&self, x: &Tensor) -> Result<Tensor> {
        let Tensor::R2(x) = x else {
            return Err(Error::ShapeMismatch(format!(
                "dense expects a rank-2 tensor, got {}",
                x.shape_string()
            )));
        };
        Ok(self.compute(x)?.into())
    }

    pub fn backward(&mut self, grad_out: Tensor) -> Result<Tensor> {
        let g = grad_out.into_r2()?;
        let x = self
            .cached_input
            .take()
            .ok_or_else(|| Error::ShapeMismatch("dense backward without cached forward".into()))?;
        let (bsz, din) = x.dim();
        if g.dim() != (bsz, self.out_dim) {
            return Err(Error::ShapeMismatch(format!(
                "dense grad shape {:?} does not match ({bsz}, {})",
                g.dim(),
                self.out_dim
            )));
        }
        let gs = g.as_slice().expect("standard layout");
        let xs = x.as_slice().expect("standard layout");

        let gw = self.grad_weight.as_slice_mut().expect("standard layout");
        let gb = self.grad_bias.as_slice_mut().expect("standard layout");
        gw.par_chunks_mut(din)
            .zip(gb.par_iter_mut())
            .enumerate()
            .for_each(|(o, (gw_o, gb_o))| {
                gw_o.fill(0.0);
                let mut bias_acc = 0.0;
                for b in 0..bsz {
                    let gv = gs[b * self.out_dim + o];
                    bias_acc += gv;
                    let xb = &xs[b * din..(b + 1) * din];
                    for (gw_i, x_i) in gw_o.iter_mut().zip(xb) {
                        *gw_i += gv * x_i;
                    }
                }
                *gb_o = bias_acc;
            });

        let w = self.weight.as_slice().expect("standard layout");
        let mut gin = Array2::zeros((bsz, din));
        gin.as_slice_mut()
            .expect("standard layout")
            .par_chunks_mut(din)
            .zip(gs.par_chunks(self.out_dim))
            .for_each(|(gin_b, g_b)| {
                for (o, &gv) in g_b.iter().enumerate() {
                    let wo = &w[o * din..(o + 1) * din];
                    for (gi, wi) in gin_b.iter_mut().zip(wo) {
                        *gi += gv * wi;
                    }
                }
            });
        Ok(gin.into())
    }

    pub fn params_mut(&mut self) -> Vec<ParamSlot<'_>> {
        vec![
            ParamSlot {
                kind: ParamKind::Weight,
                data: self.weight.as_slice_mut().expect("standard layout"),
                grad: self.grad_weight.as_slice_mut().expect("standard layout"),
            },
            ParamSlot {
                kind: ParamKind::Bias,
                data: self.bias.as_slice_mut().expect("standard layout"),
                grad: self.grad_bias.as_slice_mut().expect("standard layout"),
            },
        ]
    }

    pub fn params(&self) -> Vec<ParamView<'_>> {
        vec![
            ParamView { kind: ParamKind::Weight, data: self.weight.as_slice().expect("standard layout") },
            ParamView { kind: ParamKind::Bias, data: self.bias.as_slice().expect("standard layout") },
        ]
    }
}
