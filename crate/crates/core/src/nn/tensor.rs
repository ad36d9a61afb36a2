//! Rank-tagged value passed between layers: rank 3 through the conv
//! stack (batch x channels x length), rank 2 after flattening.

use ndarray::{Array2, Array3};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Tensor {
    R3(Array3<f64>),
    R2(Array2<f64>),
}

impl Tensor {
    pub fn batch_len(&self) -> usize {
        match self {
            Tensor::R3(a) => a.dim().0,
            Tensor::R2(a) => a.dim().0,
        }
    }

    pub fn shape_string(&self) -> String {
        match self {
            Tensor::R3(a) => format!("{:?}", a.dim()),
            Tensor::R2(a) => format!("{:?}", a.dim()),
        }
    }

    pub fn into_r3(self) -> Result<Array3<f64>> {
        match self {
            Tensor::R3(a) => Ok(a),
            Tensor::R2(a) => Err(Error::ShapeMismatch(format!(
                "expected a rank-3 tensor, got rank-2 {:?}",
                a.dim()
            ))),
        }
    }

    pub fn into_r2(self) -> Result<Array2<f64>> {
        match self {
            Tensor::R2(a) => Ok(a),
            Tensor::R3(a) => Err(Error::ShapeMismatch(format!(
                "expected a rank-2 tensor, got rank-3 {:?}",
                a.dim()
            ))),
        }
    }

    pub fn as_flat(&self) -> &[f64] {
        match self {
            Tensor::R3(a) => a.as_slice().expect("standard layout"),
            Tensor::R2(a) => a.as_slice().expect("standard layout"),
        }
    }

    pub fn as_flat_mut(&mut self) -> &mut [f64] {
        match self {
            Tensor::R3(a) => a.as_slice_mut().expect("standard layout"),
            Tensor::R2(a) => a.as_slice_mut().expect("standard layout"),
        }
    }

    /// A zero tensor with the same shape.
    pub fn zeros_like(&self) -> Tensor {
        match self {
            Tensor::R3(a) => Tensor::R3(Array3::zeros(a.dim())),
            Tensor::R2(a) => Tensor::R2(Array2::zeros(a.dim())),
        }
    }
}

impl From<Array3<f64>> for Tensor {
    fn from(a: Array3<f64>) -> Self {
        Tensor::R3(a)
    }
}

impl From<Array2<f64>> for Tensor {
    fn from(a: Array2<f64>) -> Self {
        Tensor::R2(a)
    }
}
