//! Reverse-mode autodiff, MLPs and Adam: the substrate for the multiview identifier.
//!
//! Everything is a dense row-major matrix. A [`Graph`] records operations as they run;
//! [`Graph::backward`] accumulates gradients into the leaves that require them.
//! Reductions run in a fixed order, so results are bit-reproducible.

mod adam;
mod gradcheck;
mod graph;
mod mlp;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use adam::{adam_step, AdamState};
pub use gradcheck::{gradient_check, GradCheckReport, GRADCHECK_MAX_COORDS};
pub use graph::{Graph, Var};
pub use mlp::{mlp_forward, Activation, BoundMlp, Layer, MlpParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
    pub requires_grad: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grad: Option<Vec<f64>>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(Error::invalid(format!(
                "tensor of shape {shape:?} needs {n} values, got {}",
                data.len()
            )));
        }
        Ok(Self {
            shape,
            data,
            requires_grad: false,
            grad: None,
        })
    }

    pub fn matrix(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        Self::new(vec![rows, cols], data)
    }

    pub fn scalar(value: f64) -> Self {
        Self {
            shape: vec![],
            data: vec![value],
            requires_grad: false,
            grad: None,
        }
    }

    pub fn requiring_grad(mut self) -> Self {
        self.requires_grad = true;
        self
    }

    /// View as a matrix: leading dimensions fold into rows, the last one is columns.
    pub fn matrix_shape(&self) -> Result<(usize, usize)> {
        match self.shape.as_slice() {
            [] => Ok((1, 1)),
            [n] => Ok((1, *n)),
            [lead @ .., last] => Ok((lead.iter().product(), *last)),
        }
    }
}
