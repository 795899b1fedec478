use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::graph::{Graph, Var};
use super::Tensor;
use crate::error::{Error, Result};
use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Tanh,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Tanh => x.tanh(),
        }
    }
}

/// Affine map `x ↦ x·W + b` with `W` stored row-major as `in_dim × out_dim`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub in_dim: usize,
    pub out_dim: usize,
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpParams {
    pub in_dim: usize,
    pub out_dim: usize,
    pub hidden_dim: usize,
    pub depth: usize,
    pub activation: Activation,
    pub layers: Vec<Layer>,
}

impl MlpParams {
    /// `depth` affine layers (activation after all but the last), Glorot-uniform weights
    /// in `±√(6/(fan_in + fan_out))`, zero biases.
    pub fn new(
        in_dim: usize,
        hidden_dim: usize,
        out_dim: usize,
        depth: usize,
        activation: Activation,
        rng: &mut Rng,
    ) -> Result<Self> {
        if depth == 0 || in_dim == 0 || out_dim == 0 || (depth > 1 && hidden_dim == 0) {
            return Err(Error::invalid("MLP dimensions and depth must be positive"));
        }
        let layers = (0..depth)
            .map(|l| {
                let fan_in = if l == 0 { in_dim } else { hidden_dim };
                let fan_out = if l + 1 == depth { out_dim } else { hidden_dim };
                let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
                Layer {
                    in_dim: fan_in,
                    out_dim: fan_out,
                    weight: (0..fan_in * fan_out).map(|_| rng.random_range(-limit..=limit)).collect(),
                    bias: vec![0.0; fan_out],
                }
            })
            .collect();
        Ok(Self {
            in_dim,
            out_dim,
            hidden_dim,
            depth,
            activation,
            layers,
        })
    }

    pub fn from_layers(layers: Vec<Layer>, activation: Activation) -> Result<Self> {
        let (Some(first), Some(last)) = (layers.first(), layers.last()) else {
            return Err(Error::invalid("an MLP needs at least one layer"));
        };
        let (in_dim, out_dim) = (first.in_dim, last.out_dim);
        let hidden_dim = if layers.len() > 1 { first.out_dim } else { 0 };
        let params = Self {
            in_dim,
            out_dim,
            hidden_dim,
            depth: layers.len(),
            activation,
            layers,
        };
        params.validate()?;
        Ok(params)
    }

    /// Consecutive layers chain and buffers have the declared sizes.
    pub fn validate(&self) -> Result<()> {
        if self.layers.len() != self.depth || self.depth == 0 {
            return Err(Error::invalid("MLP depth differs from its layer count"));
        }
        let mut prev = self.in_dim;
        for (i, l) in self.layers.iter().enumerate() {
            if l.in_dim != prev || l.weight.len() != l.in_dim * l.out_dim || l.bias.len() != l.out_dim {
                return Err(Error::invalid(format!("MLP layer {i} has inconsistent shapes")));
            }
            prev = l.out_dim;
        }
        if prev != self.out_dim {
            return Err(Error::invalid("last MLP layer does not produce out_dim values"));
        }
        Ok(())
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(|l| l.weight.len() + l.bias.len()).sum()
    }

    /// Parameters in layer order, weight before bias.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_params());
        for l in &self.layers {
            out.extend_from_slice(&l.weight);
            out.extend_from_slice(&l.bias);
        }
        out
    }

    pub fn set_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.n_params() {
            return Err(Error::invalid(format!(
                "expected {} parameters, got {}",
                self.n_params(),
                flat.len()
            )));
        }
        let mut pos = 0;
        for l in &mut self.layers {
            let nw = l.weight.len();
            l.weight.copy_from_slice(&flat[pos..pos + nw]);
            pos += nw;
            let nb = l.bias.len();
            l.bias.copy_from_slice(&flat[pos..pos + nb]);
            pos += nb;
        }
        Ok(())
    }

    /// Register the parameters as gradient-tracking leaves on `g`.
    pub fn bind(&self, g: &mut Graph) -> Result<BoundMlp> {
        let vars = self
            .layers
            .iter()
            .map(|l| {
                Ok((
                    g.param(l.in_dim, l.out_dim, l.weight.clone())?,
                    g.param(1, l.out_dim, l.bias.clone())?,
                ))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(BoundMlp {
            vars,
            activation: self.activation,
            in_dim: self.in_dim,
        })
    }
}

/// MLP parameters living on a [`Graph`].
#[derive(Debug, Clone)]
pub struct BoundMlp {
    vars: Vec<(Var, Var)>,
    activation: Activation,
    in_dim: usize,
}

impl BoundMlp {
    /// Forward pass for a batch `x` of shape `B × in_dim`.
    pub fn forward(&self, g: &mut Graph, x: Var) -> Result<Var> {
        if g.shape(x).1 != self.in_dim {
            return Err(Error::invalid(format!(
                "MLP expects {} input features, got {}",
                self.in_dim,
                g.shape(x).1
            )));
        }
        let mut h = x;
        for (i, &(w, b)) in self.vars.iter().enumerate() {
            let z = g.matmul(h, w)?;
            h = g.add_row_bias(z, b)?;
            if i + 1 < self.vars.len() {
                h = match self.activation {
                    Activation::Relu => g.relu(h),
                    Activation::Tanh => g.tanh(h),
                };
            }
        }
        Ok(h)
    }

    /// Accumulated gradients in [`MlpParams::flatten`] order; untouched leaves give zeros.
    pub fn flat_grad(&self, g: &Graph) -> Vec<f64> {
        let mut out = Vec::new();
        for &(w, b) in &self.vars {
            for v in [w, b] {
                match g.grad(v) {
                    Some(d) => out.extend_from_slice(d),
                    None => out.extend(std::iter::repeat_n(0.0, g.value(v).len())),
                }
            }
        }
        out
    }
}

/// Gradient-free forward pass; leading dimensions of `input` are treated as the batch.
pub fn mlp_forward(params: &MlpParams, input: &Tensor) -> Result<Tensor> {
    let (rows, cols) = input.matrix_shape()?;
    if cols != params.in_dim {
        return Err(Error::invalid(format!(
            "MLP expects {} input features, got {cols}",
            params.in_dim
        )));
    }
    let mut h = input.data.clone();
    for (i, l) in params.layers.iter().enumerate() {
        let mut next = Vec::with_capacity(rows * l.out_dim);
        for r in 0..rows {
            let mut acc = l.bias.clone();
            for (p, &x) in h[r * l.in_dim..(r + 1) * l.in_dim].iter().enumerate() {
                for (a, w) in acc.iter_mut().zip(&l.weight[p * l.out_dim..(p + 1) * l.out_dim]) {
                    *a += x * w;
                }
            }
            next.extend(acc);
        }
        if i + 1 < params.layers.len() {
            next.iter_mut().for_each(|v| *v = params.activation.apply(*v));
        }
        h = next;
    }
    let mut shape = input.shape.clone();
    match shape.last_mut() {
        Some(last) => *last = params.out_dim,
        None => shape.push(params.out_dim),
    }
    Tensor::new(shape, h)
}
