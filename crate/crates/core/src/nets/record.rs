//! Lossless serializable form of a network.

use serde::{Deserialize, Serialize};

use super::{Activation, Dense, Mlp};
use crate::autodiff::Tensor;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerRecord {
    pub inputs: usize,
    pub outputs: usize,
    pub activation: Activation,
    /// Row-major `[inputs × outputs]`.
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlpRecord {
    pub layers: Vec<LayerRecord>,
}

impl MlpRecord {
    pub fn from_mlp<F: Scalar>(m: &Mlp<F>) -> Self {
        Self {
            layers: m
                .layers()
                .iter()
                .map(|d| LayerRecord {
                    inputs: d.inputs(),
                    outputs: d.outputs(),
                    activation: d.activation,
                    weight: d.weight.value().to_f64_vec(),
                    bias: d.bias.value().to_f64_vec(),
                })
                .collect(),
        }
    }

    pub fn to_mlp<F: Scalar>(&self, name: &str) -> Result<Mlp<F>> {
        let layers = self
            .layers
            .iter()
            .enumerate()
            .map(|(l, r)| {
                if r.weight.len() != r.inputs * r.outputs || r.bias.len() != r.outputs {
                    return Err(Error::Format(format!(
                        "{name} layer {l}: buffers do not match {}x{}",
                        r.inputs, r.outputs
                    )));
                }
                Ok(Dense::from_parts(
                    name,
                    l,
                    Tensor::from_f64(vec![r.inputs, r.outputs], &r.weight)?,
                    Tensor::from_f64(vec![1, r.outputs], &r.bias)?,
                    r.activation,
                ))
            })
            .collect::<Result<Vec<_>>>()?;
        Mlp::from_layers(layers)
    }
}
