use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::Activation;
use crate::autodiff::{Param, Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Init {
    #[default]
    XavierUniform,
    Normal {
        std: f64,
    },
}

#[derive(Clone, Debug)]
pub struct Dense<F> {
    pub weight: Param<F>,
    pub bias: Param<F>,
    pub activation: Activation,
}

impl<F: Scalar> Dense<F> {
    pub fn inputs(&self) -> usize {
        self.weight.value().rows()
    }

    pub fn outputs(&self) -> usize {
        self.weight.value().cols()
    }
}

/// Fully connected feed-forward network.
#[derive(Clone, Debug)]
pub struct Mlp<F> {
    layers: Vec<Dense<F>>,
}

impl<F: Scalar> Mlp<F> {
    /// `sizes` lists every layer width including input and output;
    /// `activations[l]` follows layer `l`.
    pub fn new(
        sizes: &[usize],
        activations: &[Activation],
        init: Init,
        rng: &mut Rng,
    ) -> Result<Self> {
        Self::named("mlp", sizes, activations, init, rng)
    }

    /// As [`Mlp::new`], prefixing parameter names with `name`.
    pub fn named(
        name: &str,
        sizes: &[usize],
        activations: &[Activation],
        init: Init,
        rng: &mut Rng,
    ) -> Result<Self> {
        if sizes.len() < 2 {
            return Err(Error::Config(format!(
                "{name}: need at least input and output sizes, got {sizes:?}"
            )));
        }
        if activations.len() != sizes.len() - 1 {
            return Err(Error::Config(format!(
                "{name}: {} layers but {} activations",
                sizes.len() - 1,
                activations.len()
            )));
        }
        if sizes.contains(&0) {
            return Err(Error::Config(format!(
                "{name}: zero-width layer in {sizes:?}"
            )));
        }
        let layers = sizes
            .windows(2)
            .zip(activations)
            .enumerate()
            .map(|(l, (w, &act))| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let weights = init_weights(init, fan_in, fan_out, rng);
                Dense {
                    weight: Param::new(
                        format!("{name}.layer{l}.weight"),
                        Tensor::from_f64(vec![fan_in, fan_out], &weights).expect("sized"),
                    ),
                    bias: Param::new(
                        format!("{name}.layer{l}.bias"),
                        Tensor::zeros(&[1, fan_out]),
                    ),
                    activation: act,
                }
            })
            .collect();
        Ok(Self { layers })
    }

    /// Assembles a network from explicit layers, checking that widths chain.
    pub fn from_layers(layers: Vec<Dense<F>>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Config("network has no layers".into()));
        }
        for (l, pair) in layers.windows(2).enumerate() {
            if pair[0].outputs() != pair[1].inputs() {
                return Err(Error::Config(format!(
                    "layer {l} outputs {} but layer {} takes {}",
                    pair[0].outputs(),
                    l + 1,
                    pair[1].inputs()
                )));
            }
        }
        for d in &layers {
            if d.bias.len() != d.outputs() {
                return Err(Error::Config(format!(
                    "bias `{}` has wrong length",
                    d.bias.name()
                )));
            }
        }
        Ok(Self { layers })
    }

    pub fn layers(&self) -> &[Dense<F>] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].outputs()
    }

    pub fn sizes(&self) -> Vec<usize> {
        std::iter::once(self.input_dim())
            .chain(self.layers.iter().map(Dense::outputs))
            .collect()
    }

    pub fn activations(&self) -> Vec<Activation> {
        self.layers.iter().map(|d| d.activation).collect()
    }

    /// Records the forward pass on `tape`. With `trainable = false` the
    /// weights enter as constants, so no gradient reaches them.
    pub fn forward(&self, tape: &mut Tape<F>, x: Var, trainable: bool) -> Result<Var> {
        let cols = tape.value(x).cols();
        if !tape.value(x).is_matrix() || cols != self.input_dim() {
            return Err(Error::Dimension {
                op: "mlp_forward",
                lhs: tape.value(x).shape().to_vec(),
                rhs: vec![self.input_dim()],
            });
        }
        let mut h = x;
        for d in &self.layers {
            let (w, b) = if trainable {
                (tape.param(&d.weight), tape.param(&d.bias))
            } else {
                (
                    tape.constant(d.weight.value().clone()),
                    tape.constant(d.bias.value().clone()),
                )
            };
            let z = tape.matmul(h, w)?;
            let z = tape.add_bias(z, b)?;
            h = d.activation.apply(tape, z)?;
        }
        Ok(h)
    }

    /// Forward pass without gradient bookkeeping.
    pub fn predict(&self, x: &Tensor<F>) -> Result<Tensor<F>> {
        let mut tape = Tape::new();
        let xv = tape.constant(x.clone());
        let out = self.forward(&mut tape, xv, false)?;
        Ok(tape.value(out).clone())
    }

    pub fn params(&self) -> Vec<&Param<F>> {
        self.layers
            .iter()
            .flat_map(|d| [&d.weight, &d.bias])
            .collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param<F>> {
        self.layers
            .iter_mut()
            .flat_map(|d| [&mut d.weight, &mut d.bias])
            .collect()
    }

    pub fn param_count(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }

    pub fn collect_grads(&mut self, tape: &Tape<F>) {
        for p in self.params_mut() {
            p.accumulate_grad(tape);
        }
    }

    pub fn zero_grad(&mut self) {
        for p in self.params_mut() {
            p.zero_grad();
        }
    }

    /// Flattened copy of every parameter value, in `params()` order.
    pub fn snapshot(&self) -> Vec<F> {
        self.params()
            .iter()
            .flat_map(|p| p.value().data().iter().copied())
            .collect()
    }
}

fn init_weights(init: Init, fan_in: usize, fan_out: usize, rng: &mut Rng) -> Vec<f64> {
    let n = fan_in * fan_out;
    match init {
        Init::XavierUniform => {
            let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
            (0..n).map(|_| rng.random_range(-a..a)).collect()
        }
        Init::Normal { std } => {
            let d = Normal::new(0.0, std).expect("finite std");
            (0..n).map(|_| d.sample(rng)).collect()
        }
    }
}

impl<F: Scalar> Dense<F> {
    pub(crate) fn from_parts(
        name: &str,
        l: usize,
        weight: Tensor<F>,
        bias: Tensor<F>,
        activation: Activation,
    ) -> Self {
        Dense {
            weight: Param::new(format!("{name}.layer{l}.weight"), weight),
            bias: Param::new(format!("{name}.layer{l}.bias"), bias),
            activation,
        }
    }
}
