use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const DEFAULT_LEAKY_SLOPE: f64 = 0.2;

/// Nonlinearity applied after a layer's affine map.
///
/// Textual form: `relu`, `leaky_relu` / `leaky_relu(0.1)`, `tanh`, `sigmoid`, `none`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Activation {
    Relu,
    LeakyRelu(f64),
    Tanh,
    Sigmoid,
    None,
}

impl Activation {
    pub fn apply<F: Scalar>(self, tape: &mut Tape<F>, x: Var) -> Result<Var> {
        match self {
            Activation::Relu => tape.relu(x),
            Activation::LeakyRelu(s) => tape.leaky_relu(x, F::cst(s)),
            Activation::Tanh => tape.tanh(x),
            Activation::Sigmoid => tape.sigmoid(x),
            Activation::None => Ok(x),
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Activation::Relu => f.write_str("relu"),
            Activation::LeakyRelu(s) => write!(f, "leaky_relu({s})"),
            Activation::Tanh => f.write_str("tanh"),
            Activation::Sigmoid => f.write_str("sigmoid"),
            Activation::None => f.write_str("none"),
        }
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "relu" => return Ok(Activation::Relu),
            "leaky_relu" => return Ok(Activation::LeakyRelu(DEFAULT_LEAKY_SLOPE)),
            "tanh" => return Ok(Activation::Tanh),
            "sigmoid" => return Ok(Activation::Sigmoid),
            "none" | "identity" | "linear" => return Ok(Activation::None),
            _ => {}
        }
        s.strip_prefix("leaky_relu(")
            .and_then(|r| r.strip_suffix(')'))
            .and_then(|v| v.trim().parse::<f64>().ok())
            .map(Activation::LeakyRelu)
            .ok_or_else(|| Error::Config(format!("unknown activation `{s}`")))
    }
}

impl TryFrom<String> for Activation {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Activation> for String {
    fn from(a: Activation) -> String {
        a.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_textual_forms() {
        assert_eq!("relu".parse::<Activation>().unwrap(), Activation::Relu);
        assert_eq!(
            "leaky_relu".parse::<Activation>().unwrap(),
            Activation::LeakyRelu(0.2)
        );
        assert_eq!(
            "leaky_relu(0.05)".parse::<Activation>().unwrap(),
            Activation::LeakyRelu(0.05)
        );
        assert!("swish".parse::<Activation>().is_err());
        for a in [
            Activation::Tanh,
            Activation::LeakyRelu(0.3),
            Activation::None,
        ] {
            assert_eq!(a.to_string().parse::<Activation>().unwrap(), a);
        }
    }
}
