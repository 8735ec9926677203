//! Generative adversarial networks whose latent prior is a trainable
//! mixture of Gaussians, built on a small reverse-mode autodiff engine.
//!
//! Everything numeric is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases at the bottom of this file fix it to `f64`. Metrics work in `f64`.

pub mod autodiff;
pub mod checkpoint;
pub mod data;
pub mod error;
pub mod gan;
pub mod latent;
pub mod metrics;
pub mod nets;
pub mod rng;
pub mod scalar;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Double-precision aliases for the common case.
pub type Tensor = autodiff::Tensor<f64>;
pub type Tape = autodiff::Tape<f64>;
pub type Param = autodiff::Param<f64>;
pub type Mlp = nets::Mlp<f64>;
pub type MixtureLatent = latent::MixtureLatent<f64>;
pub type GanModel = gan::GanModel<f64>;
pub type Dataset = data::Dataset<f64>;
