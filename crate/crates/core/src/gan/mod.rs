//! Adversarial losses, the six model variants and the training loop.

mod loss;
mod model;
mod train;

pub use loss::{discriminator_loss, generator_loss};
pub use model::{
    build_variant, ArchConfig, GanModel, Generated, LatentSource, ParamReport, Variant,
};
pub use train::{
    train, train_with, DPhase, MuSnapshot, RunStatus, TrainConfig, TrainHistory, TrainRecord,
    Trainer, DIVERGENCE_LIMIT,
};
