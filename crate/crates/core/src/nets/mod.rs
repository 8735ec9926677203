//! Dense feed-forward networks and their optimizers.

mod activation;
mod mlp;
mod optim;
mod record;

pub use activation::{Activation, DEFAULT_LEAKY_SLOPE};
pub use mlp::{Dense, Init, Mlp};
pub use optim::{sgd_step, Adam, AdamConfig};
pub use record::{LayerRecord, MlpRecord};

use crate::autodiff::{Tape, Var};
use crate::error::Result;
use crate::scalar::Scalar;

/// Mean binary cross-entropy between probabilities `p` and targets `y`.
pub fn binary_cross_entropy<F: Scalar>(tape: &mut Tape<F>, p: Var, y: Var) -> Result<Var> {
    let log_p = tape.log(p)?;
    let pos = tape.mul(y, log_p)?;
    let q = tape.rsub_scalar(F::one(), p)?;
    let log_q = tape.log(q)?;
    let not_y = tape.rsub_scalar(F::one(), y)?;
    let neg = tape.mul(not_y, log_q)?;
    let both = tape.add(pos, neg)?;
    let mean = tape.mean(both)?;
    tape.neg(mean)
}

/// Mean categorical cross-entropy of `logits: [m×C]` against one-hot `targets`.
pub fn softmax_cross_entropy<F: Scalar>(
    tape: &mut Tape<F>,
    logits: Var,
    targets: Var,
) -> Result<Var> {
    let lp = tape.log_softmax(logits)?;
    let picked = tape.mul(lp, targets)?;
    let per_row = tape.sum_rows(picked)?;
    let mean = tape.mean(per_row)?;
    tape.neg(mean)
}

#[cfg(test)]
mod tests;
