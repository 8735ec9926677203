//! Dense tensors and a tape-based reverse-mode differentiator.
//!
//! Build a computation by calling ops on a [`Tape`]; each op evaluates
//! eagerly and records how to push gradients back to its inputs.
//! [`Tape::backward`] then walks the record in reverse. Trainable tensors
//! live outside the tape as [`Param`]s and are bound per step with
//! [`Tape::param`].

mod check;
mod param;
mod tape;
mod tensor;

pub use check::{grad_check, grad_check_many, relative_error};
pub use param::{Param, ParamId};
pub use tape::{Tape, Var, LOG_EPS};
pub use tensor::Tensor;

pub(crate) use tape::log_sum_exp;

#[cfg(test)]
mod tests;
