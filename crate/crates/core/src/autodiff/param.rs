use std::sync::atomic::{AtomicU64, Ordering};

use super::{Tape, Tensor};
use crate::scalar::Scalar;

static NEXT_ID: AtomicU64 = AtomicU64::new(1);

/// Identity of a trainable parameter. Clones receive a fresh id.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(u64);

impl ParamId {
    fn fresh() -> Self {
        Self(NEXT_ID.fetch_add(1, Ordering::Relaxed))
    }
}

/// A trainable tensor together with its accumulated gradient.
#[derive(Debug)]
pub struct Param<F> {
    id: ParamId,
    name: String,
    value: Tensor<F>,
    grad: Tensor<F>,
}

impl<F: Scalar> Param<F> {
    pub fn new(name: impl Into<String>, value: Tensor<F>) -> Self {
        let grad = Tensor::zeros(value.shape());
        Self {
            id: ParamId::fresh(),
            name: name.into(),
            value,
            grad,
        }
    }

    pub fn id(&self) -> ParamId {
        self.id
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn value(&self) -> &Tensor<F> {
        &self.value
    }

    pub fn value_mut(&mut self) -> &mut Tensor<F> {
        &mut self.value
    }

    pub fn grad(&self) -> &Tensor<F> {
        &self.grad
    }

    pub fn grad_mut(&mut self) -> &mut Tensor<F> {
        &mut self.grad
    }

    /// Mutable access to value and gradient at once (for optimizers).
    pub fn split_mut(&mut self) -> (&mut Tensor<F>, &Tensor<F>) {
        (&mut self.value, &self.grad)
    }

    pub fn zero_grad(&mut self) {
        self.grad.data_mut().iter_mut().for_each(|g| *g = F::zero());
    }

    /// Adds the gradient held for this parameter on `tape` (if it was bound there).
    pub fn accumulate_grad(&mut self, tape: &Tape<F>) {
        if let Some(g) = tape.param_grad(self.id) {
            for (acc, &v) in self.grad.data_mut().iter_mut().zip(g.data()) {
                *acc += v;
            }
        }
    }

    pub fn len(&self) -> usize {
        self.value.len()
    }

    pub fn is_empty(&self) -> bool {
        self.value.is_empty()
    }
}

impl<F: Clone> Clone for Param<F> {
    fn clone(&self) -> Self {
        Self {
            id: ParamId::fresh(),
            name: self.name.clone(),
            value: self.value.clone(),
            grad: self.grad.clone(),
        }
    }
}
