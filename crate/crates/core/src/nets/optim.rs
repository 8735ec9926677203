//! Adam and plain SGD over [`Param`]s.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::autodiff::{Param, ParamId};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.5,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        Self {
            lr,
            ..Self::default()
        }
    }
}

#[derive(Clone, Debug)]
struct Moments<F> {
    m: Vec<F>,
    v: Vec<F>,
    t: u64,
}

/// Key of a moment slot: a whole parameter or a single row of it.
type SlotKey = (ParamId, Option<usize>);

/// Bias-corrected Adam. Moment buffers are created lazily per parameter
/// (or per parameter row for [`Adam::step_rows`]).
#[derive(Clone, Debug)]
pub struct Adam<F> {
    config: AdamConfig,
    slots: HashMap<SlotKey, Moments<F>>,
}

impl<F: Scalar> Adam<F> {
    pub fn new(config: AdamConfig) -> Self {
        Self {
            config,
            slots: HashMap::new(),
        }
    }

    pub fn config(&self) -> &AdamConfig {
        &self.config
    }

    /// Number of updates applied to `p` so far.
    pub fn steps(&self, p: &Param<F>) -> u64 {
        self.slots.get(&(p.id(), None)).map_or(0, |s| s.t)
    }

    /// Updates every parameter from its accumulated gradient.
    pub fn step(&mut self, params: &mut [&mut Param<F>]) -> Result<()> {
        for p in params.iter() {
            check_finite(p)?;
        }
        for p in params.iter_mut() {
            let key = (p.id(), None);
            let (value, grad) = p.split_mut();
            self.update(key, value.data_mut(), grad.data());
        }
        Ok(())
    }

    /// Updates only the listed rows of a matrix parameter, each with its own
    /// moment buffers and step counter. Other rows are left untouched.
    pub fn step_rows(&mut self, p: &mut Param<F>, rows: &[usize]) -> Result<()> {
        check_finite(p)?;
        let id = p.id();
        let (value, grad) = p.split_mut();
        let cols = value.cols();
        for &r in rows {
            let span = r * cols..(r + 1) * cols;
            self.update(
                (id, Some(r)),
                &mut value.data_mut()[span.clone()],
                &grad.data()[span],
            );
        }
        Ok(())
    }

    fn update(&mut self, key: SlotKey, value: &mut [F], grad: &[F]) {
        let c = &self.config;
        let slot = self.slots.entry(key).or_insert_with(|| Moments {
            m: vec![F::zero(); value.len()],
            v: vec![F::zero(); value.len()],
            t: 0,
        });
        debug_assert_eq!(slot.m.len(), value.len());
        slot.t += 1;
        let (b1, b2) = (F::cst(c.beta1), F::cst(c.beta2));
        let bc1 = F::one() - b1.powi(slot.t as i32);
        let bc2 = F::one() - b2.powi(slot.t as i32);
        let (lr, eps) = (F::cst(c.lr), F::cst(c.eps));
        for j in 0..value.len() {
            let g = grad[j];
            slot.m[j] = b1 * slot.m[j] + (F::one() - b1) * g;
            slot.v[j] = b2 * slot.v[j] + (F::one() - b2) * g * g;
            let m_hat = slot.m[j] / bc1;
            let v_hat = slot.v[j] / bc2;
            value[j] -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
}

/// `θ ← θ − lr·g` for every parameter.
pub fn sgd_step<F: Scalar>(params: &mut [&mut Param<F>], lr: f64) -> Result<()> {
    for p in params.iter() {
        check_finite(p)?;
    }
    let lr = F::cst(lr);
    for p in params.iter_mut() {
        let (value, grad) = p.split_mut();
        for (v, &g) in value.data_mut().iter_mut().zip(grad.data()) {
            *v -= lr * g;
        }
    }
    Ok(())
}

fn check_finite<F: Scalar>(p: &Param<F>) -> Result<()> {
    if p.grad().has_nan() {
        return Err(Error::NonFiniteGradient(p.name().to_string()));
    }
    Ok(())
}
