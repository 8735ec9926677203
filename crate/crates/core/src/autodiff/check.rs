//! Central finite-difference gradient checking.

use super::{Tape, Tensor, Var};
use crate::error::Result;
use crate::scalar::Scalar;

/// Relative error between an analytic and a numeric derivative, as used by
/// [`grad_check`]: `|a - n| / max(|a| + |n|, 1e-8)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / (analytic.abs() + numeric.abs()).max(1e-8)
}

/// Compares the tape gradient of the scalar function `f` at `x` against
/// central differences with step `eps` and returns the worst relative error.
pub fn grad_check<F, Fun>(f: Fun, x: &Tensor<F>, eps: f64) -> Result<f64>
where
    F: Scalar,
    Fun: Fn(&mut Tape<F>, Var) -> Result<Var>,
{
    grad_check_many(|t, xs| f(t, xs[0]), std::slice::from_ref(x), eps)
}

/// [`grad_check`] over several inputs at once; every entry of every input is
/// perturbed.
pub fn grad_check_many<F, Fun>(f: Fun, inputs: &[Tensor<F>], eps: f64) -> Result<f64>
where
    F: Scalar,
    Fun: Fn(&mut Tape<F>, &[Var]) -> Result<Var>,
{
    let eval = |xs: &[Tensor<F>]| -> Result<f64> {
        let mut tape = Tape::new();
        let vars: Vec<Var> = xs.iter().map(|x| tape.constant(x.clone())).collect();
        let out = f(&mut tape, &vars)?;
        Ok(tape.value(out).item().as_f64())
    };

    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|x| tape.leaf(x.clone(), true)).collect();
    let out = f(&mut tape, &vars)?;
    tape.backward(out)?;

    let mut worst = 0.0f64;
    let mut work: Vec<Tensor<F>> = inputs.to_vec();
    for (k, &v) in vars.iter().enumerate() {
        let analytic = tape.grad(v);
        for j in 0..inputs[k].len() {
            let orig = inputs[k].data()[j];
            work[k].data_mut()[j] = orig + F::cst(eps);
            let up = eval(&work)?;
            work[k].data_mut()[j] = orig - F::cst(eps);
            let down = eval(&work)?;
            work[k].data_mut()[j] = orig;
            let numeric = (up - down) / (2.0 * eps);
            worst = worst.max(relative_error(analytic.data()[j].as_f64(), numeric));
        }
    }
    Ok(worst)
}
