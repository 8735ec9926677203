use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};
use crate::latent::MixtureLatent;
use crate::scalar::Scalar;

fn check_probabilities<F: Scalar>(tape: &Tape<F>, v: Var, what: &str) -> Result<()> {
    let bad = tape
        .value(v)
        .data()
        .iter()
        .any(|&p| !(p >= F::zero() && p <= F::one()));
    if bad {
        return Err(Error::Domain(format!(
            "{what}: discriminator outputs must lie in [0, 1]"
        )));
    }
    Ok(())
}

/// `−mean(log D(x)) − mean(log(1 − D(G(z))))`, the negated discriminator
/// objective, so the discriminator minimizes it.
pub fn discriminator_loss<F: Scalar>(tape: &mut Tape<F>, d_real: Var, d_fake: Var) -> Result<Var> {
    check_probabilities(tape, d_real, "d_real")?;
    check_probabilities(tape, d_fake, "d_fake")?;
    let log_real = tape.log(d_real)?;
    let real_term = tape.mean(log_real)?;
    let not_fake = tape.rsub_scalar(F::one(), d_fake)?;
    let log_not_fake = tape.log(not_fake)?;
    let fake_term = tape.mean(log_not_fake)?;
    let total = tape.add(real_term, fake_term)?;
    tape.neg(total)
}

/// Generator objective.
///
/// The default is `mean(log(1 − D(G(z))))`; with `non_saturating` it is
/// `−mean(log D(G(z)))`. When a mixture is given, its σ penalty
/// `λ · mean (1 − σ)²` is added.
pub fn generator_loss<F: Scalar>(
    tape: &mut Tape<F>,
    d_fake: Var,
    mixture: Option<&MixtureLatent<F>>,
    lambda: f64,
    non_saturating: bool,
) -> Result<Var> {
    check_probabilities(tape, d_fake, "d_fake")?;
    let adv = if non_saturating {
        let l = tape.log(d_fake)?;
        let m = tape.mean(l)?;
        tape.neg(m)?
    } else {
        let q = tape.rsub_scalar(F::one(), d_fake)?;
        let l = tape.log(q)?;
        tape.mean(l)?
    };
    match mixture {
        Some(mix) => {
            let pen = mix.sigma_penalty(tape, lambda)?;
            tape.add(adv, pen)
        }
        None => Ok(adv),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::Tensor;

    fn col(v: &[f64]) -> Tensor<f64> {
        Tensor::matrix(v.len(), 1, v.to_vec()).unwrap()
    }

    fn d_loss(real: &[f64], fake: &[f64]) -> f64 {
        let mut t = Tape::new();
        let r = t.constant(col(real));
        let f = t.constant(col(fake));
        let l = discriminator_loss(&mut t, r, f).unwrap();
        t.value(l).item()
    }

    fn mix(sigma: &[f64]) -> MixtureLatent<f64> {
        MixtureLatent::from_values(
            Tensor::matrix(sigma.len(), 1, vec![0.0; sigma.len()]).unwrap(),
            Tensor::matrix(sigma.len(), 1, sigma.to_vec()).unwrap(),
        )
        .unwrap()
    }

    fn g_loss(fake: &[f64], m: Option<&MixtureLatent<f64>>, lambda: f64) -> f64 {
        let mut t = Tape::new();
        let f = t.constant(col(fake));
        let l = generator_loss(&mut t, f, m, lambda, false).unwrap();
        t.value(l).item()
    }

    #[test]
    fn discriminator_loss_examples() {
        assert!((d_loss(&[0.5], &[0.5]) - 2.0 * std::f64::consts::LN_2).abs() < 1e-15);
        assert!((d_loss(&[0.5], &[0.5]) - 1.3863).abs() < 1e-4);
        assert!(d_loss(&[1.0 - 1e-12], &[1e-12]) < 1e-11);
        let expect = -((0.9f64).ln() + (0.8f64).ln()) / 2.0 - ((0.9f64).ln() + (0.7f64).ln()) / 2.0;
        let got = d_loss(&[0.9, 0.8], &[0.1, 0.3]);
        assert!((got - expect).abs() < 1e-15);
        assert!((got - 0.3953).abs() < 1e-4);
    }

    #[test]
    fn generator_loss_examples() {
        assert!((g_loss(&[0.5], None, 1.0) - (0.5f64).ln()).abs() < 1e-15);
        assert!((g_loss(&[0.5], Some(&mix(&[1.0])), 1.0) - (0.5f64).ln()).abs() < 1e-15);
        let expect = ((0.8f64).ln() + (0.6f64).ln()) / 2.0 + 0.25;
        let got = g_loss(&[0.2, 0.4], Some(&mix(&[0.5, 1.5])), 1.0);
        assert!((got - expect).abs() < 1e-15);
        assert!((got + 0.1170).abs() < 1e-4);
    }

    #[test]
    fn non_saturating_form() {
        let mut t = Tape::new();
        let f = t.constant(col(&[0.25, 0.5]));
        let l = generator_loss(&mut t, f, None, 0.0, true).unwrap();
        let expect = -((0.25f64).ln() + (0.5f64).ln()) / 2.0;
        assert!((t.value(l).item() - expect).abs() < 1e-15);
    }

    #[test]
    fn out_of_range_probabilities_fault() {
        let mut t = Tape::new();
        let r = t.constant(col(&[1.5]));
        let f = t.constant(col(&[0.5]));
        assert!(discriminator_loss(&mut t, r, f).is_err());
        assert!(generator_loss(&mut t, r, None, 0.0, false).is_err());
    }
}
