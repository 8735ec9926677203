//! Latent sources: fixed simple priors and the learnable mixture of
//! diagonal Gaussians with reparameterized sampling.

use std::io::Write;

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::autodiff::{Param, Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::scalar::Scalar;

/// Floor applied to σ after each optimizer step.
pub const SIGMA_FLOOR: f64 = 1e-4;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Prior {
    /// Open interval `(-1, 1)`.
    #[default]
    Uniform,
    /// Standard normal.
    Normal,
}

/// `batch × k` i.i.d. draws from `prior`; carries no gradient path.
pub fn sample_simple<F: Scalar>(prior: Prior, batch: usize, k: usize, rng: &mut Rng) -> Tensor<F> {
    let data = (0..batch * k)
        .map(|_| match prior {
            Prior::Uniform => loop {
                let v: f64 = rng.random_range(-1.0..1.0);
                if v > -1.0 {
                    break F::cst(v);
                }
            },
            Prior::Normal => F::cst(StandardNormal.sample(rng)),
        })
        .collect();
    Tensor::matrix(batch, k, data).expect("sized")
}

/// How mixture components are assigned to the rows of a batch.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Batching {
    /// Each row draws its component independently and uniformly.
    #[default]
    Uniform,
    /// Draw a component, then take `m` consecutive rows from it.
    PerComponent { m: usize },
}

/// A reparameterized draw: `z[b] = mu[c_b] + sigma[c_b] ⊙ eps[b]`.
#[derive(Clone, Debug)]
pub struct LatentBatch<F> {
    pub z: Var,
    pub component_ids: Vec<usize>,
    pub eps: Tensor<F>,
}

/// `N` diagonal Gaussians in a `K`-dimensional latent space with implicit
/// uniform weights `1/N`.
#[derive(Clone, Debug)]
pub struct MixtureLatent<F> {
    mu: Param<F>,
    sigma: Param<F>,
}

impl<F: Scalar> MixtureLatent<F> {
    /// Means drawn i.i.d. from `U(-1, 1)`, every σ set to `sigma0`.
    pub fn init(n: usize, k: usize, sigma0: f64, rng: &mut Rng) -> Result<Self> {
        if n == 0 || k == 0 {
            return Err(Error::Config(format!(
                "mixture needs N >= 1 and K >= 1, got N={n} K={k}"
            )));
        }
        if !(sigma0 > 0.0) {
            return Err(Error::Config(format!(
                "sigma0 must be positive, got {sigma0}"
            )));
        }
        let mu = sample_simple(Prior::Uniform, n, k, rng);
        let sigma = Tensor::full(&[n, k], F::cst(sigma0));
        Self::from_values(mu, sigma)
    }

    pub fn from_values(mu: Tensor<F>, sigma: Tensor<F>) -> Result<Self> {
        if !mu.is_matrix() || mu.shape() != sigma.shape() || mu.is_empty() {
            return Err(Error::Dimension {
                op: "mixture",
                lhs: mu.shape().to_vec(),
                rhs: sigma.shape().to_vec(),
            });
        }
        Ok(Self {
            mu: Param::new("latent.mu", mu),
            sigma: Param::new("latent.sigma", sigma),
        })
    }

    pub fn n(&self) -> usize {
        self.mu.value().rows()
    }

    pub fn k(&self) -> usize {
        self.mu.value().cols()
    }

    pub fn mu(&self) -> &Param<F> {
        &self.mu
    }

    pub fn sigma(&self) -> &Param<F> {
        &self.sigma
    }

    pub fn mu_mut(&mut self) -> &mut Param<F> {
        &mut self.mu
    }

    pub fn sigma_mut(&mut self) -> &mut Param<F> {
        &mut self.sigma
    }

    pub fn params_mut(&mut self) -> [&mut Param<F>; 2] {
        [&mut self.mu, &mut self.sigma]
    }

    /// Component ids for a batch of `batch` rows.
    pub fn choose_components(&self, batch: usize, batching: Batching, rng: &mut Rng) -> Vec<usize> {
        let n = self.n();
        match batching {
            Batching::Uniform => (0..batch).map(|_| rng.random_range(0..n)).collect(),
            Batching::PerComponent { m } => {
                let m = m.max(1);
                let mut ids = Vec::with_capacity(batch);
                while ids.len() < batch {
                    let c = rng.random_range(0..n);
                    ids.extend(std::iter::repeat_n(c, m.min(batch - ids.len())));
                }
                ids
            }
        }
    }

    /// Draws a batch on `tape`; gradients reach μ and σ of the chosen
    /// components when `trainable` is set.
    pub fn sample(
        &self,
        tape: &mut Tape<F>,
        batch: usize,
        batching: Batching,
        trainable: bool,
        rng: &mut Rng,
    ) -> Result<LatentBatch<F>> {
        let ids = self.choose_components(batch, batching, rng);
        self.sample_components(tape, ids, trainable, rng)
    }

    /// Reparameterized draw for explicitly given component ids.
    pub fn sample_components(
        &self,
        tape: &mut Tape<F>,
        ids: Vec<usize>,
        trainable: bool,
        rng: &mut Rng,
    ) -> Result<LatentBatch<F>> {
        let eps: Tensor<F> = sample_simple(Prior::Normal, ids.len(), self.k(), rng);
        let (mu, sigma) = if trainable {
            (tape.param(&self.mu), tape.param(&self.sigma))
        } else {
            (
                tape.constant(self.mu.value().clone()),
                tape.constant(self.sigma.value().clone()),
            )
        };
        let mu_rows = tape.gather_rows(mu, &ids)?;
        let sigma_rows = tape.gather_rows(sigma, &ids)?;
        let e = tape.constant(eps.clone());
        let spread = tape.mul(sigma_rows, e)?;
        let z = tape.add(mu_rows, spread)?;
        Ok(LatentBatch {
            z,
            component_ids: ids,
            eps,
        })
    }

    /// Plain-value draw (no tape), consuming randomness exactly like [`sample`](Self::sample).
    pub fn sample_values(
        &self,
        batch: usize,
        batching: Batching,
        rng: &mut Rng,
    ) -> (Tensor<F>, Vec<usize>) {
        let ids = self.choose_components(batch, batching, rng);
        let z = self.values_for(&ids, rng);
        (z, ids)
    }

    pub(crate) fn values_for(&self, ids: &[usize], rng: &mut Rng) -> Tensor<F> {
        let eps: Tensor<F> = sample_simple(Prior::Normal, ids.len(), self.k(), rng);
        let k = self.k();
        let mut data = Vec::with_capacity(ids.len() * k);
        for (b, &c) in ids.iter().enumerate() {
            let (m, s) = (self.mu.value().row(c), self.sigma.value().row(c));
            for j in 0..k {
                data.push(m[j] + s[j] * eps.get(b, j));
            }
        }
        Tensor::matrix(ids.len(), k, data).expect("sized")
    }

    /// Mixture density `Σᵢ g(z | μᵢ, diag σᵢ²) / N` at a single point.
    pub fn pdf(&self, z: &[F]) -> Result<F> {
        if z.len() != self.k() {
            return Err(Error::Dimension {
                op: "mixture_pdf",
                lhs: vec![z.len()],
                rhs: vec![self.k()],
            });
        }
        if self.sigma.value().data().iter().any(|&s| s <= F::zero()) {
            return Err(Error::Domain(
                "mixture density needs every sigma > 0".into(),
            ));
        }
        let two_pi = F::cst(2.0 * std::f64::consts::PI);
        let half = F::cst(0.5);
        let mut total = F::zero();
        for i in 0..self.n() {
            let (m, s) = (self.mu.value().row(i), self.sigma.value().row(i));
            let mut log_g = F::zero();
            for j in 0..z.len() {
                let u = (z[j] - m[j]) / s[j];
                log_g -= half * u * u + s[j].ln() + half * two_pi.ln();
            }
            total += log_g.exp();
        }
        Ok(total / F::cst(self.n() as f64))
    }

    /// `λ · mean_{i,k} (1 − σ_{ik})²`, graph-connected to σ.
    pub fn sigma_penalty(&self, tape: &mut Tape<F>, lambda: f64) -> Result<Var> {
        if lambda < 0.0 {
            return Err(Error::Config(format!("lambda must be >= 0, got {lambda}")));
        }
        let s = tape.param(&self.sigma);
        let dev = tape.rsub_scalar(F::one(), s)?;
        let sq = tape.square(dev)?;
        let mean = tape.mean(sq)?;
        tape.scale(mean, F::cst(lambda))
    }

    /// Raises every σ entry to at least `floor`.
    pub fn clamp_sigma(&mut self, floor: f64) {
        let floor = F::cst(floor);
        for s in self.sigma.value_mut().data_mut() {
            if *s < floor {
                *s = floor;
            }
        }
    }

    /// `(min σ, mean σ)` over all entries.
    pub fn sigma_stats(&self) -> (f64, f64) {
        let d = self.sigma.value().data();
        let min = d.iter().map(|v| v.as_f64()).fold(f64::INFINITY, f64::min);
        let mean = d.iter().map(|v| v.as_f64()).sum::<f64>() / d.len() as f64;
        (min, mean)
    }

    pub fn collect_grads(&mut self, tape: &Tape<F>) {
        self.mu.accumulate_grad(tape);
        self.sigma.accumulate_grad(tape);
    }

    pub fn zero_grad(&mut self) {
        self.mu.zero_grad();
        self.sigma.zero_grad();
    }

    /// CSV with one row per component: `mu_0..mu_{K-1}, sigma_0..sigma_{K-1}`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let k = self.k();
        let header: Vec<String> = (0..k)
            .map(|j| format!("mu_{j}"))
            .chain((0..k).map(|j| format!("sigma_{j}")))
            .collect();
        w.write_record(&header)?;
        for i in 0..self.n() {
            let row: Vec<String> = self
                .mu
                .value()
                .row(i)
                .iter()
                .chain(self.sigma.value().row(i))
                .map(|v| v.as_f64().to_string())
                .collect();
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}
