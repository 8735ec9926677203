use std::fmt;
use std::str::FromStr;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::latent::{sample_simple, Batching, LatentBatch, MixtureLatent, Prior};
use crate::nets::{Activation, Init, Mlp};
use crate::rng::Rng;
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Variant {
    /// Single-hidden-layer generator on a fixed prior.
    Baseline,
    /// Learnable mixture-of-Gaussians latent space.
    Deligan,
    /// Extra `N`-unit dense layer between the prior and the generator.
    GanPp,
    /// `N` generators, each owning one mixture component.
    Ensemble,
    /// Generator hidden layers `N` times wider.
    Nx,
    /// `N`-way one-hot code appended to the prior sample.
    Moe,
}

impl Variant {
    pub const ALL: [Variant; 6] = [
        Variant::Baseline,
        Variant::Deligan,
        Variant::GanPp,
        Variant::Ensemble,
        Variant::Nx,
        Variant::Moe,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Baseline => "baseline",
            Variant::Deligan => "deligan",
            Variant::GanPp => "gan_pp",
            Variant::Ensemble => "ensemble",
            Variant::Nx => "nx",
            Variant::Moe => "moe",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown variant `{s}` (expected one of baseline, deligan, gan_pp, ensemble, nx, moe)"
                ))
            })
    }
}

impl TryFrom<String> for Variant {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Variant> for String {
    fn from(v: Variant) -> String {
        v.as_str().to_string()
    }
}

/// Architecture shared by all variants before variant-specific changes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ArchConfig {
    pub data_dim: usize,
    /// Latent dimension `K`.
    pub latent_dim: usize,
    /// Component / expert / ensemble count `N`.
    pub components: usize,
    pub g_hidden: Vec<usize>,
    pub g_activation: Activation,
    pub g_output: Activation,
    pub d_hidden: Vec<usize>,
    pub d_activation: Activation,
    pub init: Init,
    /// Fixed prior for the non-mixture variants.
    pub prior: Prior,
    pub sigma0: f64,
}

impl Default for ArchConfig {
    fn default() -> Self {
        Self {
            data_dim: 2,
            latent_dim: 2,
            components: 50,
            g_hidden: vec![32],
            g_activation: Activation::Relu,
            g_output: Activation::None,
            d_hidden: vec![32],
            d_activation: Activation::LeakyRelu(0.2),
            init: Init::XavierUniform,
            prior: Prior::Uniform,
            sigma0: 0.2,
        }
    }
}

#[derive(Clone, Debug)]
pub enum LatentSource<F> {
    Simple {
        prior: Prior,
        dim: usize,
    },
    Mixture(MixtureLatent<F>),
    /// Prior sample with an appended one-hot code over `n` experts.
    OneHot {
        prior: Prior,
        dim: usize,
        n: usize,
    },
}

/// Parameter totals used to compare model capacity across variants.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct ParamReport {
    pub generator: usize,
    pub latent: usize,
    pub discriminator: usize,
}

impl ParamReport {
    pub fn total(&self) -> usize {
        self.generator + self.latent + self.discriminator
    }
}

/// Generator output on a tape, with the latent draw that produced it.
#[derive(Debug)]
pub struct Generated<F> {
    pub x: Var,
    pub latent: Option<LatentBatch<F>>,
    pub generator: usize,
}

#[derive(Clone, Debug)]
pub struct GanModel<F> {
    pub variant: Variant,
    pub generators: Vec<Mlp<F>>,
    pub discriminator: Mlp<F>,
    pub latent: LatentSource<F>,
}

/// Wires up generator(s), discriminator and latent source for `variant`.
pub fn build_variant<F: Scalar>(
    variant: Variant,
    arch: &ArchConfig,
    rng: &mut Rng,
) -> Result<GanModel<F>> {
    let (k, n) = (arch.latent_dim, arch.components);
    if n == 0 || k == 0 || arch.data_dim == 0 {
        return Err(Error::Config(format!(
            "need N >= 1, K >= 1 and data_dim >= 1 (N={n}, K={k}, data_dim={})",
            arch.data_dim
        )));
    }
    let gen_net = |name: &str, input: usize, hidden: &[usize], rng: &mut Rng| -> Result<Mlp<F>> {
        let mut sizes = vec![input];
        sizes.extend_from_slice(hidden);
        sizes.push(arch.data_dim);
        let mut acts = vec![arch.g_activation; hidden.len()];
        acts.push(arch.g_output);
        Mlp::named(name, &sizes, &acts, arch.init, rng)
    };

    let mut d_sizes = vec![arch.data_dim];
    d_sizes.extend_from_slice(&arch.d_hidden);
    d_sizes.push(1);
    let mut d_acts = vec![arch.d_activation; arch.d_hidden.len()];
    d_acts.push(Activation::Sigmoid);
    let discriminator = Mlp::named("disc", &d_sizes, &d_acts, arch.init, rng)?;

    let simple = LatentSource::Simple {
        prior: arch.prior,
        dim: k,
    };
    let (generators, latent) = match variant {
        Variant::Baseline => (vec![gen_net("gen", k, &arch.g_hidden, rng)?], simple),
        Variant::Deligan => {
            let g = gen_net("gen", k, &arch.g_hidden, rng)?;
            let mix = MixtureLatent::init(n, k, arch.sigma0, rng)?;
            (vec![g], LatentSource::Mixture(mix))
        }
        Variant::GanPp => {
            let mut hidden = vec![n];
            hidden.extend_from_slice(&arch.g_hidden);
            (vec![gen_net("gen", k, &hidden, rng)?], simple)
        }
        Variant::Ensemble => {
            let gens = (0..n)
                .map(|i| gen_net(&format!("gen{i}"), k, &arch.g_hidden, rng))
                .collect::<Result<Vec<_>>>()?;
            let mix = MixtureLatent::init(n, k, arch.sigma0, rng)?;
            (gens, LatentSource::Mixture(mix))
        }
        Variant::Nx => {
            let hidden: Vec<usize> = arch.g_hidden.iter().map(|h| h * n).collect();
            (vec![gen_net("gen", k, &hidden, rng)?], simple)
        }
        Variant::Moe => (
            vec![gen_net("gen", k + n, &arch.g_hidden, rng)?],
            LatentSource::OneHot {
                prior: arch.prior,
                dim: k,
                n,
            },
        ),
    };
    GanModel::new(variant, generators, discriminator, latent)
}

impl<F: Scalar> GanModel<F> {
    pub fn new(
        variant: Variant,
        generators: Vec<Mlp<F>>,
        discriminator: Mlp<F>,
        latent: LatentSource<F>,
    ) -> Result<Self> {
        let model = Self {
            variant,
            generators,
            discriminator,
            latent,
        };
        model.validate()?;
        Ok(model)
    }

    fn validate(&self) -> Result<()> {
        if self.generators.is_empty() {
            return Err(Error::Config("model has no generator".into()));
        }
        let d = &self.discriminator;
        if d.output_dim() != 1
            || d.layers().last().map(|l| l.activation) != Some(Activation::Sigmoid)
        {
            return Err(Error::Config(
                "discriminator must end in a single sigmoid unit".into(),
            ));
        }
        let input = self.generator_input_dim();
        for g in &self.generators {
            if g.output_dim() != d.input_dim() {
                return Err(Error::Config(format!(
                    "generator emits {} dims but discriminator reads {}",
                    g.output_dim(),
                    d.input_dim()
                )));
            }
            if g.input_dim() != input {
                return Err(Error::Config(format!(
                    "generator takes {} inputs but latent source provides {input}",
                    g.input_dim()
                )));
            }
        }
        match (&self.latent, self.variant) {
            (LatentSource::Mixture(m), Variant::Ensemble) if m.n() != self.generators.len() => {
                Err(Error::Config(format!(
                    "ensemble has {} generators but {} components",
                    self.generators.len(),
                    m.n()
                )))
            }
            (LatentSource::Mixture(_), Variant::Ensemble | Variant::Deligan) => Ok(()),
            (_, Variant::Ensemble | Variant::Deligan) => Err(Error::Config(format!(
                "{} needs a mixture latent",
                self.variant
            ))),
            (LatentSource::OneHot { .. }, Variant::Moe) => Ok(()),
            (LatentSource::Simple { .. }, Variant::Baseline | Variant::GanPp | Variant::Nx) => {
                Ok(())
            }
            _ => Err(Error::Config(format!(
                "latent source does not fit variant {}",
                self.variant
            ))),
        }?;
        if self.variant != Variant::Ensemble && self.generators.len() != 1 {
            return Err(Error::Config(format!(
                "{} uses exactly one generator",
                self.variant
            )));
        }
        Ok(())
    }

    /// Latent dimension `K`.
    pub fn latent_dim(&self) -> usize {
        match &self.latent {
            LatentSource::Simple { dim, .. } | LatentSource::OneHot { dim, .. } => *dim,
            LatentSource::Mixture(m) => m.k(),
        }
    }

    pub fn generator_input_dim(&self) -> usize {
        match &self.latent {
            LatentSource::OneHot { dim, n, .. } => dim + n,
            _ => self.latent_dim(),
        }
    }

    pub fn data_dim(&self) -> usize {
        self.discriminator.input_dim()
    }

    pub fn mixture(&self) -> Option<&MixtureLatent<F>> {
        match &self.latent {
            LatentSource::Mixture(m) => Some(m),
            _ => None,
        }
    }

    pub fn mixture_mut(&mut self) -> Option<&mut MixtureLatent<F>> {
        match &mut self.latent {
            LatentSource::Mixture(m) => Some(m),
            _ => None,
        }
    }

    pub fn param_report(&self) -> ParamReport {
        ParamReport {
            generator: self.generators.iter().map(Mlp::param_count).sum(),
            latent: self.mixture().map_or(0, |m| 2 * m.n() * m.k()),
            discriminator: self.discriminator.param_count(),
        }
    }

    /// Flattened generator-side parameters (generators, then μ and σ).
    pub fn generator_snapshot(&self) -> Vec<F> {
        let mut out: Vec<F> = self.generators.iter().flat_map(Mlp::snapshot).collect();
        if let Some(m) = self.mixture() {
            out.extend_from_slice(m.mu().value().data());
            out.extend_from_slice(m.sigma().value().data());
        }
        out
    }

    fn simple_inputs(
        &self,
        prior: Prior,
        dim: usize,
        onehot: Option<usize>,
        batch: usize,
        rng: &mut Rng,
    ) -> Tensor<F> {
        let z: Tensor<F> = sample_simple(prior, batch, dim, rng);
        let Some(n) = onehot else { return z };
        let mut data = Vec::with_capacity(batch * (dim + n));
        for r in 0..batch {
            let code = rng.random_range(0..n);
            data.extend_from_slice(z.row(r));
            data.extend((0..n).map(|j| if j == code { F::one() } else { F::zero() }));
        }
        Tensor::matrix(batch, dim + n, data).expect("sized")
    }

    /// Draws `count` samples from the generator (no gradient bookkeeping).
    pub fn sample(&self, count: usize, batching: Batching, rng: &mut Rng) -> Result<Tensor<F>> {
        if count == 0 {
            return Ok(Tensor::zeros(&[0, self.data_dim()]));
        }
        match &self.latent {
            LatentSource::Simple { prior, dim } => {
                let z = self.simple_inputs(*prior, *dim, None, count, rng);
                self.generators[0].predict(&z)
            }
            LatentSource::OneHot { prior, dim, n } => {
                let z = self.simple_inputs(*prior, *dim, Some(*n), count, rng);
                self.generators[0].predict(&z)
            }
            LatentSource::Mixture(mix) => {
                let (z, ids) = mix.sample_values(count, batching, rng);
                if self.variant != Variant::Ensemble {
                    return self.generators[0].predict(&z);
                }
                let d = self.data_dim();
                let mut out = vec![F::zero(); count * d];
                for (g, gen) in self.generators.iter().enumerate() {
                    let rows: Vec<usize> = (0..count).filter(|&r| ids[r] == g).collect();
                    if rows.is_empty() {
                        continue;
                    }
                    let x = gen.predict(&z.select_rows(&rows))?;
                    for (i, &r) in rows.iter().enumerate() {
                        out[r * d..(r + 1) * d].copy_from_slice(x.row(i));
                    }
                }
                Tensor::matrix(count, d, out)
            }
        }
    }

    /// Records a generator forward pass on `tape` with trainable generator
    /// (and latent) parameters. An ensemble picks one generator uniformly
    /// and feeds it samples of its own component only.
    pub fn generate(
        &self,
        tape: &mut Tape<F>,
        batch: usize,
        batching: Batching,
        rng: &mut Rng,
    ) -> Result<Generated<F>> {
        match &self.latent {
            LatentSource::Simple { prior, dim } => {
                let z = tape.constant(self.simple_inputs(*prior, *dim, None, batch, rng));
                let x = self.generators[0].forward(tape, z, true)?;
                Ok(Generated {
                    x,
                    latent: None,
                    generator: 0,
                })
            }
            LatentSource::OneHot { prior, dim, n } => {
                let z = tape.constant(self.simple_inputs(*prior, *dim, Some(*n), batch, rng));
                let x = self.generators[0].forward(tape, z, true)?;
                Ok(Generated {
                    x,
                    latent: None,
                    generator: 0,
                })
            }
            LatentSource::Mixture(mix) => {
                let (generator, lb) = if self.variant == Variant::Ensemble {
                    let g = rng.random_range(0..self.generators.len());
                    (g, mix.sample_components(tape, vec![g; batch], true, rng)?)
                } else {
                    (0, mix.sample(tape, batch, batching, true, rng)?)
                };
                let x = self.generators[generator].forward(tape, lb.z, true)?;
                Ok(Generated {
                    x,
                    latent: Some(lb),
                    generator,
                })
            }
        }
    }

    /// Discriminator probabilities for a batch of data.
    pub fn discriminate(&self, x: &Tensor<F>) -> Result<Tensor<F>> {
        self.discriminator.predict(x)
    }
}
