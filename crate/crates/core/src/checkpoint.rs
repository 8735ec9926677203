//! JSON checkpoints for trained models and classifiers.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::autodiff::Tensor;
use crate::error::{Error, Result};
use crate::gan::{GanModel, LatentSource, Variant};
use crate::latent::{MixtureLatent, Prior};
use crate::nets::MlpRecord;
use crate::scalar::Scalar;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LatentRecord {
    Simple {
        prior: Prior,
        dim: usize,
    },
    Mixture {
        n: usize,
        k: usize,
        mu: Vec<f64>,
        sigma: Vec<f64>,
    },
    OneHot {
        prior: Prior,
        dim: usize,
        n: usize,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GanCheckpoint {
    pub format_version: u32,
    pub variant: Variant,
    pub generators: Vec<MlpRecord>,
    pub discriminator: MlpRecord,
    pub latent: LatentRecord,
}

impl GanCheckpoint {
    pub fn from_model<F: Scalar>(m: &GanModel<F>) -> Self {
        let latent = match &m.latent {
            LatentSource::Simple { prior, dim } => LatentRecord::Simple {
                prior: *prior,
                dim: *dim,
            },
            LatentSource::OneHot { prior, dim, n } => LatentRecord::OneHot {
                prior: *prior,
                dim: *dim,
                n: *n,
            },
            LatentSource::Mixture(mix) => LatentRecord::Mixture {
                n: mix.n(),
                k: mix.k(),
                mu: mix.mu().value().to_f64_vec(),
                sigma: mix.sigma().value().to_f64_vec(),
            },
        };
        Self {
            format_version: FORMAT_VERSION,
            variant: m.variant,
            generators: m.generators.iter().map(MlpRecord::from_mlp).collect(),
            discriminator: MlpRecord::from_mlp(&m.discriminator),
            latent,
        }
    }

    pub fn to_model<F: Scalar>(&self) -> Result<GanModel<F>> {
        if self.format_version != FORMAT_VERSION {
            return Err(Error::Format(format!(
                "checkpoint format {} is not supported (expected {FORMAT_VERSION})",
                self.format_version
            )));
        }
        let generators = self
            .generators
            .iter()
            .enumerate()
            .map(|(i, g)| {
                g.to_mlp(&if self.generators.len() == 1 {
                    "gen".into()
                } else {
                    format!("gen{i}")
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let discriminator = self.discriminator.to_mlp("disc")?;
        let latent = match &self.latent {
            LatentRecord::Simple { prior, dim } => LatentSource::Simple {
                prior: *prior,
                dim: *dim,
            },
            LatentRecord::OneHot { prior, dim, n } => LatentSource::OneHot {
                prior: *prior,
                dim: *dim,
                n: *n,
            },
            LatentRecord::Mixture { n, k, mu, sigma } => {
                LatentSource::Mixture(MixtureLatent::from_values(
                    Tensor::from_f64(vec![*n, *k], mu)?,
                    Tensor::from_f64(vec![*n, *k], sigma)?,
                )?)
            }
        };
        GanModel::new(self.variant, generators, discriminator, latent)
            .map_err(|e| Error::Format(e.to_string()))
    }
}

pub fn write_json<T: Serialize, W: Write>(value: &T, out: W) -> Result<()> {
    let mut w = BufWriter::new(out);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned, R: Read>(input: R) -> Result<T> {
    Ok(serde_json::from_reader(BufReader::new(input))?)
}

pub fn save<T: Serialize>(value: &T, path: impl AsRef<Path>) -> Result<()> {
    write_json(value, File::create(path)?)
}

pub fn load<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<T> {
    read_json(File::open(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gan::{build_variant, ArchConfig};
    use crate::latent::Batching;
    use crate::rng::seeded;

    #[test]
    fn every_variant_round_trips_exactly() {
        let arch = ArchConfig {
            components: 3,
            ..ArchConfig::default()
        };
        for v in Variant::ALL {
            let m = build_variant::<f64>(v, &arch, &mut seeded(4)).unwrap();
            let mut buf = Vec::new();
            write_json(&GanCheckpoint::from_model(&m), &mut buf).unwrap();
            let back: GanCheckpoint = read_json(&buf[..]).unwrap();
            let r: GanModel<f64> = back.to_model().unwrap();
            assert_eq!(r.generator_snapshot(), m.generator_snapshot(), "{v}");
            assert_eq!(r.discriminator.snapshot(), m.discriminator.snapshot());
            let a = m.sample(20, Batching::Uniform, &mut seeded(1)).unwrap();
            let b = r.sample(20, Batching::Uniform, &mut seeded(1)).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn rejects_unknown_version_and_bad_shapes() {
        let m =
            build_variant::<f64>(Variant::Deligan, &ArchConfig::default(), &mut seeded(0)).unwrap();
        let mut c = GanCheckpoint::from_model(&m);
        c.format_version = 99;
        assert!(matches!(c.to_model::<f64>(), Err(Error::Format(_))));
        let mut c = GanCheckpoint::from_model(&m);
        c.generators[0].layers[0].weight.pop();
        assert!(c.to_model::<f64>().is_err());
        assert!(read_json::<GanCheckpoint, _>(&b"{\"format_version\": 1}"[..]).is_err());
    }
}
