use std::fs;
use std::path::{Path, PathBuf};

use deligan::data::{load_mnist_idx, sample_toy, subset_balanced, Dataset, ToySpec};
use deligan::gan::{ArchConfig, TrainConfig, Variant};
use deligan::latent::{Batching, Prior};
use deligan::metrics::ClassifierConfig;
use deligan::nets::{Activation, AdamConfig, Init};
use deligan::rng::Streams;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const CONFIG_VERSION: u32 = 1;

/// One training / evaluation run, as read from a TOML file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub version: u32,
    pub variant: Variant,
    /// Root of every random stream in the run.
    pub seed: u64,
    /// Run directory; relative paths resolve against the config file.
    #[serde(default)]
    pub out: Option<PathBuf>,
    pub data: DataSpec,
    #[serde(default)]
    pub network: NetworkSection,
    #[serde(default)]
    pub latent: LatentSection,
    #[serde(default)]
    pub train: TrainSection,
    #[serde(default)]
    pub eval: EvalSection,
    #[serde(default)]
    pub classifier: ClassifierConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSpec {
    Toy {
        /// `unimodal` or `bimodal`; ignored when `modes` is given.
        #[serde(default)]
        preset: Option<String>,
        #[serde(default)]
        modes: Option<Vec<deligan::data::Mode>>,
        #[serde(default = "default_toy_samples")]
        samples: usize,
    },
    Mnist {
        images: PathBuf,
        labels: PathBuf,
        /// Balanced subset size per digit; all rows when absent.
        #[serde(default)]
        per_class: Option<usize>,
    },
    Csv {
        path: PathBuf,
    },
}

fn default_toy_samples() -> usize {
    5000
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkSection {
    pub g_hidden: Vec<usize>,
    pub g_activation: Activation,
    pub g_output: Activation,
    pub d_hidden: Vec<usize>,
    pub d_activation: Activation,
    pub init: Init,
}

impl Default for NetworkSection {
    fn default() -> Self {
        let a = ArchConfig::default();
        Self {
            g_hidden: a.g_hidden,
            g_activation: a.g_activation,
            g_output: a.g_output,
            d_hidden: a.d_hidden,
            d_activation: a.d_activation,
            init: a.init,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LatentSection {
    /// Components, experts or ensemble members.
    pub n: usize,
    pub k: usize,
    pub sigma0: f64,
    pub lambda: f64,
    pub prior: Prior,
    pub batching: Batching,
}

impl Default for LatentSection {
    fn default() -> Self {
        let a = ArchConfig::default();
        Self {
            n: a.components,
            k: a.latent_dim,
            sigma0: a.sigma0,
            lambda: TrainConfig::default().lambda,
            prior: a.prior,
            batching: Batching::Uniform,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub iterations: usize,
    pub batch: usize,
    pub d_lr: f64,
    pub g_lr: f64,
    pub latent_lr: Option<f64>,
    pub beta1: f64,
    pub beta2: f64,
    pub non_saturating: bool,
    pub snapshot_every: usize,
    /// Rewrite the checkpoint every this many iterations; 0 writes only at the end.
    pub checkpoint_every: usize,
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            iterations: t.iterations,
            batch: t.batch,
            d_lr: t.d_optimizer.lr,
            g_lr: t.g_optimizer.lr,
            latent_lr: t.latent_lr,
            beta1: t.g_optimizer.beta1,
            beta2: t.g_optimizer.beta2,
            non_saturating: t.non_saturating,
            snapshot_every: t.snapshot_every,
            checkpoint_every: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    pub splits: usize,
    pub pairs: usize,
    pub radius_sigmas: f64,
    pub samples: usize,
}

impl Default for EvalSection {
    fn default() -> Self {
        Self {
            splits: deligan::metrics::DEFAULT_SPLITS,
            pairs: deligan::metrics::DEFAULT_PAIRS_PER_SAMPLE,
            radius_sigmas: 3.0,
            samples: 5000,
        }
    }
}

impl ExperimentConfig {
    /// Reads, parses and validates a config file. Relative data and output
    /// paths are resolved against the file's directory.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
        let mut cfg =
            Self::parse(&text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        cfg.check_paths()?;
        Ok(cfg)
    }

    /// Parses TOML text; the error message carries the line and field.
    pub fn parse(text: &str) -> Result<Self, String> {
        let cfg: Self = toml::from_str(text).map_err(|e| e.to_string())?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    fn validate(&self) -> Result<(), String> {
        if self.version != CONFIG_VERSION {
            return Err(format!(
                "field `version`: unsupported value {} (expected {CONFIG_VERSION})",
                self.version
            ));
        }
        if let DataSpec::Toy {
            preset,
            modes,
            samples,
        } = &self.data
        {
            if *samples == 0 {
                return Err("field `data.samples`: must be at least 1".into());
            }
            if modes.is_none() && !matches!(preset.as_deref(), Some("unimodal" | "bimodal")) {
                return Err(
                    "field `data.preset`: expected `unimodal` or `bimodal` (or give `data.modes`)"
                        .into(),
                );
            }
        }
        if self.latent.n == 0 || self.latent.k == 0 {
            return Err("fields `latent.n` and `latent.k`: must be at least 1".into());
        }
        if !(self.latent.sigma0 > 0.0) {
            return Err("field `latent.sigma0`: must be positive".into());
        }
        if !(self.eval.radius_sigmas > 0.0) || self.eval.splits == 0 {
            return Err(
                "section `eval`: radius_sigmas must be positive and splits at least 1".into(),
            );
        }
        self.train_config()
            .validate()
            .map_err(|e| format!("section `train`: {e}"))?;
        Ok(())
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        match &mut self.data {
            DataSpec::Mnist { images, labels, .. } => {
                fix(images);
                fix(labels);
            }
            DataSpec::Csv { path } => fix(path),
            DataSpec::Toy { .. } => {}
        }
        if let Some(out) = &mut self.out {
            fix(out);
        }
    }

    fn check_paths(&self) -> Result<(), CliError> {
        let paths: Vec<&PathBuf> = match &self.data {
            DataSpec::Mnist { images, labels, .. } => vec![images, labels],
            DataSpec::Csv { path } => vec![path],
            DataSpec::Toy { .. } => vec![],
        };
        for p in paths {
            if !p.exists() {
                return Err(CliError::input(format!(
                    "data file {} does not exist",
                    p.display()
                )));
            }
        }
        Ok(())
    }

    /// The toy mixture this config describes, if any.
    pub fn toy_spec(&self) -> Option<ToySpec> {
        match &self.data {
            DataSpec::Toy { modes: Some(m), .. } => Some(ToySpec { modes: m.clone() }),
            DataSpec::Toy { preset, .. } => match preset.as_deref() {
                Some("unimodal") => Some(ToySpec::unimodal()),
                _ => Some(ToySpec::bimodal()),
            },
            _ => None,
        }
    }

    /// Loads or generates the training pool (stream `dataset`).
    pub fn dataset(&self, streams: &Streams) -> Result<Dataset<f64>, CliError> {
        let mut rng = streams.stream("dataset");
        let d = match &self.data {
            DataSpec::Toy { samples, .. } => {
                sample_toy(&self.toy_spec().expect("toy"), *samples, &mut rng)?
            }
            DataSpec::Mnist {
                images,
                labels,
                per_class,
            } => {
                let full = load_mnist_idx(images, labels)?;
                match per_class {
                    Some(k) => subset_balanced(&full, *k, &mut rng)?,
                    None => full,
                }
            }
            DataSpec::Csv { path } => {
                let f = fs::File::open(path)
                    .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
                Dataset::read_csv(f, path.display().to_string())?
            }
        };
        Ok(d)
    }

    pub fn arch(&self, data_dim: usize) -> ArchConfig {
        let n = &self.network;
        ArchConfig {
            data_dim,
            latent_dim: self.latent.k,
            components: self.latent.n,
            g_hidden: n.g_hidden.clone(),
            g_activation: n.g_activation,
            g_output: n.g_output,
            d_hidden: n.d_hidden.clone(),
            d_activation: n.d_activation,
            init: n.init,
            prior: self.latent.prior,
            sigma0: self.latent.sigma0,
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        let t = &self.train;
        let adam = |lr| AdamConfig {
            lr,
            beta1: t.beta1,
            beta2: t.beta2,
            ..AdamConfig::default()
        };
        TrainConfig {
            iterations: t.iterations,
            batch: t.batch,
            d_optimizer: adam(t.d_lr),
            g_optimizer: adam(t.g_lr),
            latent_lr: t.latent_lr,
            lambda: self.latent.lambda,
            non_saturating: t.non_saturating,
            batching: self.latent.batching,
            snapshot_every: t.snapshot_every,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
version = 1
variant = "deligan"
seed = 3

[data]
kind = "toy"
preset = "bimodal"
"#;

    #[test]
    fn minimal_config_takes_defaults() {
        let c = ExperimentConfig::parse(MINIMAL).unwrap();
        assert_eq!(c.variant, Variant::Deligan);
        assert_eq!(c.latent.n, 50);
        assert_eq!(c.train.iterations, 8000);
        assert_eq!(c.toy_spec(), Some(ToySpec::bimodal()));
        let back = ExperimentConfig::parse(&c.to_toml()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn diagnostics_name_the_field() {
        let e = ExperimentConfig::parse(&MINIMAL.replace("seed = 3", "seed = \"x\"")).unwrap_err();
        assert!(e.contains("seed") && e.contains("line"), "{e}");
        let e = ExperimentConfig::parse(&MINIMAL.replace("seed = 3\n", "")).unwrap_err();
        assert!(e.contains("seed"), "{e}");
        let e = ExperimentConfig::parse(&MINIMAL.replace("deligan", "wgan")).unwrap_err();
        assert!(e.contains("wgan"), "{e}");
        let e =
            ExperimentConfig::parse(&MINIMAL.replace("version = 1", "version = 2")).unwrap_err();
        assert!(e.contains("version"), "{e}");
        let e = ExperimentConfig::parse(&format!("{MINIMAL}\n[train]\nbatch = 0\n")).unwrap_err();
        assert!(e.contains("train"), "{e}");
        let e = ExperimentConfig::parse(&format!("{MINIMAL}\n[train]\nbogus = 1\n")).unwrap_err();
        assert!(e.contains("bogus"), "{e}");
    }
}
