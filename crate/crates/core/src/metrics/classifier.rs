use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::autodiff::{log_sum_exp, Tape, Tensor};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::nets::{softmax_cross_entropy, Activation, Adam, AdamConfig, Init, Mlp, MlpRecord};
use crate::rng::Rng;
use crate::scalar::Scalar;

use super::probs::{argmax, ClassProbMatrix};

pub const TOY_ACCURACY_FLOOR: f64 = 0.9;
pub const MNIST_ACCURACY_FLOOR: f64 = 0.8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClassifierConfig {
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub optimizer: AdamConfig,
    pub iterations: usize,
    pub batch: usize,
    /// Share of labelled rows held out for the accuracy check.
    pub holdout: f64,
    pub accuracy_floor: f64,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        Self {
            hidden: vec![64],
            activation: Activation::Relu,
            optimizer: AdamConfig {
                beta1: 0.9,
                ..AdamConfig::with_lr(1e-2)
            },
            iterations: 2000,
            batch: 64,
            holdout: 0.2,
            accuracy_floor: TOY_ACCURACY_FLOOR,
        }
    }
}

/// Softmax classifier standing in for a pretrained feature network.
#[derive(Clone, Debug)]
pub struct Classifier {
    net: Mlp<f64>,
    classes: usize,
    accuracy: f64,
    floor: f64,
}

/// Serializable form of a [`Classifier`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassifierRecord {
    pub classes: usize,
    pub heldout_accuracy: f64,
    pub accuracy_floor: f64,
    pub network: MlpRecord,
}

fn softmax_rows(logits: &Tensor<f64>) -> Vec<f64> {
    let mut out = Vec::with_capacity(logits.len());
    for r in 0..logits.rows() {
        let row = logits.row(r);
        let lse = log_sum_exp(row);
        out.extend(row.iter().map(|&v| (v - lse).exp()));
    }
    // renormalize away rounding so rows pass the stochastic check
    for row in out.chunks_mut(logits.cols()) {
        let s: f64 = row.iter().sum();
        row.iter_mut().for_each(|v| *v /= s);
    }
    out
}

impl Classifier {
    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn heldout_accuracy(&self) -> f64 {
        self.accuracy
    }

    pub fn accuracy_floor(&self) -> f64 {
        self.floor
    }

    pub fn network(&self) -> &Mlp<f64> {
        &self.net
    }

    fn check_floor(&self) -> Result<()> {
        if self.accuracy < self.floor {
            return Err(Error::MetricUnavailable(format!(
                "classifier held-out accuracy {:.4} is below the floor {:.2}",
                self.accuracy, self.floor
            )));
        }
        Ok(())
    }

    /// `p(y|x)` for every row of `x`; refuses when the classifier is below its floor.
    pub fn probabilities<F: Scalar>(&self, x: &Tensor<F>) -> Result<ClassProbMatrix> {
        self.check_floor()?;
        let logits = self.net.predict(&x.cast::<f64>())?;
        ClassProbMatrix::new(logits.rows(), self.classes, softmax_rows(&logits))
    }

    pub fn predict<F: Scalar>(&self, x: &Tensor<F>) -> Result<Vec<usize>> {
        let logits = self.net.predict(&x.cast::<f64>())?;
        Ok((0..logits.rows()).map(|r| argmax(logits.row(r))).collect())
    }

    pub fn accuracy<F: Scalar>(&self, d: &Dataset<F>) -> Result<f64> {
        let labels = d
            .labels
            .as_ref()
            .ok_or_else(|| Error::Data("accuracy needs labels".into()))?;
        let pred = self.predict(&d.samples)?;
        let hits = pred.iter().zip(labels).filter(|(a, b)| a == b).count();
        Ok(hits as f64 / labels.len().max(1) as f64)
    }

    pub fn to_record(&self) -> ClassifierRecord {
        ClassifierRecord {
            classes: self.classes,
            heldout_accuracy: self.accuracy,
            accuracy_floor: self.floor,
            network: MlpRecord::from_mlp(&self.net),
        }
    }

    pub fn from_record(rec: &ClassifierRecord) -> Result<Self> {
        let net = rec.network.to_mlp("classifier")?;
        if net.output_dim() != rec.classes {
            return Err(Error::Format(format!(
                "classifier emits {} logits but records {} classes",
                net.output_dim(),
                rec.classes
            )));
        }
        Ok(Self {
            net,
            classes: rec.classes,
            accuracy: rec.heldout_accuracy,
            floor: rec.accuracy_floor,
        })
    }
}

/// Trains a softmax MLP on labelled data and checks held-out accuracy.
///
/// Fails with [`Error::MetricUnavailable`] when the accuracy falls below
/// `cfg.accuracy_floor`, since scores built on such `p(y|x)` mean little.
pub fn train_classifier<F: Scalar>(
    d: &Dataset<F>,
    cfg: &ClassifierConfig,
    rng: &mut Rng,
) -> Result<Classifier> {
    let labels = d
        .labels
        .as_ref()
        .ok_or_else(|| Error::Config("classifier training needs labels".into()))?;
    let present = d.classes();
    if present.len() < 2 {
        return Err(Error::Config(format!(
            "classifier training needs at least 2 classes, found {}",
            present.len()
        )));
    }
    if cfg.batch == 0 || !(cfg.holdout > 0.0 && cfg.holdout < 1.0) {
        return Err(Error::Config(
            "classifier needs batch >= 1 and holdout in (0, 1)".into(),
        ));
    }
    let classes = present[present.len() - 1] + 1;
    let mut idx: Vec<usize> = (0..d.len()).collect();
    idx.shuffle(rng);
    let n_hold = ((d.len() as f64 * cfg.holdout).round() as usize).clamp(1, d.len() - 1);
    let (hold, fit) = idx.split_at(n_hold);
    let fit_x = d.samples.select_rows(fit).cast::<f64>();
    let fit_y: Vec<usize> = fit.iter().map(|&i| labels[i]).collect();

    let mut sizes = vec![d.dim()];
    sizes.extend_from_slice(&cfg.hidden);
    sizes.push(classes);
    let mut acts = vec![cfg.activation; cfg.hidden.len()];
    acts.push(Activation::None);
    let mut net: Mlp<f64> = Mlp::named("classifier", &sizes, &acts, Init::XavierUniform, rng)?;
    let mut opt = Adam::new(cfg.optimizer);

    use rand::Rng as _;
    for _ in 0..cfg.iterations {
        let rows: Vec<usize> = (0..cfg.batch)
            .map(|_| rng.random_range(0..fit.len()))
            .collect();
        let mut onehot = vec![0.0; cfg.batch * classes];
        for (b, &r) in rows.iter().enumerate() {
            onehot[b * classes + fit_y[r]] = 1.0;
        }
        let mut tape = Tape::new();
        let x = tape.constant(fit_x.select_rows(&rows));
        let y = tape.constant(Tensor::matrix(cfg.batch, classes, onehot)?);
        let logits = net.forward(&mut tape, x, true)?;
        let loss = softmax_cross_entropy(&mut tape, logits, y)?;
        tape.backward(loss)?;
        net.zero_grad();
        net.collect_grads(&tape);
        opt.step(&mut net.params_mut())?;
    }

    let mut clf = Classifier {
        net,
        classes,
        accuracy: 0.0,
        floor: cfg.accuracy_floor,
    };
    clf.accuracy = clf.accuracy(&d.select(hold))?;
    clf.check_floor()?;
    Ok(clf)
}
