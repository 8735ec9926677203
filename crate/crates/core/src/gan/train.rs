use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::autodiff::{Tape, Tensor};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::latent::{Batching, SIGMA_FLOOR};
use crate::nets::{Adam, AdamConfig};
use crate::rng::{Rng, Streams};
use crate::scalar::Scalar;

use super::loss::{discriminator_loss, generator_loss};
use super::model::{GanModel, Variant};

/// Losses above this magnitude count as divergence.
pub const DIVERGENCE_LIMIT: f64 = 1e6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub iterations: usize,
    pub batch: usize,
    pub d_optimizer: AdamConfig,
    pub g_optimizer: AdamConfig,
    /// Learning rate for μ and σ; falls back to the generator's.
    pub latent_lr: Option<f64>,
    /// Weight of the σ penalty.
    pub lambda: f64,
    /// Use `−log D(G(z))` instead of `log(1 − D(G(z)))`.
    pub non_saturating: bool,
    pub batching: Batching,
    /// μ snapshot period in iterations; 0 disables snapshots.
    pub snapshot_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            iterations: 8000,
            batch: 64,
            d_optimizer: AdamConfig::with_lr(2e-4),
            g_optimizer: AdamConfig::with_lr(1e-3),
            latent_lr: None,
            lambda: 1.0,
            non_saturating: false,
            batching: Batching::Uniform,
            snapshot_every: 100,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch == 0 {
            return Err(Error::Config("batch must be at least 1".into()));
        }
        let lrs = [
            Some(self.d_optimizer.lr),
            Some(self.g_optimizer.lr),
            self.latent_lr,
        ];
        if lrs
            .into_iter()
            .flatten()
            .any(|lr| !(lr > 0.0 && lr.is_finite()))
        {
            return Err(Error::Config(
                "learning rates must be positive and finite".into(),
            ));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::Config(format!(
                "lambda must be finite and >= 0, got {}",
                self.lambda
            )));
        }
        if let Batching::PerComponent { m: 0 } = self.batching {
            return Err(Error::Config("per-component batching needs m >= 1".into()));
        }
        Ok(())
    }
}

/// One row of the training log.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrainRecord {
    pub iter: usize,
    pub d_loss: f64,
    pub g_loss: f64,
    pub d_real_mean: f64,
    pub d_fake_mean: f64,
    pub sigma_min: Option<f64>,
    pub sigma_mean: Option<f64>,
}

/// Component means at one point of training.
#[derive(Clone, Debug, PartialEq)]
pub struct MuSnapshot {
    pub iter: usize,
    pub mu: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum RunStatus {
    Completed,
    Diverged { iter: usize, reason: String },
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainHistory {
    pub records: Vec<TrainRecord>,
    pub snapshots: Vec<MuSnapshot>,
    pub status: RunStatus,
}

impl TrainHistory {
    pub fn diverged(&self) -> bool {
        matches!(self.status, RunStatus::Diverged { .. })
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        if self.records.is_empty() {
            w.write_record([
                "iter",
                "d_loss",
                "g_loss",
                "d_real_mean",
                "d_fake_mean",
                "sigma_min",
                "sigma_mean",
            ])?;
        }
        for r in &self.records {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Long format: `iter, component, mu_0..mu_{K-1}`.
    pub fn write_snapshots_csv<W: Write>(&self, out: W, k: usize) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["iter".to_string(), "component".to_string()];
        header.extend((0..k).map(|j| format!("mu_{j}")));
        w.write_record(&header)?;
        for s in &self.snapshots {
            for (c, row) in s.mu.iter().enumerate() {
                let mut rec = vec![s.iter.to_string(), c.to_string()];
                rec.extend(row.iter().map(|v| v.to_string()));
                w.write_record(&rec)?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Discriminator-phase summary.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DPhase {
    pub loss: f64,
    pub real_mean: f64,
    pub fake_mean: f64,
}

/// Alternating optimizer state for one run.
pub struct Trainer<F> {
    model: GanModel<F>,
    cfg: TrainConfig,
    d_opt: Adam<F>,
    g_opt: Adam<F>,
    latent_opt: Adam<F>,
    data_rng: Rng,
    latent_rng: Rng,
    iter: usize,
}

fn mean_of<F: Scalar>(t: &Tensor<F>) -> f64 {
    t.data().iter().map(|v| v.as_f64()).sum::<f64>() / t.len().max(1) as f64
}

impl<F: Scalar> Trainer<F> {
    /// Randomness comes from the `data` and `latent` substreams of `streams`.
    pub fn new(model: GanModel<F>, cfg: TrainConfig, streams: &Streams) -> Result<Self> {
        cfg.validate()?;
        let latent_cfg = AdamConfig {
            lr: cfg.latent_lr.unwrap_or(cfg.g_optimizer.lr),
            ..cfg.g_optimizer
        };
        Ok(Self {
            d_opt: Adam::new(cfg.d_optimizer),
            g_opt: Adam::new(cfg.g_optimizer),
            latent_opt: Adam::new(latent_cfg),
            data_rng: streams.stream("data"),
            latent_rng: streams.stream("latent"),
            model,
            cfg,
            iter: 0,
        })
    }

    pub fn model(&self) -> &GanModel<F> {
        &self.model
    }

    pub fn model_mut(&mut self) -> &mut GanModel<F> {
        &mut self.model
    }

    pub fn into_model(self) -> GanModel<F> {
        self.model
    }

    pub fn config(&self) -> &TrainConfig {
        &self.cfg
    }

    pub fn iteration(&self) -> usize {
        self.iter
    }

    /// One discriminator update on `real` against a fresh fake batch.
    /// Generator and latent parameters are not touched.
    pub fn d_phase(&mut self, real: &Tensor<F>) -> Result<DPhase> {
        let fake = self
            .model
            .sample(real.rows(), self.cfg.batching, &mut self.latent_rng)?;
        let mut tape = Tape::new();
        let xr = tape.constant(real.clone());
        let xf = tape.constant(fake);
        let d = &self.model.discriminator;
        let dr = d.forward(&mut tape, xr, true)?;
        let df = d.forward(&mut tape, xf, true)?;
        let loss = discriminator_loss(&mut tape, dr, df)?;
        tape.backward(loss)?;
        let summary = DPhase {
            loss: tape.value(loss).item().as_f64(),
            real_mean: mean_of(tape.value(dr)),
            fake_mean: mean_of(tape.value(df)),
        };
        let d = &mut self.model.discriminator;
        d.zero_grad();
        d.collect_grads(&tape);
        self.d_opt.step(&mut d.params_mut())?;
        Ok(summary)
    }

    /// One generator update (plus μ and σ when the latent is a mixture)
    /// on a fresh fake batch. The discriminator is not touched.
    pub fn g_phase(&mut self) -> Result<f64> {
        let mut tape = Tape::new();
        let gen = self.model.generate(
            &mut tape,
            self.cfg.batch,
            self.cfg.batching,
            &mut self.latent_rng,
        )?;
        let df = self.model.discriminator.forward(&mut tape, gen.x, false)?;
        let loss = generator_loss(
            &mut tape,
            df,
            self.model.mixture(),
            self.cfg.lambda,
            self.cfg.non_saturating,
        )?;
        tape.backward(loss)?;
        let value = tape.value(loss).item().as_f64();

        let ensemble = self.model.variant == Variant::Ensemble;
        let g = &mut self.model.generators[gen.generator];
        g.zero_grad();
        g.collect_grads(&tape);
        self.g_opt.step(&mut g.params_mut())?;
        if let Some(mix) = self.model.mixture_mut() {
            mix.zero_grad();
            mix.collect_grads(&tape);
            if ensemble {
                let rows = [gen.generator];
                let [mu, sigma] = mix.params_mut();
                self.latent_opt.step_rows(mu, &rows)?;
                self.latent_opt.step_rows(sigma, &rows)?;
            } else {
                self.latent_opt.step(&mut mix.params_mut())?;
            }
            mix.clamp_sigma(SIGMA_FLOOR);
        }
        Ok(value)
    }

    /// D phase on a real batch drawn with replacement, then G phase.
    pub fn step(&mut self, data: &Dataset<F>) -> Result<TrainRecord> {
        if data.is_empty() {
            return Err(Error::Data("training pool is empty".into()));
        }
        if data.dim() != self.model.data_dim() {
            return Err(Error::Dimension {
                op: "train_step",
                lhs: vec![data.dim()],
                rhs: vec![self.model.data_dim()],
            });
        }
        let real = data.sample_batch(self.cfg.batch, &mut self.data_rng);
        let d = self.d_phase(&real)?;
        let g_loss = self.g_phase()?;
        self.iter += 1;
        let (sigma_min, sigma_mean) = match self.model.mixture() {
            Some(m) => {
                let (lo, avg) = m.sigma_stats();
                (Some(lo), Some(avg))
            }
            None => (None, None),
        };
        Ok(TrainRecord {
            iter: self.iter,
            d_loss: d.loss,
            g_loss,
            d_real_mean: d.real_mean,
            d_fake_mean: d.fake_mean,
            sigma_min,
            sigma_mean,
        })
    }

    fn snapshot(&self) -> Option<MuSnapshot> {
        let m = self.model.mixture()?;
        let mu = m.mu().value();
        Some(MuSnapshot {
            iter: self.iter,
            mu: (0..mu.rows())
                .map(|r| mu.row(r).iter().map(|v| v.as_f64()).collect())
                .collect(),
        })
    }
}

pub(crate) fn divergence(rec: &TrainRecord) -> Option<String> {
    for (name, v) in [("d_loss", rec.d_loss), ("g_loss", rec.g_loss)] {
        if !v.is_finite() || v.abs() > DIVERGENCE_LIMIT {
            return Some(format!("{name} = {v}"));
        }
    }
    None
}

/// Runs `cfg.iterations` alternating steps; see [`train_with`].
pub fn train<F: Scalar>(
    model: GanModel<F>,
    data: &Dataset<F>,
    cfg: &TrainConfig,
    streams: &Streams,
) -> Result<(GanModel<F>, TrainHistory)> {
    train_with(model, data, cfg, streams, |_, _| Ok(()))
}

/// Like [`train`], calling `hook` after every iteration (for periodic
/// checkpoints). A non-finite or exploding loss stops the run early with
/// [`RunStatus::Diverged`]; the last good record is kept.
pub fn train_with<F: Scalar>(
    model: GanModel<F>,
    data: &Dataset<F>,
    cfg: &TrainConfig,
    streams: &Streams,
    mut hook: impl FnMut(&TrainRecord, &GanModel<F>) -> Result<()>,
) -> Result<(GanModel<F>, TrainHistory)> {
    let mut trainer = Trainer::new(model, cfg.clone(), streams)?;
    let mut history = TrainHistory {
        records: Vec::with_capacity(cfg.iterations),
        snapshots: Vec::new(),
        status: RunStatus::Completed,
    };
    let snap_every = cfg.snapshot_every;
    if snap_every > 0 {
        history.snapshots.extend(trainer.snapshot());
    }
    for _ in 0..cfg.iterations {
        let iter = trainer.iteration() + 1;
        let rec = match trainer.step(data) {
            Ok(rec) => rec,
            Err(e @ (Error::NonFinite { .. } | Error::NonFiniteGradient(_))) => {
                history.status = RunStatus::Diverged {
                    iter,
                    reason: e.to_string(),
                };
                break;
            }
            Err(e) => return Err(e),
        };
        if let Some(reason) = divergence(&rec) {
            history.status = RunStatus::Diverged { iter, reason };
            break;
        }
        hook(&rec, trainer.model())?;
        history.records.push(rec);
        if snap_every > 0 && iter % snap_every == 0 {
            history.snapshots.extend(trainer.snapshot());
        }
    }
    Ok((trainer.into_model(), history))
}
