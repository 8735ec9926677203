use std::fs::{self, File};
use std::path::{Path, PathBuf};

use deligan::autodiff::Tensor;
use deligan::checkpoint::{self, GanCheckpoint};
use deligan::data::Dataset;
use deligan::gan::{build_variant, train_with, GanModel, RunStatus, TrainHistory, Variant};
use deligan::latent::Batching;
use deligan::metrics::{
    inception_score, mode_coverage, modified_inception_score, nearest_neighbors, train_classifier,
    write_reports_csv, ClassProbMatrix, Classifier, ClassifierRecord, Coverage, ScoreReport,
};
use deligan::rng::Streams;
use rayon::prelude::*;

use crate::config::ExperimentConfig;
use crate::error::{CliError, EXIT_DIVERGED};

pub const CHECKPOINT_FILE: &str = "checkpoint.json";
pub const HISTORY_FILE: &str = "history.csv";
pub const SNAPSHOT_FILE: &str = "mu_snapshots.csv";
pub const THREADS_ENV: &str = "DELIGAN_THREADS";

fn create(path: &Path) -> Result<File, CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    File::create(path).map_err(|e| CliError::new(1, format!("{}: {e}", path.display())))
}

fn open(path: &Path) -> Result<File, CliError> {
    File::open(path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

pub fn load_gan(path: &Path) -> Result<GanModel<f64>, CliError> {
    let ck: GanCheckpoint = checkpoint::read_json(open(path)?).map_err(|e| {
        CliError::input(format!("{}: not a model checkpoint ({e})", path.display()))
    })?;
    Ok(ck.to_model()?)
}

pub fn load_classifier(path: &Path) -> Result<Classifier, CliError> {
    let rec: ClassifierRecord = checkpoint::read_json(open(path)?).map_err(|e| {
        CliError::input(format!(
            "{}: not a classifier checkpoint ({e})",
            path.display()
        ))
    })?;
    Ok(Classifier::from_record(&rec)?)
}

/// Reads a sample matrix written by `sample` (a `label` column is ignored).
pub fn read_samples(path: &Path) -> Result<Tensor<f64>, CliError> {
    Ok(Dataset::<f64>::read_csv(open(path)?, path.display().to_string())?.samples)
}

pub fn write_samples(x: &Tensor<f64>, path: &Path) -> Result<(), CliError> {
    let d = Dataset::new(x.clone(), None, "samples")?;
    d.write_csv(create(path)?)?;
    Ok(())
}

pub struct TrainOutcome {
    pub model: GanModel<f64>,
    pub history: TrainHistory,
    pub dir: PathBuf,
}

/// Trains one run into `dir`: checkpoint, per-iteration history and μ snapshots.
pub fn train_run(cfg: &ExperimentConfig, dir: &Path) -> Result<TrainOutcome, CliError> {
    fs::create_dir_all(dir)?;
    let streams = Streams::new(cfg.seed);
    let data = cfg.dataset(&streams)?;
    let arch = cfg.arch(data.dim());
    let model = build_variant::<f64>(cfg.variant, &arch, &mut streams.stream("init"))?;
    let ck_path = dir.join(CHECKPOINT_FILE);
    let every = cfg.train.checkpoint_every;
    let (model, history) = train_with(model, &data, &cfg.train_config(), &streams, |rec, m| {
        if every > 0 && rec.iter % every == 0 {
            checkpoint::save(&GanCheckpoint::from_model(m), &ck_path)?;
        }
        Ok(())
    })?;
    checkpoint::save(&GanCheckpoint::from_model(&model), &ck_path)?;
    history.write_csv(create(&dir.join(HISTORY_FILE))?)?;
    history.write_snapshots_csv(create(&dir.join(SNAPSHOT_FILE))?, model.latent_dim())?;
    Ok(TrainOutcome {
        model,
        history,
        dir: dir.to_path_buf(),
    })
}

/// `train` subcommand; a diverged run keeps its artifacts but exits non-zero.
pub fn cmd_train(cfg: &ExperimentConfig, dir: &Path) -> Result<TrainOutcome, CliError> {
    let out = train_run(cfg, dir)?;
    if let RunStatus::Diverged { iter, reason } = &out.history.status {
        return Err(CliError::new(
            EXIT_DIVERGED,
            format!("status=diverged at iteration {iter}: {reason}"),
        ));
    }
    Ok(out)
}

pub fn cmd_sample(
    checkpoint: &Path,
    n: usize,
    seed: u64,
    out: &Path,
) -> Result<Tensor<f64>, CliError> {
    let model = load_gan(checkpoint)?;
    let x = model.sample(
        n,
        Batching::Uniform,
        &mut Streams::new(seed).stream("latent"),
    )?;
    write_samples(&x, out)?;
    Ok(x)
}

pub struct EvalInput<'a> {
    pub samples: Option<&'a Path>,
    pub classifier: Option<&'a Path>,
    /// Precomputed `p(y|x)` table, one row per sample.
    pub probs: Option<&'a Path>,
    pub splits: usize,
    pub pairs: usize,
    pub seed: u64,
}

fn read_probs(path: &Path) -> Result<ClassProbMatrix, CliError> {
    let t = read_samples(path)?;
    Ok(ClassProbMatrix::from_tensor(&t)?)
}

/// Inception score and modified inception score, written under one header.
pub fn cmd_eval(input: &EvalInput<'_>, out: &Path) -> Result<Vec<ScoreReport>, CliError> {
    let probs = match (input.probs, input.samples, input.classifier) {
        (Some(p), _, _) => read_probs(p)?,
        (None, Some(s), Some(c)) => {
            let clf = load_classifier(c)?;
            let x = read_samples(s)?;
            clf.probabilities(&x)?
        }
        _ => {
            return Err(CliError::input(
                "eval needs --probs, or --samples with --checkpoint",
            ))
        }
    };
    let is = inception_score(&probs, input.splits)?;
    let mis = modified_inception_score(
        &probs,
        input.splits,
        input.pairs,
        &mut Streams::new(input.seed).stream("pairing"),
    )?;
    let reports = vec![is, mis];
    write_reports_csv(&reports, create(out)?)?;
    Ok(reports)
}

pub fn cmd_classifier(cfg: &ExperimentConfig, out: &Path) -> Result<Classifier, CliError> {
    let streams = Streams::new(cfg.seed);
    let data = cfg.dataset(&streams)?;
    let clf = train_classifier(&data, &cfg.classifier, &mut streams.stream("classifier"))?;
    checkpoint::save(&clf.to_record(), out)?;
    Ok(clf)
}

/// One row per (sample, rank): `sample,rank,index,distance`.
pub fn cmd_nn_grid(
    samples: &Tensor<f64>,
    train: &Tensor<f64>,
    k: usize,
    out: &Path,
) -> Result<(), CliError> {
    let nn = nearest_neighbors(samples, train, k)?;
    let mut w = csv::Writer::from_writer(create(out)?);
    w.write_record(["sample", "rank", "index", "distance"])
        .map_err(deligan::Error::from)?;
    for (g, (idx, dist)) in nn.indices.iter().zip(&nn.distances).enumerate() {
        for (rank, (i, d)) in idx.iter().zip(dist).enumerate() {
            w.write_record([
                g.to_string(),
                (rank + 1).to_string(),
                i.to_string(),
                d.to_string(),
            ])
            .map_err(deligan::Error::from)?;
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Clone, Debug)]
pub struct SweepRow {
    pub variant: Variant,
    pub seed: u64,
    pub status: String,
    pub iterations: usize,
    pub params: usize,
    pub coverage: Option<Coverage>,
}

/// Worker threads for `sweep`: `DELIGAN_THREADS` when set, else all cores.
pub fn sweep_threads() -> Result<usize, CliError> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| {
                CliError::input(format!(
                    "{THREADS_ENV} must be a positive integer, got `{v}`"
                ))
            }),
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

/// Trains every (variant, seed) pair in its own run directory under `out`
/// and writes `sweep.csv` with mode coverage for toy data.
pub fn cmd_sweep(
    cfg: &ExperimentConfig,
    variants: &[Variant],
    seeds: &[u64],
    out: &Path,
) -> Result<Vec<SweepRow>, CliError> {
    let jobs: Vec<(Variant, u64)> = variants
        .iter()
        .flat_map(|&v| seeds.iter().map(move |&s| (v, s)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(sweep_threads()?)
        .build()
        .map_err(|e| CliError::new(1, e.to_string()))?;
    let rows: Result<Vec<SweepRow>, CliError> = pool.install(|| {
        jobs.par_iter()
            .map(|&(variant, seed)| {
                let mut run = cfg.clone();
                run.variant = variant;
                run.seed = seed;
                let dir = out.join(format!("{variant}-seed{seed}"));
                let o = train_run(&run, &dir)?;
                let coverage = match run.toy_spec() {
                    Some(spec) => {
                        let x = o.model.sample(
                            run.eval.samples,
                            Batching::Uniform,
                            &mut Streams::new(seed).stream("eval"),
                        )?;
                        Some(mode_coverage(&x, &spec, run.eval.radius_sigmas)?)
                    }
                    None => None,
                };
                Ok(SweepRow {
                    variant,
                    seed,
                    status: match &o.history.status {
                        RunStatus::Completed => "completed".into(),
                        RunStatus::Diverged { .. } => "diverged".into(),
                    },
                    iterations: o.history.records.len(),
                    params: o.model.param_report().total(),
                    coverage,
                })
            })
            .collect()
    });
    let rows = rows?;
    let mut w = csv::Writer::from_writer(create(&out.join("sweep.csv"))?);
    w.write_record([
        "variant",
        "seed",
        "status",
        "iterations",
        "params",
        "covered_modes",
        "void_fraction",
    ])
    .map_err(deligan::Error::from)?;
    for r in &rows {
        let (covered, void) = r
            .coverage
            .as_ref()
            .map_or((String::new(), String::new()), |c| {
                (c.covered_modes.to_string(), c.void_fraction.to_string())
            });
        w.write_record([
            r.variant.to_string(),
            r.seed.to_string(),
            r.status.clone(),
            r.iterations.to_string(),
            r.params.to_string(),
            covered,
            void,
        ])
        .map_err(deligan::Error::from)?;
    }
    w.flush()?;
    Ok(rows)
}
